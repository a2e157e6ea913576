"""Procedural meshes and keyframe tracks for demos and tests.

Everything here is deterministic: the same arguments always produce the
same vertices, triangles, and frames.
"""

from __future__ import annotations

import math

import numpy as np

from .actuation import ActuationSignal
from .dynamics import SimConfig, step
from .errors import MissingBinding, ValidationError
from .lattice import skin_update
from .mesh_io import KeyframeTrack, TriMesh
from .scene import Scene


def box_mesh(divisions: int = 1, size=1.0, center=(0.0, 0.0, 0.0), name: str = "box") -> TriMesh:
    """Axis-aligned box surface with `divisions` quads per edge.

    Shared face borders are welded, so the vertex count is 6*divisions^2 + 2.
    """
    if divisions < 1:
        raise ValidationError(f"divisions must be at least 1, got {divisions}")
    half = 0.5 * np.broadcast_to(np.asarray(size, dtype=np.float64), (3,))
    center = np.asarray(center, dtype=np.float64)
    n = divisions

    verts: list[tuple[float, float, float]] = []
    index: dict[tuple[float, float, float], int] = {}
    tris: list[tuple[int, int, int]] = []

    def vid(p: np.ndarray) -> int:
        key = tuple(round(float(c), 9) for c in p)
        if key not in index:
            index[key] = len(verts)
            verts.append(key)
        return index[key]

    for axis in range(3):
        ua, va = (axis + 1) % 3, (axis + 2) % 3
        for sign in (-1.0, 1.0):
            grid = np.empty((n + 1, n + 1), dtype=np.int64)
            for i in range(n + 1):
                for j in range(n + 1):
                    p = np.empty(3)
                    p[axis] = sign * half[axis]
                    p[ua] = -half[ua] + 2.0 * half[ua] * i / n
                    p[va] = -half[va] + 2.0 * half[va] * j / n
                    grid[i, j] = vid(center + p)
            for i in range(n):
                for j in range(n):
                    a, b = grid[i, j], grid[i + 1, j]
                    c, d = grid[i + 1, j + 1], grid[i, j + 1]
                    if sign > 0:
                        tris.append((a, b, c))
                        tris.append((a, c, d))
                    else:
                        tris.append((a, c, b))
                        tris.append((a, d, c))

    return TriMesh(
        vertices=np.asarray(verts, dtype=np.float64),
        triangles=np.asarray(tris, dtype=np.int32),
        name=name,
    ).validate()


_ICO_PHI = (1.0 + math.sqrt(5.0)) / 2.0

_ICO_VERTS = np.array(
    [
        (-1, _ICO_PHI, 0), (1, _ICO_PHI, 0), (-1, -_ICO_PHI, 0), (1, -_ICO_PHI, 0),
        (0, -1, _ICO_PHI), (0, 1, _ICO_PHI), (0, -1, -_ICO_PHI), (0, 1, -_ICO_PHI),
        (_ICO_PHI, 0, -1), (_ICO_PHI, 0, 1), (-_ICO_PHI, 0, -1), (-_ICO_PHI, 0, 1),
    ],
    dtype=np.float64,
)

_ICO_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


def blob_mesh(subdivisions: int = 3, name: str = "blob") -> TriMesh:
    """Smooth organ-like closed surface: a warped, squashed icosphere.

    subdivisions k gives 10*4^k + 2 vertices.
    """
    if subdivisions < 0:
        raise ValidationError(f"subdivisions must be non-negative, got {subdivisions}")
    verts = [v / np.linalg.norm(v) for v in _ICO_VERTS]
    faces = list(_ICO_FACES)
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        split = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            split += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = split

    unit = np.asarray(verts)
    x, y, z = unit[:, 0], unit[:, 1], unit[:, 2]
    radius = 1.0 + 0.12 * np.sin(2.1 * x + 0.4) * np.cos(1.7 * y) + 0.08 * np.sin(1.3 * z)
    warped = unit * radius[:, None] * np.array([1.0, 0.82, 0.65])
    return TriMesh(
        vertices=warped,
        triangles=np.asarray(faces, dtype=np.int32),
        name=name,
    ).validate()


def static_track(mesh: TriMesh, fps: float, frames: int, period_frames: int | None = None) -> KeyframeTrack:
    """A track whose every frame is the rest mesh."""
    stack = np.repeat(mesh.vertices[None, :, :], frames, axis=0)
    return KeyframeTrack(fps=fps, frames=stack, period_frames=period_frames).validate()


def breathing_track(
    mesh: TriMesh,
    signal: ActuationSignal,
    fps: float,
    period_s: float,
    periods: int = 1,
    amplitude_scale: float = 1.0,
) -> KeyframeTrack:
    """Analytic whole-mesh breathing: vertices scale radially about the
    bbox center by 1 + amplitude_scale * modulation(t)."""
    per = fps * period_s
    if abs(per - round(per)) > 1e-9 or round(per) < 1:
        raise ValidationError(f"fps * period_s must be a positive integer, got {per}")
    per = int(round(per))
    lo, hi = mesh.bbox()
    c = 0.5 * (lo + hi)
    times = np.arange(periods * per) / fps
    m = amplitude_scale * signal.modulation(times)
    frames = c + (mesh.vertices - c)[None, :, :] * (1.0 + np.asarray(m)[:, None, None])
    return KeyframeTrack(fps=fps, frames=frames, period_frames=per).validate()


def record_track(
    scene: Scene,
    cfg: SimConfig,
    fps: float,
    period_s: float,
    periods: int = 1,
    settle_periods: int = 1,
    signals: dict[int, ActuationSignal] | None = None,
) -> KeyframeTrack:
    """Keyframe track recorded from the engine itself.

    Runs the scene from rest under its own actuation, waits `settle_periods`
    for the transient to die out, then captures skinned vertex positions at
    fps for `periods` whole periods. The captured window is periodic, so the
    returned track wraps cleanly.
    """
    if scene.binding is None:
        raise MissingBinding("recording a track needs a skin binding on the scene")
    per = fps * period_s
    if abs(per - round(per)) > 1e-9 or round(per) < 1:
        raise ValidationError(f"fps * period_s must be a positive integer, got {per}")
    per = int(round(per))

    rests = scene.rest_table(signals)
    state = scene.new_state(cfg)
    n_frames = periods * per
    frames = np.empty((n_frames, len(scene.mesh.vertices), 3))
    t0 = settle_periods * period_s
    k = 0
    max_steps = int(math.ceil((t0 + n_frames / fps) / cfg.dt)) + 2
    for _ in range(max_steps):
        step(state, cfg, rests=rests)
        while k < n_frames and t0 + k / fps <= state.time + 1e-12:
            frames[k] = skin_update(scene.binding, state.lattice)
            k += 1
        if k >= n_frames:
            break
    if k < n_frames:
        raise ValidationError("recording ended before all frames were captured")
    return KeyframeTrack(fps=fps, frames=frames, period_frames=per).validate()
