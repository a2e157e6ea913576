"""Triangle mesh and keyframe track I/O.

All geometry enters and leaves the system through this module. Meshes are
Wavefront OBJ (``v``/``f`` records only, quads fan-triangulated); keyframe
tracks are JSON documents with dense per-vertex positions. Units are meters,
seconds, kilograms throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, SchemaError, ValidationError, WidthMismatch

FRAME_FILENAME = "{prefix}_{index:04d}.obj"


@dataclass
class TriMesh:
    """Indexed triangle surface mesh.

    vertices: (V, 3) float64 positions in meters.
    triangles: (T, 3) int32 vertex indices, 0-based.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    name: str = "mesh"

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int32).reshape(-1, 3)

    def validate(self) -> "TriMesh":
        if len(self.vertices) < 3:
            raise ValidationError(f"mesh needs at least 3 vertices, got {len(self.vertices)}")
        if len(self.triangles) < 1:
            raise ValidationError("mesh needs at least 1 triangle")
        if self.triangles.min(initial=0) < 0 or self.triangles.max(initial=0) >= len(self.vertices):
            bad = int(self.triangles.max(initial=0))
            raise ValidationError(f"triangle index {bad} out of range for {len(self.vertices)} vertices")
        same = (self.triangles[:, 0] == self.triangles[:, 1]) & (self.triangles[:, 1] == self.triangles[:, 2])
        if same.any():
            raise ValidationError(f"degenerate triangle (three identical indices) at {int(np.argmax(same))}")
        return self

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def bbox_diagonal(self) -> float:
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))


@dataclass
class KeyframeTrack:
    """Time series of target vertex positions.

    frames: (F, V, 3) float64; every frame has the subject mesh's vertex count.
    period_frames marks one motion cycle when the track is periodic.
    """

    fps: float
    frames: np.ndarray
    period_frames: int | None = None

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)

    def validate(self) -> "KeyframeTrack":
        if self.frames.ndim != 3 or self.frames.shape[2] != 3:
            raise ValidationError("frames must be an (F, V, 3) array")
        if self.fps <= 0:
            raise ValidationError(f"fps must be positive, got {self.fps}")
        if len(self.frames) < 2:
            raise ValidationError(f"track needs at least 2 frames, got {len(self.frames)}")
        if self.period_frames is not None:
            if not (2 <= self.period_frames <= len(self.frames)):
                raise ValidationError(
                    f"period_frames {self.period_frames} outside [2, {len(self.frames)}]"
                )
        return self

    @property
    def width(self) -> int:
        return self.frames.shape[1]

    @property
    def period_seconds(self) -> float | None:
        if self.period_frames is None:
            return None
        return self.period_frames / self.fps

    def _frame_at(self, idx: int) -> np.ndarray:
        n = len(self.frames)
        if idx < n:
            return self.frames[idx]
        if self.period_frames is not None:
            return self.frames[idx % self.period_frames]
        return self.frames[n - 1]

    def sample(self, t: float) -> np.ndarray:
        """Positions at time t: linear interpolation between frames.

        Beyond the last frame the track wraps modulo period_frames when set,
        otherwise holds the last frame.
        """
        pos, _ = self.sample_with_velocity(t)
        return pos

    def sample_with_velocity(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        x = max(t, 0.0) * self.fps
        i = int(math.floor(x))
        frac = x - i
        # Frame times reconstructed through floats land a few ulps off the
        # integer grid; snap so sampling at a keyframe time returns the
        # keyframe exactly.
        if frac > 1.0 - 1e-9:
            i += 1
            frac = 0.0
        elif frac < 1e-9:
            frac = 0.0
        n = len(self.frames)
        if self.period_frames is None and i >= n - 1:
            return self.frames[n - 1].copy(), np.zeros_like(self.frames[0])
        a = self._frame_at(i)
        b = self._frame_at(i + 1)
        pos = a + frac * (b - a)
        vel = (b - a) * self.fps
        return pos, vel


def load_mesh(path) -> TriMesh:
    """Parse a Wavefront OBJ file into a TriMesh.

    Only ``v`` and ``f`` records are used; face entries may carry
    ``/texcoord/normal`` slashes (ignored). Quads are fan-triangulated;
    polygons with more than four vertices are rejected. Indices are 1-based.
    """
    vertices: list[list[float]] = []
    triangles: list[tuple[int, int, int]] = []
    name = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            tag = tokens[0]
            if tag == "v":
                if len(tokens) < 4:
                    raise ParseError(f"vertex record needs 3 coordinates: {line!r}", lineno)
                try:
                    vertices.append([float(tokens[1]), float(tokens[2]), float(tokens[3])])
                except ValueError:
                    raise ParseError(f"non-numeric vertex coordinate: {line!r}", lineno) from None
            elif tag == "f":
                corners = []
                for tok in tokens[1:]:
                    head = tok.split("/", 1)[0]
                    try:
                        idx = int(head)
                    except ValueError:
                        raise ParseError(f"non-integer face index: {tok!r}", lineno) from None
                    if idx < 1:
                        raise ParseError(f"face indices must be 1-based positive, got {idx}", lineno)
                    corners.append(idx - 1)
                if len(corners) < 3:
                    raise ParseError(f"face needs at least 3 vertices: {line!r}", lineno)
                if len(corners) > 4:
                    raise ParseError(
                        f"polygons with {len(corners)} vertices are not supported", lineno
                    )
                triangles.append((corners[0], corners[1], corners[2]))
                if len(corners) == 4:
                    triangles.append((corners[0], corners[2], corners[3]))
            elif tag == "o" and len(tokens) > 1 and name is None:
                name = tokens[1]
            # vn / vt / g / s / usemtl / mtllib are intentionally ignored
    if name is None:
        name = _stem(path)
    mesh = TriMesh(np.array(vertices, dtype=np.float64).reshape(-1, 3),
                   np.array(triangles, dtype=np.int32).reshape(-1, 3),
                   name=name)
    return mesh.validate()


def export_frame(mesh: TriMesh, path) -> None:
    """Write a TriMesh as ASCII OBJ; positions keep 6 decimal places.

    load_mesh(export_frame(m)) reproduces positions to 1e-6 per coordinate
    and the triangle list exactly.
    """
    lines = [f"o {mesh.name}"]
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}")
    for t in mesh.triangles:
        lines.append(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def frame_path(prefix: str, index: int) -> str:
    """Filename for exported frame `index`: "<prefix>_%04d.obj"."""
    return FRAME_FILENAME.format(prefix=prefix, index=index)


def load_keyframes(path, mesh: TriMesh) -> KeyframeTrack:
    """Load a keyframe JSON document and check it against the mesh width.

    Schema: {"fps": number, "period_frames": integer|null,
             "frames": [[[x, y, z], ...], ...]}.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("keyframe document must be a JSON object")
    for key in ("fps", "frames"):
        if key not in doc:
            raise SchemaError(f"missing required key {key!r}")
    fps = doc["fps"]
    if not isinstance(fps, (int, float)) or isinstance(fps, bool) or fps <= 0:
        raise SchemaError(f"fps must be a positive number, got {fps!r}")
    period = doc.get("period_frames")
    if period is not None and (not isinstance(period, int) or isinstance(period, bool)):
        raise SchemaError(f"period_frames must be an integer or null, got {period!r}")
    frames_raw = doc["frames"]
    if not isinstance(frames_raw, list) or len(frames_raw) < 2:
        raise SchemaError("frames must be a list of at least 2 frames")
    expected = len(mesh.vertices)
    for frame in frames_raw:
        if not isinstance(frame, list):
            raise SchemaError("each frame must be a list of [x, y, z] positions")
        if len(frame) != expected:
            raise WidthMismatch(expected, len(frame))
    try:
        frames = np.asarray(frames_raw, dtype=np.float64)
    except ValueError:
        raise SchemaError("frames contain non-numeric or ragged position data") from None
    if frames.ndim != 3 or frames.shape[2] != 3:
        raise SchemaError("positions must be [x, y, z] triples")
    track = KeyframeTrack(fps=float(fps), frames=frames, period_frames=period)
    try:
        return track.validate()
    except ValidationError as exc:
        raise SchemaError(str(exc)) from None


def save_keyframes(track: KeyframeTrack, path) -> None:
    """Write a KeyframeTrack using the keyframe JSON schema."""
    doc = {
        "fps": track.fps,
        "period_frames": track.period_frames,
        "frames": [[[float(c) for c in v] for v in frame] for frame in track.frames],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))


def _stem(path) -> str:
    import os

    return os.path.splitext(os.path.basename(str(path)))[0] or "mesh"
