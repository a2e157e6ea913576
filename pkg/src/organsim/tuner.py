"""Objective scoring of actuation parameters against a keyframe track, and
a simulated-annealing refinement loop around it.

The objective replays the scene free of anchors, driven only by the
candidate signals, and measures RMS particle error against the track
targets, normalized by the mesh bounding-box diagonal. Annealing perturbs
all harmonics at once, cooling both the acceptance temperature and the
perturbation scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .actuation import (
    AMPLITUDE_BUDGET,
    MIN_FREQUENCY,
    TWO_PI,
    ActuationSignal,
    TrainingCoupling,
)
from .dynamics import SimConfig, step
from .errors import InstabilityDetected, ValidationError
from .mesh_io import KeyframeTrack
from .scene import Scene


def _anchors(scene: Scene) -> tuple[np.ndarray, np.ndarray]:
    """Nearest mesh vertex per particle and the rest-pose offset to it."""
    from scipy.spatial import cKDTree

    tree = cKDTree(scene.mesh.vertices)
    _, nearest = tree.query(scene.lattice.positions, k=1)
    nearest = np.asarray(nearest, dtype=np.int64).reshape(-1)
    offsets = scene.lattice.positions - scene.mesh.vertices[nearest]
    return nearest, offsets


def _replay_error(
    scene: Scene,
    track: KeyframeTrack,
    cfg: SimConfig,
    signals: dict[int, ActuationSignal] | None,
    eval_periods: int,
    extra_forces=None,
) -> float:
    """RMS particle-to-target distance over the evaluation window,
    normalized by the mesh bbox diagonal. The first period is transient and
    not scored. Diverging runs score +inf."""
    period_s = track.period_seconds
    if period_s is None:
        raise ValidationError("objective needs a track with period_frames set")
    if eval_periods < 1:
        raise ValidationError(f"eval_periods must be at least 1, got {eval_periods}")

    nearest, offsets = _anchors(scene)
    rests = scene.rest_table(signals)
    state = scene.new_state(cfg)
    diag = scene.mesh.bbox_diagonal()

    frame_dt = 1.0 / track.fps
    first = int(round(period_s * track.fps))  # first scored frame index
    last = int(round((eval_periods + 1) * period_s * track.fps))
    compare = first

    total = 0.0
    count = 0
    total_steps = int(math.ceil(last * frame_dt / cfg.dt)) + 1
    try:
        for _ in range(total_steps):
            step(state, cfg, rests=rests, extra_forces=extra_forces)
            while compare < last and compare * frame_dt <= state.time + 1e-12:
                target = track.sample(compare * frame_dt)[nearest] + offsets
                err = state.lattice.positions - target
                total += float(np.sum(err * err))
                count += len(err)
                compare += 1
            if compare >= last:
                break
    except InstabilityDetected:
        return math.inf
    return math.sqrt(total / count) / diag


def objective(
    scene: Scene,
    track: KeyframeTrack,
    cfg: SimConfig,
    signals: dict[int, ActuationSignal] | None = None,
    eval_periods: int = 2,
) -> float:
    """Score signals by free replay against the track (lower is better)."""
    return _replay_error(scene, track, cfg, signals, eval_periods)


def coupled_objective(
    scene: Scene,
    track: KeyframeTrack,
    cfg: SimConfig,
    coupling: TrainingCoupling,
    signals: dict[int, ActuationSignal] | None = None,
    eval_periods: int = 2,
) -> float:
    """Same score with the keyframe anchors still attached."""
    return _replay_error(
        scene, track, cfg, signals, eval_periods, extra_forces=coupling.force_fn()
    )


def drift(
    scene: Scene,
    track: KeyframeTrack,
    cfg: SimConfig,
    coupling: TrainingCoupling,
    signals: dict[int, ActuationSignal] | None = None,
    eval_periods: int = 2,
) -> dict:
    """How much worse the free replay tracks than the anchored one."""
    free = objective(scene, track, cfg, signals, eval_periods)
    anchored = coupled_objective(scene, track, cfg, coupling, signals, eval_periods)
    return {"free": free, "coupled": anchored, "drift": free - anchored}


@dataclass
class AnnealConfig:
    iterations: int = 200
    population: int = 8
    seed: int = 0
    # Initial acceptance temperature in objective units; None scales it to
    # one fifth of the starting objective so acceptance is neither a random
    # walk nor pure greed regardless of problem scale.
    t0: float | None = None
    cooling: float = 0.97  # temperature multiplier per iteration
    sigma_amplitude: float = 0.02
    sigma_frequency: float = 0.05  # Hz
    sigma_phase: float = 0.15  # radians
    sigma_floor: float = 0.1  # perturbation scale never cools below this fraction
    eval_periods: int = 2

    def validate(self) -> "AnnealConfig":
        if self.iterations < 1 or self.population < 1:
            raise ValidationError("iterations and population must be at least 1")
        if not (0.0 < self.cooling <= 1.0):
            raise ValidationError(f"cooling must be in (0, 1], got {self.cooling}")
        if self.t0 is not None and self.t0 <= 0:
            raise ValidationError(f"t0 must be positive, got {self.t0}")
        return self


def _clamp_signals(signals: dict[int, ActuationSignal]) -> None:
    """Project perturbed signals back into the valid set, in place."""
    for sig in signals.values():
        for h in sig.harmonics:
            h.frequency = max(h.frequency, MIN_FREQUENCY)
            h.phase = h.phase % TWO_PI
        sig.harmonics.sort(key=lambda h: h.frequency)
        for prev, cur in zip(sig.harmonics, sig.harmonics[1:]):
            if cur.frequency <= prev.frequency:
                cur.frequency = prev.frequency + 1e-6
        total = sum(abs(h.amplitude) for h in sig.harmonics)
        if total > AMPLITUDE_BUDGET:
            factor = AMPLITUDE_BUDGET / total
            for h in sig.harmonics:
                h.amplitude *= factor


def _perturb(
    signals: dict[int, ActuationSignal],
    rng: np.random.Generator,
    cfg: AnnealConfig,
    scale: float,
) -> dict[int, ActuationSignal]:
    """One Gaussian-perturbed candidate. Draw order is fixed (region id
    ascending, harmonic index, then amplitude/frequency/phase) so a seed
    pins the whole run."""
    out: dict[int, ActuationSignal] = {}
    for rid in sorted(signals):
        sig = signals[rid].copy()
        for h in sig.harmonics:
            h.amplitude += scale * cfg.sigma_amplitude * rng.standard_normal()
            h.frequency += scale * cfg.sigma_frequency * rng.standard_normal()
            h.phase += scale * cfg.sigma_phase * rng.standard_normal()
        out[rid] = sig
    _clamp_signals(out)
    return out


@dataclass
class TuneResult:
    best_signals: dict[int, ActuationSignal]
    best_objective: float
    initial_objective: float
    accepted: int
    evaluations: int
    history: list[dict] = field(repr=False, default_factory=list)


ProgressFn = Callable[[int, float, float, float], None]


def anneal(
    scene: Scene,
    track: KeyframeTrack,
    cfg: SimConfig,
    anneal_cfg: AnnealConfig,
    signals: dict[int, ActuationSignal] | None = None,
    on_iteration: ProgressFn | None = None,
) -> TuneResult:
    """Refine signals by simulated annealing against the replay objective.

    Each iteration scores `population` perturbed candidates, then considers
    only the best of them: accepted outright when it improves, else with
    probability exp(-delta/T). The returned signals are the best seen across
    the whole run, not the final accepted state. `on_iteration` receives
    (iteration, current objective, best objective, temperature).
    """
    anneal_cfg.validate()
    if signals is None:
        signals = {r.id: r.actuation.copy() for r in scene.regions if r.actuation.harmonics}
    else:
        signals = {rid: sig.copy() for rid, sig in signals.items()}
    if not any(sig.harmonics for sig in signals.values()):
        raise ValidationError("nothing to tune: no region has a signal with harmonics")

    rng = np.random.default_rng(anneal_cfg.seed)
    current = {rid: sig.copy() for rid, sig in signals.items()}
    current_j = objective(scene, track, cfg, current, anneal_cfg.eval_periods)
    best = {rid: sig.copy() for rid, sig in current.items()}
    best_j = current_j
    initial_j = current_j
    accepted = 0
    evaluations = 1
    t0 = anneal_cfg.t0
    if t0 is None:
        t0 = 0.2 * current_j if math.isfinite(current_j) and current_j > 0 else 0.05
    temperature = t0
    history = []

    for it in range(anneal_cfg.iterations):
        scale = max(temperature / t0, anneal_cfg.sigma_floor)
        candidates = [
            _perturb(current, rng, anneal_cfg, scale) for _ in range(anneal_cfg.population)
        ]
        scores = [
            objective(scene, track, cfg, cand, anneal_cfg.eval_periods) for cand in candidates
        ]
        evaluations += len(candidates)
        pick = int(np.argmin(scores))
        cand_j = scores[pick]

        if cand_j < best_j:
            best = {rid: sig.copy() for rid, sig in candidates[pick].items()}
            best_j = cand_j

        delta = cand_j - current_j
        if delta < 0:
            take = True
        else:
            # delta may be inf (diverged candidate) or nan (both runs
            # diverged); the uniform draw still happens so the RNG stream
            # does not depend on objective values.
            prob = math.exp(-delta / temperature) if math.isfinite(delta) else 0.0
            take = rng.uniform() < prob
        if take:
            current = candidates[pick]
            current_j = cand_j
            accepted += 1

        history.append(
            {
                "iteration": it,
                "objective": current_j,
                "best": best_j,
                "temperature": temperature,
            }
        )
        if on_iteration is not None:
            on_iteration(it, current_j, best_j, temperature)
        temperature *= anneal_cfg.cooling

    return TuneResult(
        best_signals=best,
        best_objective=best_j,
        initial_objective=initial_j,
        accepted=accepted,
        evaluations=evaluations,
        history=history,
    )
