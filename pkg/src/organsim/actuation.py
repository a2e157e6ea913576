"""Self-driving layer: periodic rest-length signals, keyframe coupling,
training-run recording, and Fourier extraction of driving signals.

A region's actuation multiplies constraint rest lengths by
``1 + amplitude_scale * sum_k a_k sin(2 pi f_k t + phi_k)``, clamped away
from zero and doubling so springs can never invert. Signals are fitted from
recorded constraint-length trajectories by DFT peak picking.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

import numpy as np

from .errors import EmptyRegionWarning, MissingBinding, TooFewSamples, ValidationError

if TYPE_CHECKING:  # pragma: no cover
    from .lattice import Lattice, Region, SpringConstraint
    from .mesh_io import KeyframeTrack
    from .scene import Scene

MAX_HARMONICS = 4
AMPLITUDE_BUDGET = 0.9  # sum |a_k| bound; keeps rest-length clamping inactive
MIN_FREQUENCY = 1e-3  # Hz; lower bound applied when normalizing signals

TWO_PI = 2.0 * math.pi


@dataclass
class Harmonic:
    amplitude: float
    frequency: float  # Hz, > 0
    phase: float  # radians

    def as_dict(self) -> dict:
        return {"a": self.amplitude, "f": self.frequency, "phi": self.phase}

    @classmethod
    def from_dict(cls, d: dict) -> "Harmonic":
        return cls(amplitude=float(d["a"]), frequency=float(d["f"]), phase=float(d["phi"]))


@dataclass
class ActuationSignal:
    """Multi-harmonic periodic rest-length modulation (at most 4 harmonics)."""

    harmonics: list[Harmonic] = field(default_factory=list)

    @classmethod
    def zero(cls) -> "ActuationSignal":
        return cls(harmonics=[])

    @classmethod
    def single(cls, amplitude: float, frequency: float, phase: float = 0.0) -> "ActuationSignal":
        return cls(harmonics=[Harmonic(amplitude, frequency, phase)])

    def validate(self) -> "ActuationSignal":
        if len(self.harmonics) > MAX_HARMONICS:
            raise ValidationError(f"at most {MAX_HARMONICS} harmonics, got {len(self.harmonics)}")
        total = sum(abs(h.amplitude) for h in self.harmonics)
        if total > AMPLITUDE_BUDGET + 1e-12:
            raise ValidationError(f"sum of |amplitude| is {total:.6g}, budget is {AMPLITUDE_BUDGET}")
        freqs = [h.frequency for h in self.harmonics]
        if any(f <= 0 for f in freqs):
            raise ValidationError("harmonic frequencies must be positive")
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValidationError("harmonic frequencies must be strictly increasing")
        return self

    def modulation(self, t) -> float | np.ndarray:
        """sum_k a_k sin(2 pi f_k t + phi_k); accepts scalar or array t."""
        out = 0.0 if np.isscalar(t) else np.zeros_like(np.asarray(t, dtype=np.float64))
        for h in self.harmonics:
            out = out + h.amplitude * np.sin(TWO_PI * h.frequency * np.asarray(t) + h.phase)
        return out

    def copy(self) -> "ActuationSignal":
        return ActuationSignal([Harmonic(h.amplitude, h.frequency, h.phase) for h in self.harmonics])

    def as_dict_list(self) -> list[dict]:
        return [h.as_dict() for h in self.harmonics]

    @classmethod
    def from_dict_list(cls, items: list[dict]) -> "ActuationSignal":
        return cls([Harmonic.from_dict(d) for d in items])


def eval_rest(
    constraint: "SpringConstraint",
    signal: ActuationSignal,
    amplitude_scale: float,
    t: float,
    clamp_epsilon: float = 0.1,
) -> float:
    """Actuated rest length at time t for one constraint.

    rest = L0 * clamp(1 + amplitude_scale * modulation(t), eps, 2 - eps).
    """
    rel = 1.0 + amplitude_scale * float(signal.modulation(t))
    rel = min(max(rel, clamp_epsilon), 2.0 - clamp_epsilon)
    return constraint.rest_length0 * rel


class RestLengthTable:
    """Vectorized rest-length provider for a whole lattice.

    Precomputes per-region harmonic arrays and the constraint indices each
    region governs; calling the table with a time returns the (M,) array of
    actuated rest lengths the integrator consumes.
    """

    def __init__(
        self,
        lattice: "Lattice",
        regions: list["Region"],
        clamp_epsilon: float = 0.1,
        signals: dict[int, ActuationSignal] | None = None,
    ):
        self.rest_length0 = lattice.rest_length0
        self.clamp_lo = clamp_epsilon
        self.clamp_hi = 2.0 - clamp_epsilon
        self._groups = []
        for region in regions:
            signal = region.actuation if signals is None else signals.get(region.id, region.actuation)
            if not signal.harmonics or region.amplitude_scale == 0.0:
                continue
            idx = np.nonzero(lattice.edge_region == region.id)[0]
            if len(idx) == 0:
                continue
            a = np.array([h.amplitude for h in signal.harmonics])
            w = np.array([TWO_PI * h.frequency for h in signal.harmonics])
            phi = np.array([h.phase for h in signal.harmonics])
            self._groups.append((idx, region.amplitude_scale, a, w, phi))

    def __call__(self, t: float) -> np.ndarray:
        rel = np.ones_like(self.rest_length0)
        for idx, scale, a, w, phi in self._groups:
            m = float(np.dot(a, np.sin(w * t + phi)))
            rel[idx] = min(max(1.0 + scale * m, self.clamp_lo), self.clamp_hi)
        return self.rest_length0 * rel


@dataclass
class TrainingCoupling:
    """Stiff anchors tying each particle to a keyframe-track target.

    Each particle is anchored to the track position of its bind-time nearest
    mesh vertex, offset by the particle's rest displacement from that vertex
    so a static track holds the lattice exactly at its rest pose. Recording
    fields are filled by record_training_run.
    """

    track: "KeyframeTrack"
    anchor_vertex: np.ndarray  # (N,) nearest mesh vertex per particle at bind time
    anchor_offset: np.ndarray  # (N, 3) particle rest position - vertex rest position
    k_c: float  # anchor stiffness, N/m
    k_cd: float  # anchor damping, N*s/m
    # recording (filled by record_training_run)
    sample_dt: float | None = None
    window_start: float | None = None  # absolute time of the first kept sample
    lengths: np.ndarray | None = None  # (S, M) constraint lengths per kept step
    anchor_forces: np.ndarray | None = None  # (S, N, 3) penalty forces per kept step

    def targets(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        pos, vel = self.track.sample_with_velocity(t)
        return pos[self.anchor_vertex] + self.anchor_offset, vel[self.anchor_vertex]

    def force_fn(self) -> Callable[[float, np.ndarray, np.ndarray], np.ndarray]:
        def anchor_forces(t, x, v):
            target, target_vel = self.targets(t)
            return -self.k_c * (x - target) - self.k_cd * (v - target_vel)

        return anchor_forces


def couple_to_keyframes(
    scene: "Scene",
    track: "KeyframeTrack",
    k_c: float,
    k_cd: float = 0.0,
) -> TrainingCoupling:
    """Anchor every lattice particle to the track via its nearest mesh vertex."""
    from scipy.spatial import cKDTree

    if scene.binding is None:
        raise MissingBinding("scene has no skin binding; bind_skin must run before coupling")
    if k_c <= 0:
        raise ValidationError(f"coupling stiffness must be positive, got {k_c}")
    if track.width != len(scene.mesh.vertices):
        from .errors import WidthMismatch

        raise WidthMismatch(len(scene.mesh.vertices), track.width)
    tree = cKDTree(scene.mesh.vertices)
    _, nearest = tree.query(scene.lattice.positions, k=1)
    nearest = np.asarray(nearest, dtype=np.int64).reshape(-1)
    offsets = scene.lattice.positions - scene.mesh.vertices[nearest]
    return TrainingCoupling(
        track=track,
        anchor_vertex=nearest,
        anchor_offset=offsets,
        k_c=k_c,
        k_cd=k_cd,
    )


def record_training_run(state, coupling: TrainingCoupling, cfg, duration: float) -> TrainingCoupling:
    """Drive the passive lattice by the coupling for `duration` and record.

    Requires the track to declare period_frames and the duration to cover at
    least two motion periods. The run is truncated to a whole number of
    periods; the first period is the transient and is excluded from the kept
    samples. Samples are taken after every step: all constraint lengths and
    all anchor (penalty) forces.
    """
    from .dynamics import step

    period_s = coupling.track.period_seconds
    if period_s is None:
        raise ValidationError("training track must declare period_frames")
    n_periods = int(math.floor(duration / period_s + 1e-9))
    if n_periods < 2:
        raise ValidationError(
            f"duration {duration}s covers {n_periods} period(s); at least 2 required"
        )
    total_steps = int(round(n_periods * period_s / cfg.dt))
    transient_steps = int(round(period_s / cfg.dt))
    kept = total_steps - transient_steps

    lat = state.lattice
    ci, cj = lat.edges[:, 0], lat.edges[:, 1]
    lengths = np.empty((kept, lat.n_constraints))
    forces = np.empty((kept, lat.n_particles, 3))
    anchor = coupling.force_fn()

    for k in range(total_steps):
        step(state, cfg, extra_forces=anchor)
        s = k - transient_steps
        if s >= 0:
            d = lat.positions[ci] - lat.positions[cj]
            lengths[s] = np.linalg.norm(d, axis=1)
            forces[s] = anchor(state.time, lat.positions, lat.velocities)

    coupling.sample_dt = cfg.dt
    coupling.window_start = (transient_steps + 1) * cfg.dt
    coupling.lengths = lengths
    coupling.anchor_forces = forces
    return coupling


def fit_signal(series: np.ndarray, fs: float, harmonics: int) -> tuple[ActuationSignal, float]:
    """Extract a multi-harmonic signal from a relative-length series.

    Picks the `harmonics` largest-magnitude DFT bins (DC excluded) from the
    series sampled at fs Hz. Amplitude is 2|X_k|/N, frequency the bin
    frequency, phase the bin argument shifted for the sine convention.
    Returns the fitted signal (phases relative to the series start) and the
    RMS residual of series minus reconstruction.
    """
    if not (1 <= harmonics <= MAX_HARMONICS):
        raise ValidationError(f"harmonic count must be in [1, {MAX_HARMONICS}], got {harmonics}")
    series = np.asarray(series, dtype=np.float64)
    n = len(series)
    if n < 2 * harmonics + 1:
        raise TooFewSamples(f"{n} samples cannot resolve {harmonics} harmonics (need {2 * harmonics + 1})")

    spectrum = np.fft.rfft(series)
    mags = np.abs(spectrum)
    mags[0] = 0.0  # exclude DC
    order = np.argsort(-mags, kind="stable")[:harmonics]
    floor = 1e-12 * max(1.0, float(np.max(np.abs(series), initial=0.0))) * n

    fitted: list[Harmonic] = []
    for k in sorted(int(k) for k in order):
        if mags[k] <= floor:
            continue
        factor = 1.0 if (n % 2 == 0 and k == n // 2) else 2.0
        amplitude = factor * mags[k] / n
        frequency = k * fs / n
        phase = (cmath.phase(spectrum[k]) + math.pi / 2.0) % TWO_PI
        fitted.append(Harmonic(amplitude, frequency, phase))

    total = sum(abs(h.amplitude) for h in fitted)
    if total > AMPLITUDE_BUDGET:
        warnings.warn(
            f"fitted amplitude sum {total:.3g} exceeds budget {AMPLITUDE_BUDGET}; rescaling",
            stacklevel=2,
        )
        scale = AMPLITUDE_BUDGET / total
        for h in fitted:
            h.amplitude *= scale

    signal = ActuationSignal(fitted).validate()
    t = np.arange(n) / fs
    residual = float(np.sqrt(np.mean((series - signal.modulation(t)) ** 2)))
    return signal, residual


@dataclass
class RegionFit:
    region_id: int
    name: str
    signal: ActuationSignal
    residual: float | None  # None when the region had nothing to fit
    samples_used: int


@dataclass
class FitReport:
    fits: list[RegionFit]

    def by_id(self) -> dict[int, RegionFit]:
        return {f.region_id: f for f in self.fits}

    def signals(self) -> dict[int, ActuationSignal]:
        return {f.region_id: f.signal.copy() for f in self.fits}


def fit_regions(
    coupling: TrainingCoupling,
    lattice: "Lattice",
    regions: list["Region"],
    harmonics: int,
) -> FitReport:
    """Fit one signal per region from the mean relative-length recording.

    Each region's series is the mean over its constraints of l(t)/L0 - 1.
    Fitted phases are shifted to the absolute simulation timeline so the
    signals can drive a fresh run directly. Regions with no constraints are
    skipped with a warning and keep their current signal.
    """
    if coupling.lengths is None or coupling.sample_dt is None:
        raise ValidationError("coupling has no recording; run record_training_run first")
    fs = 1.0 / coupling.sample_dt
    t0 = coupling.window_start or 0.0
    fits = []
    for region in regions:
        idx = np.nonzero(lattice.edge_region == region.id)[0]
        if len(idx) == 0:
            warnings.warn(
                f"region {region.id} ({region.name!r}) has no constraints; fit skipped",
                EmptyRegionWarning,
                stacklevel=2,
            )
            fits.append(RegionFit(region.id, region.name, region.actuation.copy(), None, 0))
            continue
        rel = coupling.lengths[:, idx] / lattice.rest_length0[idx] - 1.0
        series = rel.mean(axis=1)
        signal, residual = fit_signal(series, fs, harmonics)
        for h in signal.harmonics:
            h.phase = (h.phase - TWO_PI * h.frequency * t0) % TWO_PI
        region.actuation = signal.copy()
        fits.append(RegionFit(region.id, region.name, signal, residual, len(series)))
    return FitReport(fits)


def report_to_params(report: FitReport) -> dict:
    """Fitted-parameters document: the interchange between fit, tune, and the UI."""
    return {
        "regions": [
            {
                "id": f.region_id,
                "name": f.name,
                "harmonics": f.signal.as_dict_list(),
                "residual": f.residual,
            }
            for f in sorted(report.fits, key=lambda f: f.region_id)
        ]
    }


def signals_to_params(signals: dict[int, ActuationSignal], regions: list["Region"]) -> dict:
    names = {r.id: r.name for r in regions}
    return {
        "regions": [
            {
                "id": rid,
                "name": names.get(rid, f"region-{rid}"),
                "harmonics": sig.as_dict_list(),
                "residual": None,
            }
            for rid, sig in sorted(signals.items())
        ]
    }


def save_params(doc: dict, path) -> None:
    import json

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_params(path) -> dict[int, ActuationSignal]:
    """Read a fitted-parameters file into {region id: signal}."""
    import json

    from .errors import SchemaError

    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("regions"), list):
        raise SchemaError('parameters file must be {"regions": [...]}')
    out: dict[int, ActuationSignal] = {}
    for entry in doc["regions"]:
        if not isinstance(entry, dict) or "id" not in entry or "harmonics" not in entry:
            raise SchemaError("each region entry needs 'id' and 'harmonics'")
        try:
            signal = ActuationSignal.from_dict_list(entry["harmonics"]).validate()
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad harmonics for region {entry.get('id')}: {exc}") from None
        except ValidationError as exc:
            raise SchemaError(f"invalid signal for region {entry.get('id')}: {exc}") from None
        out[int(entry["id"])] = signal
    return out


def apply_signals(regions: list["Region"], signals: dict[int, ActuationSignal]) -> None:
    """Install signals onto regions by id; ids absent from the map are untouched."""
    known = {r.id for r in regions}
    unknown = set(signals) - known
    if unknown:
        raise ValidationError(f"signals reference unknown region ids {sorted(unknown)}")
    for region in regions:
        if region.id in signals:
            region.actuation = signals[region.id].copy()
