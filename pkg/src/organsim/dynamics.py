"""Semi-implicit Euler integration of the spring-damper lattice.

Velocities absorb forces first, then positions follow the new velocities;
with the stability gate on the substep size this keeps the stiff lattice
bounded where explicit Euler would blow up. Pinned particles carry zero
inverse mass and never move.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

import numpy as np

from .errors import InstabilityDetected, InstabilityRisk, ValidationError

if TYPE_CHECKING:  # pragma: no cover
    from .lattice import Lattice

# Dimensionless substep criterion: h * sqrt(k_max / m_min) must stay below
# this for the integrator to hold stiff constraints together.
STABILITY_LIMIT = 0.3

# A particle faster than this (m/s) means the integration has diverged.
SPEED_LIMIT = 1e6

ForceFn = Callable[[float, np.ndarray, np.ndarray], np.ndarray]
RestFn = Callable[[float], np.ndarray]


@dataclass
class SimConfig:
    dt: float = 1.0 / 240.0
    substeps: int = 1
    global_damping: float = 0.0  # 1/s, velocity decay applied each substep
    gravity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.gravity = np.asarray(self.gravity, dtype=np.float64).reshape(3)

    def validate(self) -> "SimConfig":
        if self.dt <= 0:
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if self.substeps < 1:
            raise ValidationError(f"substeps must be at least 1, got {self.substeps}")
        if self.global_damping < 0:
            raise ValidationError(f"global_damping must be non-negative, got {self.global_damping}")
        return self

    @property
    def h(self) -> float:
        return self.dt / self.substeps


@dataclass
class SimState:
    lattice: "Lattice"
    time: float = 0.0
    step_count: int = 0


def stability_margin(lattice: "Lattice", cfg: SimConfig) -> float:
    """h * sqrt(max stiffness * max inverse mass); must stay below 0.3."""
    if lattice.n_constraints == 0:
        return 0.0
    return cfg.h * float(np.sqrt(np.max(lattice.stiffness) * np.max(lattice.inverse_mass)))


def ensure_stable(lattice: "Lattice", cfg: SimConfig) -> None:
    margin = stability_margin(lattice, cfg)
    if margin >= STABILITY_LIMIT:
        raise InstabilityRisk(
            f"substep criterion {margin:.3f} exceeds {STABILITY_LIMIT}; "
            "reduce dt, add substeps, soften the material, or raise mass"
        )


def initial_state(lattice: "Lattice", cfg: SimConfig) -> SimState:
    """Fresh state on a private copy of the lattice; rejects unstable setups."""
    cfg.validate()
    ensure_stable(lattice, cfg)
    return SimState(lattice=lattice.copy())


def spring_forces(lattice: "Lattice", rests: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Accumulated spring-damper forces, (N, 3).

    Per constraint with endpoints i, j and separation d = x_i - x_j:
    F_i = [-k_s(|d| - rest) - k_d((v_i - v_j) . dhat)] dhat, F_j = -F_i.
    Constraints shorter than 1e-9 m contribute nothing (direction undefined).
    """
    x, v = lattice.positions, lattice.velocities
    ci, cj = lattice.edges[:, 0], lattice.edges[:, 1]
    d = x[ci] - x[cj]
    length = np.linalg.norm(d, axis=1)
    safe = np.where(length < 1e-9, 1.0, length)
    dhat = d / safe[:, None]
    rel_speed = np.einsum("mc,mc->m", v[ci] - v[cj], dhat)
    magnitude = -lattice.stiffness * (length - rests) - lattice.damping * rel_speed
    magnitude = np.where(length < 1e-9, 0.0, magnitude)
    f = magnitude[:, None] * dhat
    if out is None:
        out = np.zeros_like(x)
    else:
        out[:] = 0.0
    np.add.at(out, ci, f)
    np.add.at(out, cj, -f)
    return out


def step(
    state: SimState,
    cfg: SimConfig,
    rests: RestFn | np.ndarray | None = None,
    extra_forces: ForceFn | None = None,
) -> SimState:
    """Advance one frame of cfg.dt (cfg.substeps integrator substeps).

    `rests` supplies actuated rest lengths: a callable of time, a fixed
    array, or None for the neutral lengths. `extra_forces(t, x, v)` adds
    external forces (keyframe anchors, pokes). Raises InstabilityDetected
    when positions go non-finite or any speed passes 1e6 m/s.
    """
    lat = state.lattice
    h = cfg.h
    damp = max(0.0, 1.0 - h * cfg.global_damping)
    movable = lat.inverse_mass > 0.0
    force = np.zeros_like(lat.positions)

    for s in range(cfg.substeps):
        t = state.step_count * cfg.dt + s * h
        if callable(rests):
            rest_now = rests(t)
        elif rests is not None:
            rest_now = rests
        else:
            rest_now = lat.rest_length0
        spring_forces(lat, rest_now, out=force)
        if extra_forces is not None:
            force += extra_forces(t, lat.positions, lat.velocities)
        accel = force * lat.inverse_mass[:, None]
        accel[movable] += cfg.gravity
        lat.velocities = (lat.velocities + h * accel) * damp
        lat.positions = lat.positions + h * lat.velocities

    state.step_count += 1
    state.time = state.step_count * cfg.dt

    if not np.all(np.isfinite(lat.positions)):
        raise InstabilityDetected(f"non-finite particle position at step {state.step_count}")
    speed_sq = np.einsum("nc,nc->n", lat.velocities, lat.velocities)
    if np.max(speed_sq, initial=0.0) > SPEED_LIMIT**2:
        raise InstabilityDetected(f"particle speed exceeded {SPEED_LIMIT:g} m/s at step {state.step_count}")
    return state


def run(
    state: SimState,
    cfg: SimConfig,
    steps: int,
    rests: RestFn | np.ndarray | None = None,
    extra_forces: ForceFn | None = None,
    on_step: Callable[[SimState], None] | None = None,
) -> SimState:
    for _ in range(steps):
        step(state, cfg, rests=rests, extra_forces=extra_forces)
        if on_step is not None:
            on_step(state)
    return state


def kinetic_energy(lattice: "Lattice") -> float:
    movable = lattice.inverse_mass > 0.0
    v2 = np.einsum("nc,nc->n", lattice.velocities[movable], lattice.velocities[movable])
    return float(0.5 * np.sum(v2 / lattice.inverse_mass[movable]))


def spring_energy(lattice: "Lattice", rests: np.ndarray | None = None) -> float:
    if rests is None:
        rests = lattice.rest_length0
    x = lattice.positions
    d = x[lattice.edges[:, 0]] - x[lattice.edges[:, 1]]
    stretch = np.linalg.norm(d, axis=1) - rests
    return float(0.5 * np.sum(lattice.stiffness * stretch**2))


def total_energy(lattice: "Lattice", rests: np.ndarray | None = None) -> float:
    return kinetic_energy(lattice) + spring_energy(lattice, rests)


def momentum(lattice: "Lattice") -> np.ndarray:
    """Total linear momentum of movable particles, (3,)."""
    movable = lattice.inverse_mass > 0.0
    mass = 1.0 / lattice.inverse_mass[movable]
    return np.asarray(mass[:, None] * lattice.velocities[movable]).sum(axis=0)
