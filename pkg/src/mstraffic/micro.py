"""Second-order follow-the-leader models and the periodic ring-road simulator."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateGapError
from .macro import VelocityLaw

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArzMicroParams:
    """Relaxation-type acceleration whose many-particle limit is second order."""

    tau: float
    gamma: float = 0.0
    v_ref: float = 1.0

    def __post_init__(self):
        if self.tau <= 0 or self.gamma < 0 or self.v_ref <= 0:
            raise ConfigError("need tau > 0, gamma >= 0, v_ref > 0")


@dataclass(frozen=True)
class ZzParams:
    """Piecewise-linear optimal-velocity relaxation (stop & go producer)."""

    tau: float
    alpha: float
    delta_min: float
    v_max: float = 1.0

    def __post_init__(self):
        if self.tau <= 0 or self.alpha <= 0 or self.delta_min <= 0:
            raise ConfigError("need tau, alpha, delta_min > 0")


def accel_arz(
    x: float,
    x_next: float,
    v: float,
    v_next: float,
    p: ArzMicroParams,
    ell_n: float,
    law: VelocityLaw,
) -> float:
    gap = x_next - x
    if gap <= 0.0:
        raise DegenerateGapError(f"non-positive gap {gap}")
    interaction = (
        p.v_ref * (ell_n / law.rho_max) ** p.gamma * (v_next - v) / gap ** (p.gamma + 1)
    )
    relaxation = (law.v(law.rho_max * ell_n / gap) - v) / p.tau
    return interaction + relaxation


def v_zz(delta, p: ZzParams):
    """Desired velocity as a function of spacing: 0, linear ramp, v_max."""
    return np.clip(p.alpha * (delta - p.delta_min), 0.0, p.v_max)


def accel_zz(x: float, x_next: float, v: float, p: ZzParams) -> float:
    """Relaxation toward the spacing-dependent desired velocity.

    The caller pre-wraps x_next on a ring; a non-positive gap falls on the
    stopped branch of v_zz, so collisions do not abort the integration.
    """
    return (float(v_zz(x_next - x, p)) - v) / p.tau


def ftl_gap_equilibrium_velocity(
    x: float, x_next: float, ell_n: float, law: VelocityLaw
) -> float:
    """First-order follow-the-leader velocity v*(rho_max * ell_n / gap)."""
    gap = x_next - x
    if gap <= 0.0:
        raise DegenerateGapError(f"non-positive gap {gap}")
    return float(law.v(law.rho_max * ell_n / gap))


@dataclass
class RingRoad:
    """Vehicles on a circular road; positions in [0, L), cyclically ordered."""

    length: float
    pos: np.ndarray
    vel: np.ndarray

    @property
    def n_vehicles(self) -> int:
        return len(self.pos)

    def gaps(self) -> np.ndarray:
        """Forward spacing of each vehicle to its cyclic successor."""
        return (np.roll(self.pos, -1) - self.pos) % self.length


def ring_init(n_vehicles: int, length: float) -> RingRoad:
    """Standing start X_k = kL/(N+1): equispaced except the doubled wrap gap."""
    if n_vehicles < 2 or length <= 0:
        raise ConfigError("need at least 2 vehicles and a positive length")
    k = np.arange(1, n_vehicles + 1, dtype=float)
    return RingRoad(
        length=length,
        pos=k * length / (n_vehicles + 1),
        vel=np.zeros(n_vehicles),
    )


def ring_step(ring: RingRoad, p: ZzParams, dt: float) -> RingRoad:
    """Explicit Euler step with periodic wrap; every vehicle follows its
    cyclic successor (no leader on a ring)."""
    gaps = ring.gaps()
    n_coll = int(np.count_nonzero(gaps <= 0.0))
    if n_coll:
        log.warning("ring: %d non-positive gaps (collision)", n_coll)
    accel = (v_zz(gaps, p) - ring.vel) / p.tau
    new_pos = (ring.pos + dt * ring.vel) % ring.length
    new_vel = ring.vel + dt * accel
    n_neg = int(np.count_nonzero(new_vel < 0.0))
    if n_neg:
        log.debug("ring: clamped %d negative velocities", n_neg)
        new_vel = np.maximum(new_vel, 0.0)
    return RingRoad(length=ring.length, pos=new_pos, vel=new_vel)


def run_ring(
    ring: RingRoad, p: ZzParams, dt: float, n_steps: int
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate and return trajectories (n_steps+1, N): positions, velocities."""
    n = ring.n_vehicles
    pos = np.empty((n_steps + 1, n))
    vel = np.empty((n_steps + 1, n))
    pos[0], vel[0] = ring.pos, ring.vel
    for i in range(n_steps):
        ring = ring_step(ring, p, dt)
        pos[i + 1], vel[i + 1] = ring.pos, ring.vel
    return pos, vel
