"""First-order macroscopic model: velocity law, Godunov flux, LWR stepper."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .core import Grid1D, ScalingParams
from .errors import CflError, ConfigError, DomainError

log = logging.getLogger(__name__)

_N_SAMPLES = 10_000


@dataclass
class VelocityLaw:
    """Equilibrium velocity v*(rho), decreasing from v_max to 0.

    Either the linear law ``v_max * (1 - rho/rho_max)`` or a user-supplied
    decreasing table interpolated piecewise-linearly (which preserves
    monotonicity exactly).
    """

    rho_max: float = 1.0
    v_max: float = 1.0
    table_rho: np.ndarray | None = None
    table_v: np.ndarray | None = None
    _sigma: float | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.rho_max <= 0 or self.v_max <= 0:
            raise ConfigError("rho_max and v_max must be positive")
        if (self.table_rho is None) != (self.table_v is None):
            raise ConfigError("table law needs both rho and v samples")
        if self.table_rho is not None:
            r = np.asarray(self.table_rho, dtype=float)
            v = np.asarray(self.table_v, dtype=float)
            if r.shape != v.shape or r.ndim != 1 or len(r) < 2:
                raise ConfigError("table samples must be two equal-length 1-D arrays")
            if r[0] != 0.0 or r[-1] != self.rho_max or np.any(np.diff(r) <= 0):
                raise ConfigError("table abscissae must increase from 0 to rho_max")
            if v[0] != self.v_max or v[-1] != 0.0 or np.any(np.diff(v) > 0):
                raise ConfigError(
                    "table velocities must decrease from v_max at rho=0 to 0 at rho_max"
                )
            self.table_rho = r
            self.table_v = v

    @classmethod
    def linear(cls, rho_max: float = 1.0, v_max: float = 1.0) -> "VelocityLaw":
        return cls(rho_max=rho_max, v_max=v_max)

    @property
    def is_linear(self) -> bool:
        return self.table_rho is None

    def clamp(self, rho):
        return np.clip(rho, 0.0, self.rho_max)

    def v(self, rho):
        """v*(rho); out-of-range densities are clamped into [0, rho_max]."""
        r = self.clamp(rho)
        if self.is_linear:
            return self.v_max * (1.0 - r / self.rho_max)
        return np.interp(r, self.table_rho, self.table_v)

    def flux(self, rho):
        r = self.clamp(rho)
        return r * self.v(r)

    @property
    def sigma(self) -> float:
        """Critical density argmax f, cached."""
        if self._sigma is None:
            self._sigma = critical_density(self)
        return self._sigma


def equilibrium_velocity(rho, law: VelocityLaw):
    return law.v(rho)


def flux(rho, law: VelocityLaw):
    return law.flux(rho)


def critical_density(law: VelocityLaw) -> float:
    """argmax of f on [0, rho_max]; closed form for the linear law."""
    if law.is_linear:
        return 0.5 * law.rho_max
    samples = np.linspace(0.0, law.rho_max, _N_SAMPLES)
    f = law.flux(samples)
    peak = int(np.argmax(f))
    rising = np.diff(f[: peak + 1]) >= -1e-14
    falling = np.diff(f[peak:]) <= 1e-14
    if not (rising.all() and falling.all()):
        raise ConfigError("tabulated flux is not unimodal")
    lo = samples[max(peak - 1, 0)]
    hi = samples[min(peak + 1, _N_SAMPLES - 1)]
    res = optimize.minimize_scalar(
        lambda r: -law.flux(r), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-10},
    )
    return float(res.x)


def godunov_flux(rho_minus: float, rho_plus: float, law: VelocityLaw) -> float:
    """Interface flux from the local Riemann problem (four-case formula)."""
    if not (0.0 <= rho_minus <= law.rho_max and 0.0 <= rho_plus <= law.rho_max):
        raise DomainError(
            f"densities ({rho_minus}, {rho_plus}) outside [0, {law.rho_max}]"
        )
    if rho_minus <= rho_plus:
        return min(law.flux(rho_minus), law.flux(rho_plus))
    sigma = law.sigma
    if rho_minus < sigma:
        return law.flux(rho_minus)
    if rho_plus <= sigma:
        return law.flux(sigma)
    return law.flux(rho_plus)


def cfl_bound(law: VelocityLaw) -> float:
    """Largest admissible dt/dx: min of 1/max|f'| and 1/v_max."""
    if law.is_linear:
        max_df = law.v_max  # |f'| = v_max * |1 - 2 rho/rho_max| <= v_max
    else:
        r = np.linspace(0.0, law.rho_max, _N_SAMPLES)
        f = law.flux(r)
        max_df = float(np.max(np.abs(np.diff(f) / np.diff(r))))
    return min(1.0 / max_df, 1.0 / law.v_max)


def interface_godunov_fluxes(rho: np.ndarray, grid: Grid1D, law: VelocityLaw) -> np.ndarray:
    """Godunov flux at every interface.

    Interface i sits at the left edge of cell i. Periodic grids have n_cells
    interfaces (interface 0 wraps); free-outflow grids have n_cells + 1, with
    zero-gradient ghost cells at both ends. Densities are sanitized into
    [0, rho_max] before evaluation.
    """
    r = law.clamp(rho)
    if grid.periodic:
        lefts = np.roll(r, 1)
        rights = r
    else:
        lefts = np.concatenate(([r[0]], r))
        rights = np.concatenate((r, [r[-1]]))
    return np.array([godunov_flux(a, b, law) for a, b in zip(lefts, rights)])


def apply_interface_fluxes(rho: np.ndarray, h: np.ndarray, lam: float, grid: Grid1D) -> np.ndarray:
    """Conservative update: one flux value per interface, used on both sides."""
    if grid.periodic:
        inflow = h
        outflow = np.roll(h, -1)
    else:
        inflow = h[:-1]
        outflow = h[1:]
    return rho + lam * (inflow - outflow)


def lwr_step(
    rho: np.ndarray, grid: Grid1D, scaling: ScalingParams, law: VelocityLaw
) -> np.ndarray:
    """One Godunov step of the pure LWR model."""
    bound = cfl_bound(law)
    if scaling.lam >= bound:
        raise CflError(
            f"lambda = dt/dx = {scaling.lam} violates the CFL bound {bound}"
        )
    g = interface_godunov_fluxes(rho, grid, law)
    return apply_interface_fluxes(rho, g, scaling.lam, grid)
