"""Grid geometry, micro/macro scaling constants, and vehicle bookkeeping."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, OutOfDomainError

log = logging.getLogger(__name__)

PERIODIC = "periodic"
FREE = "free"

# Positions sitting numerically on a cell interface are snapped into the
# right-hand cell (half-open convention), tolerance in units of dx.
_EDGE_SNAP = 1e-9

# Tolerance for "how many vehicles fit this density" floor: protects against
# ratios like 0.3 * 20 = 6.000000000000001 landing one vehicle short.
_FLOOR_SNAP = 1e-9


@dataclass(frozen=True)
class Grid1D:
    """Uniform cell decomposition of the road.

    Cell j is centered at ``x_min + j*dx`` and covers the half-open interval
    ``[center - dx/2, center + dx/2)``.
    """

    x_min: float
    n_cells: int
    dx: float
    boundary_mode: str = PERIODIC

    def __post_init__(self):
        if self.dx <= 0:
            raise ConfigError(f"dx must be positive, got {self.dx}")
        if self.n_cells < 3:
            raise ConfigError(f"need at least 3 cells, got {self.n_cells}")
        if self.boundary_mode not in (PERIODIC, FREE):
            raise ConfigError(f"unknown boundary mode {self.boundary_mode!r}")

    @property
    def periodic(self) -> bool:
        return self.boundary_mode == PERIODIC

    @property
    def length(self) -> float:
        return self.n_cells * self.dx

    @property
    def left_edge(self) -> float:
        return self.x_min - 0.5 * self.dx

    @property
    def right_edge(self) -> float:
        return self.left_edge + self.length

    def centers(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_cells)

    def cell_left_edge(self, j: int) -> float:
        return self.left_edge + j * self.dx

    def wrap(self, pos: float) -> float:
        """Normalize a position to [left_edge, right_edge) on a ring."""
        off = (pos - self.left_edge) % self.length
        if off >= self.length:  # (x % L) can round up to L
            off = 0.0
        return self.left_edge + off


def cell_index(pos: float, grid: Grid1D) -> int:
    """Cell id under the half-open convention; wraps first on a ring."""
    if grid.periodic:
        pos = grid.wrap(pos)
    elif pos < grid.left_edge or pos >= grid.right_edge:
        raise OutOfDomainError(
            f"position {pos} outside road [{grid.left_edge}, {grid.right_edge})"
        )
    # r measures pos in cell widths from the left edge; the snap keeps a
    # position that is numerically *on* an interface in the right-hand cell.
    r = (pos - grid.x_min) / grid.dx + 0.5
    j = int(math.floor(r + _EDGE_SNAP))
    if grid.periodic:
        j %= grid.n_cells
    else:
        j = min(max(j, 0), grid.n_cells - 1)
    return j


@dataclass(frozen=True)
class ScalingParams:
    """Ties the microscopic vehicle size to the macroscopic grid."""

    dx: float
    dt: float
    gamma_max: int
    rho_max: float = 1.0
    v_max: float = 1.0

    def __post_init__(self):
        if self.dx <= 0 or self.dt <= 0:
            raise ConfigError("dx and dt must be positive")
        if int(self.gamma_max) != self.gamma_max or self.gamma_max < 1:
            raise ConfigError(f"gamma_max must be an integer >= 1, got {self.gamma_max}")
        if self.rho_max <= 0 or self.v_max <= 0:
            raise ConfigError("rho_max and v_max must be positive")

    @property
    def ell_n(self) -> float:
        """Vehicle length/mass; always recomputed from dx and gamma_max."""
        return self.dx / self.gamma_max

    @property
    def lam(self) -> float:
        return self.dt / self.dx


@dataclass(slots=True)
class Vehicle:
    vid: int
    pos: float
    vel: float
    activated_at: int
    next_id: int | None = None

    @property
    def is_leader(self) -> bool:
        return self.next_id is None


@dataclass
class Diagnostics:
    """Monitored anomalies; none of these aborts a run."""

    range_violations: int = 0
    worst_excursion: float = 0.0
    negative_vel_clamps: int = 0
    over_vmax_clamps: int = 0
    collisions: int = 0
    max_crossing: int = 0
    vehicles_exited: int = 0
    peak_vehicles: int = 0


@dataclass
class SimState:
    """Macroscopic field plus the currently active vehicles."""

    grid: Grid1D
    rho: np.ndarray
    vehicles: list[Vehicle] = field(default_factory=list)
    step: int = 0
    theta: float = 0.0
    next_vid: int = 0
    diagnostics: Diagnostics = field(default_factory=Diagnostics)
    # net mass that has left through the boundaries of a free-outflow road
    # (outflow minus inflow, cumulative); stays 0.0 on a ring
    boundary_balance: float = 0.0

    def new_vid(self) -> int:
        vid = self.next_vid
        self.next_vid += 1
        return vid


def total_mass(rho: np.ndarray, grid: Grid1D) -> float:
    """Sum of cell masses; fsum makes the result reorder-invariant."""
    return math.fsum(rho) * grid.dx


def vehicles_for_density(rho_j: float, rho_max: float, gamma_max: int) -> int:
    """Number of vehicles representing a cell of density rho_j."""
    r = (rho_j / rho_max) * gamma_max
    return max(int(math.floor(r + _FLOOR_SNAP)), 0)


def seed_vehicles_from_density(
    rho: np.ndarray,
    cells,
    grid: Grid1D,
    scaling: ScalingParams,
    law,
    state: SimState,
) -> list[Vehicle]:
    """Populate empty cells with equispaced vehicles at the local equilibrium.

    Each target cell j receives ``floor((rho_j/rho_max) * gamma_max)`` vehicles
    placed at the centers of equal sub-intervals, all moving at v*(rho_j).
    Returns the new vehicles (already appended to the state).
    """
    created: list[Vehicle] = []
    for j in sorted(cells):
        m = vehicles_for_density(rho[j], scaling.rho_max, scaling.gamma_max)
        if m == 0:
            continue
        gap_mass = rho[j] * grid.dx - m * scaling.ell_n
        if gap_mass > 1e-12:
            log.debug("cell %d: micro mass undercounts macro mass by %g", j, gap_mass)
        left = grid.cell_left_edge(j)
        vel = law.v(rho[j])
        sub = grid.dx / m
        for i in range(m):
            veh = Vehicle(
                vid=state.new_vid(),
                pos=left + (i + 0.5) * sub,
                vel=vel,
                activated_at=state.step,
            )
            created.append(veh)
    state.vehicles.extend(created)
    return created
