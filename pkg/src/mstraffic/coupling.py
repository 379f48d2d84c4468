"""Multi-scale engine: activation/labeling/deactivation of microscopic
vehicles, counted interface fluxes, and the conservative hybrid density update.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import (
    Diagnostics,
    ScalingParams,
    SimState,
    Vehicle,
    cell_index,
    seed_vehicles_from_density,
)
from .errors import CflError, ConfigError, ConsistencyError, DegenerateGapError
from .macro import (
    VelocityLaw,
    apply_interface_fluxes,
    cfl_bound,
    interface_godunov_fluxes,
)
from .micro import ArzMicroParams, ZzParams, accel_arz, accel_zz

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ActivationParams:
    """Thresholds ruling when microscopic vehicles appear and disappear."""

    delta_v: float          # macroscopic velocity jump that triggers activation
    delta_t_steps: int      # minimal active duration, in time steps
    delta_big_v: float      # velocity tolerance allowing deactivation

    def __post_init__(self):
        if self.delta_v <= 0 or self.delta_t_steps <= 0 or self.delta_big_v <= 0:
            raise ConfigError("activation thresholds must be strictly positive")

    @classmethod
    def from_time(cls, delta_v: float, delta_t: float, delta_big_v: float, dt: float):
        """Accept the minimal duration as absolute time; normalized to steps."""
        return cls(delta_v, max(int(round(delta_t / dt)), 1), delta_big_v)


@dataclass(frozen=True)
class MultiscaleParams:
    scaling: ScalingParams
    law: VelocityLaw
    activation: ActivationParams
    model: ArzMicroParams | ZzParams
    clamp_density: bool = False


@dataclass(frozen=True)
class Event:
    step: int
    kind: str               # activation | deactivation | exit | collision
    cell: int | None = None
    vehicle: int | None = None
    count: int | None = None
    reason: str | None = None


def _record(recorder, event: Event) -> None:
    if recorder is not None:
        recorder.append(event)


def count_vehicles_per_cell(state: SimState) -> np.ndarray:
    gamma = np.zeros(state.grid.n_cells, dtype=int)
    for v in state.vehicles:
        gamma[cell_index(v.pos, state.grid)] += 1
    return gamma


def activation_cells(
    rho: np.ndarray, gamma: np.ndarray, grid, law: VelocityLaw, delta_v: float
) -> set[int]:
    """Empty cells in the 4-cell windows around super-threshold velocity jumps.

    All jump conditions are evaluated against the same pre-activation
    occupancy snapshot; overlapping windows are unioned.
    """
    n = grid.n_cells
    vstar = np.asarray(law.v(rho))
    targets: set[int] = set()
    if grid.periodic:
        jump = np.abs(np.roll(vstar, -1) - vstar) > delta_v
        for j in np.flatnonzero(jump):
            for i in (j - 1, j, j + 1, j + 2):
                targets.add(int(i) % n)
    else:
        jump = np.abs(vstar[1:] - vstar[:-1]) > delta_v
        for j in np.flatnonzero(jump):
            for i in (j - 1, j, j + 1, j + 2):
                if 0 <= i < n:
                    targets.add(int(i))
    return {j for j in targets if gamma[j] == 0}


def activate(
    state: SimState, params: MultiscaleParams, gamma: np.ndarray, recorder=None
) -> int:
    """Seed vehicles around macroscopic velocity jumps; returns #vehicles added."""
    targets = activation_cells(
        state.rho, gamma, state.grid, params.law, params.activation.delta_v
    )
    if not targets:
        return 0
    created = seed_vehicles_from_density(
        state.rho, targets, state.grid, params.scaling, params.law, state
    )
    per_cell: dict[int, int] = {}
    for veh in created:
        j = cell_index(veh.pos, state.grid)
        per_cell[j] = per_cell.get(j, 0) + 1
    for j, m in sorted(per_cell.items()):
        _record(recorder, Event(state.step + 1, "activation", cell=j, count=m))
    return len(created)


def label_next(state: SimState) -> list[Vehicle]:
    """Set forward links; returns vehicles sorted by position.

    A vehicle whose forward gap exceeds dx is a leader. On an open road the
    rightmost vehicle is a leader; on a ring the forward neighbor wraps.
    """
    grid = state.grid
    vs = sorted(state.vehicles, key=lambda v: (v.pos, v.vid))
    n = len(vs)
    for i, v in enumerate(vs):
        if i == n - 1:
            if grid.periodic and n > 1:
                gap = (vs[0].pos - v.pos) % grid.length
                v.next_id = vs[0].vid if 0 < gap <= grid.dx else None
            else:
                v.next_id = None
        else:
            gap = vs[i + 1].pos - v.pos
            v.next_id = vs[i + 1].vid if gap <= grid.dx else None
    return vs


def _forward_gap(v: Vehicle, nxt: Vehicle, grid) -> float:
    gap = nxt.pos - v.pos
    if grid.periodic and gap <= 0:
        gap = (nxt.pos - v.pos) % grid.length
    return gap


def deactivate_followers(
    state: SimState, params: MultiscaleParams, recorder=None
) -> int:
    """Remove followers that are old enough and back at gap equilibrium."""
    ell = params.scaling.ell_n
    law = params.law
    act = params.activation
    by_id = {v.vid: v for v in state.vehicles}
    doomed = []
    for v in state.vehicles:
        if v.next_id is None:
            continue
        if state.step - v.activated_at <= act.delta_t_steps:
            continue
        nxt = by_id.get(v.next_id)
        if nxt is None:
            raise ConsistencyError(f"vehicle {v.vid} linked to missing {v.next_id}")
        gap = _forward_gap(v, nxt, state.grid)
        v_eq = float(law.v(law.rho_max * ell / gap)) if gap > 0 else 0.0
        if abs(v.vel - v_eq) < act.delta_big_v:
            doomed.append(v)
    if doomed:
        gone = {v.vid for v in doomed}
        state.vehicles = [v for v in state.vehicles if v.vid not in gone]
        for v in doomed:
            _record(
                recorder,
                Event(
                    state.step + 1,
                    "deactivation",
                    vehicle=v.vid,
                    cell=cell_index(v.pos, state.grid),
                    reason="follower-equilibrium",
                ),
            )
    return len(doomed)


def deactivate_lonely_leaders(state: SimState, recorder=None) -> int:
    """Remove leaders that no remaining vehicle follows."""
    followed = {v.next_id for v in state.vehicles if v.next_id is not None}
    doomed = [v for v in state.vehicles if v.next_id is None and v.vid not in followed]
    if doomed:
        gone = {v.vid for v in doomed}
        state.vehicles = [v for v in state.vehicles if v.vid not in gone]
        for v in doomed:
            _record(
                recorder,
                Event(
                    state.step + 1,
                    "deactivation",
                    vehicle=v.vid,
                    cell=cell_index(v.pos, state.grid),
                    reason="lonely-leader",
                ),
            )
    return len(doomed)


def _rho_ahead(state: SimState, j: int) -> float:
    """Density seen by a leader in cell j: next cell, wrapped or ghost-copied."""
    n = state.grid.n_cells
    if state.grid.periodic:
        return float(state.rho[(j + 1) % n])
    return float(state.rho[min(j + 1, n - 1)])


def advance_vehicles(
    state: SimState, params: MultiscaleParams, recorder=None
) -> list[float]:
    """Explicit Euler: positions move with step-n velocities, then velocities
    update (followers via the acceleration model, leaders from the density in
    the cell ahead). Returns the pre-move positions, aligned with
    state.vehicles."""
    grid = state.grid
    scaling = params.scaling
    law = params.law
    model = params.model
    dt = scaling.dt
    by_id = {v.vid: v for v in state.vehicles}
    diag = state.diagnostics

    old_pos = [v.pos for v in state.vehicles]
    new_vel = []
    for v in state.vehicles:
        if v.next_id is None:
            j = cell_index(v.pos, grid)
            vel = float(law.v(_rho_ahead(state, j)))
        else:
            nxt = by_id.get(v.next_id)
            if nxt is None:
                raise ConsistencyError(f"vehicle {v.vid} linked to missing {v.next_id}")
            gap = _forward_gap(v, nxt, grid)
            if gap <= 0 and not isinstance(model, ZzParams):
                raise DegenerateGapError(
                    f"vehicles {v.vid}/{nxt.vid} overlap (gap {gap})"
                )
            if gap <= 0:
                diag.collisions += 1
                _record(
                    recorder,
                    Event(state.step + 1, "collision", vehicle=v.vid,
                          cell=cell_index(v.pos, grid)),
                )
            if isinstance(model, ZzParams):
                a = accel_zz(v.pos, v.pos + gap, v.vel, model)
            else:
                a = accel_arz(
                    v.pos, v.pos + gap, v.vel, nxt.vel, model, scaling.ell_n, law
                )
            vel = v.vel + dt * a
        if vel < 0.0:
            diag.negative_vel_clamps += 1
            vel = 0.0
        elif vel > scaling.v_max:
            diag.over_vmax_clamps += 1
            vel = scaling.v_max
        new_vel.append(vel)

    for v, vel in zip(state.vehicles, new_vel):
        pos = v.pos + dt * v.vel
        v.pos = grid.wrap(pos) if grid.periodic else pos
        v.vel = vel
    return old_pos


def n_interfaces(grid) -> int:
    return grid.n_cells if grid.periodic else grid.n_cells + 1


def micro_flux(
    old_pos, new_pos, grid, scaling: ScalingParams
) -> tuple[np.ndarray, np.ndarray]:
    """Counted flux at every interface: (ell_n/dt) * #vehicles crossing it.

    Interface i sits at the left edge of cell i (periodic: i wraps; free: an
    extra interface n closes the road on the right). A vehicle landing exactly
    on an interface counts as having crossed it. Crossing two or more
    interfaces in one step violates the CFL assumption and raises.
    """
    n = grid.n_cells
    counts = np.zeros(n_interfaces(grid), dtype=int)
    for xo, xn in zip(old_pos, new_pos):
        jo = cell_index(xo, grid)
        if not grid.periodic and xn >= grid.right_edge:
            jn = n
        else:
            jn = cell_index(xn, grid)
        d = (jn - jo) % n if grid.periodic else jn - jo
        if d == 0:
            continue
        if d != 1:
            raise CflError(
                f"vehicle crossed {d} interfaces in one step (from {xo} to {xn})"
            )
        counts[jn] += 1
    return counts * (scaling.ell_n / scaling.dt), counts


def update_density(
    state: SimState,
    f_iface: np.ndarray,
    gamma: np.ndarray,
    params: MultiscaleParams,
) -> np.ndarray:
    """Conservative hybrid update.

    At each interface the blended flux theta*G + (1-theta)*F replaces the pure
    Godunov flux exactly when both adjacent cells hold vehicles; one flux value
    per interface feeds both sides, which is what conserves mass.
    """
    grid = state.grid
    g = interface_godunov_fluxes(state.rho, grid, params.law)
    occ = gamma > 0
    if grid.periodic:
        both = np.roll(occ, 1) & occ
    else:
        both = np.zeros(grid.n_cells + 1, dtype=bool)
        both[1:-1] = occ[:-1] & occ[1:]
    theta = state.theta
    h = np.where(both, theta * g + (1.0 - theta) * f_iface, g)
    new_rho = apply_interface_fluxes(state.rho, h, params.scaling.lam, grid)
    if not grid.periodic:
        state.boundary_balance += params.scaling.dt * (h[-1] - h[0])

    diag = state.diagnostics
    low = float(np.min(new_rho))
    high = float(np.max(new_rho))
    excursion = max(-low, high - params.law.rho_max, 0.0)
    if excursion > 0.0:
        diag.range_violations += int(
            np.count_nonzero((new_rho < 0) | (new_rho > params.law.rho_max))
        )
        diag.worst_excursion = max(diag.worst_excursion, excursion)
        if params.clamp_density:
            new_rho = np.clip(new_rho, 0.0, params.law.rho_max)
    return new_rho


def _check_cfl(params: MultiscaleParams) -> None:
    bound = cfl_bound(params.law)
    if params.scaling.lam >= bound:
        raise CflError(
            f"lambda = {params.scaling.lam} violates the CFL bound {bound}"
        )


def _drop_exited(state: SimState, recorder=None) -> None:
    if state.grid.periodic:
        return
    kept = []
    for v in state.vehicles:
        if v.pos >= state.grid.right_edge:
            state.diagnostics.vehicles_exited += 1
            _record(recorder, Event(state.step + 1, "exit", vehicle=v.vid))
        else:
            kept.append(v)
    state.vehicles = kept


def multiscale_step(
    state: SimState, params: MultiscaleParams, recorder=None
) -> SimState:
    """One full pass of the hybrid algorithm; advances the state in place."""
    _check_cfl(params)
    gamma = count_vehicles_per_cell(state)
    activate(state, params, gamma, recorder)
    label_next(state)
    deactivate_followers(state, params, recorder)
    label_next(state)
    deactivate_lonely_leaders(state, recorder)
    # Single recount/relabel pass after the removals, plus one re-activation
    # check in case they emptied cells adjacent to a super-threshold jump.
    gamma = count_vehicles_per_cell(state)
    if activate(state, params, gamma, recorder):
        gamma = count_vehicles_per_cell(state)
    label_next(state)

    diag = state.diagnostics
    diag.peak_vehicles = max(diag.peak_vehicles, len(state.vehicles))

    old_pos = advance_vehicles(state, params, recorder)
    f_iface, counts = micro_flux(
        old_pos, [v.pos for v in state.vehicles], state.grid, params.scaling
    )
    if len(counts):
        diag.max_crossing = max(diag.max_crossing, int(counts.max()))
    state.rho = update_density(state, f_iface, gamma, params)
    _drop_exited(state, recorder)
    state.step += 1
    return state


def complete_info_step(
    state: SimState, params: MultiscaleParams, recorder=None
) -> SimState:
    """One step of the always-on two-scale scheme: vehicles live everywhere, so
    the blended flux is used at every interface and there is no activation or
    deactivation machinery. On an open road the rightmost vehicle keeps a
    constant velocity; on a ring the chain is cyclic."""
    _check_cfl(params)
    grid = state.grid
    scaling = params.scaling
    law = params.law
    model = params.model
    dt = scaling.dt
    diag = state.diagnostics

    vs = sorted(state.vehicles, key=lambda v: (v.pos, v.vid))
    n = len(vs)
    old_pos = [v.pos for v in vs]
    new_vel = [0.0] * n
    for i, v in enumerate(vs):
        last = i == n - 1
        if last and not grid.periodic:
            new_vel[i] = v.vel  # open-road leader keeps its speed
            continue
        nxt = vs[(i + 1) % n]
        gap = nxt.pos - v.pos
        if last:
            gap = (nxt.pos - v.pos) % grid.length
        if gap <= 0 and not isinstance(model, ZzParams):
            raise DegenerateGapError(f"vehicles {v.vid}/{nxt.vid} overlap")
        if isinstance(model, ZzParams):
            a = accel_zz(v.pos, v.pos + gap, v.vel, model)
        else:
            a = accel_arz(v.pos, v.pos + gap, v.vel, nxt.vel, model,
                          scaling.ell_n, law)
        vel = v.vel + dt * a
        if vel < 0.0:
            diag.negative_vel_clamps += 1
            vel = 0.0
        elif vel > scaling.v_max:
            diag.over_vmax_clamps += 1
            vel = scaling.v_max
        new_vel[i] = vel

    for v, vel in zip(vs, new_vel):
        pos = v.pos + dt * v.vel
        v.pos = grid.wrap(pos) if grid.periodic else pos
        v.vel = vel

    diag.peak_vehicles = max(diag.peak_vehicles, n)
    f_iface, counts = micro_flux(
        old_pos, [v.pos for v in vs], grid, scaling
    )
    if len(counts):
        diag.max_crossing = max(diag.max_crossing, int(counts.max()))
    gamma = np.ones(grid.n_cells, dtype=int)  # vehicles assumed everywhere
    state.rho = update_density(state, f_iface, gamma, params)
    _drop_exited(state, recorder)
    state.step += 1
    return state
