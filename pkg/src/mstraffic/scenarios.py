"""Experiment definitions (T1-T4), the run loop, the fundamental-diagram
extractor, and the CPU-scaling benchmark."""
from __future__ import annotations

import logging
import statistics
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .core import (
    Diagnostics,
    Grid1D,
    ScalingParams,
    SimState,
    seed_vehicles_from_density,
    total_mass,
)
from .coupling import (
    ActivationParams,
    Event,
    MultiscaleParams,
    cell_index,
    complete_info_step,
    label_next,
    multiscale_step,
)
from .errors import ConfigError, NumericalError
from .macro import VelocityLaw, cfl_bound, interface_godunov_fluxes, lwr_step
from .micro import ArzMicroParams, ZzParams

log = logging.getLogger(__name__)

ENGINES = ("multiscale", "complete", "lwr")
MODELS = ("arz", "zz")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "custom"
    T: float = 1.0
    L: float = 20.0
    n_x: int = 100
    n_t: int = 100
    engine: str = "multiscale"
    model: str = "arz"
    theta: float = 0.0
    gamma_max: int = 20
    rho_max: float = 1.0
    v_max: float = 1.0
    tau: float = 0.01
    gamma: float = 0.0
    v_ref: float = 1.0
    alpha: float = 0.5
    delta_min: float = 1.0
    delta_v: float = 0.1
    delta_t_steps: int = 15
    delta_big_v: float = 0.3
    boundary_mode: str = "periodic"
    # piecewise-constant density: (start_x, value) pairs, first start at 0
    profile: tuple = ((0.0, 0.0),)
    forced_activation: bool = False
    snapshot_stride: int = 1
    clamp_density: bool = False
    preset_convention: bool = False

    @property
    def dx(self) -> float:
        return self.L / self.n_x

    @property
    def dt(self) -> float:
        return self.T / self.n_t

    @property
    def lam(self) -> float:
        return self.dt / self.dx

    def validate(self) -> None:
        if self.engine not in ENGINES:
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}")
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError(f"theta must be in [0, 1], got {self.theta}")
        if self.n_x < 3 or self.n_t < 0 or self.T <= 0 or self.L <= 0:
            raise ConfigError("need n_x >= 3, n_t >= 0, T > 0, L > 0")
        if self.profile[0][0] != 0.0:
            raise ConfigError("density profile must start at x = 0")


def t1_preset(length: float = 20.0) -> ScenarioConfig:
    """Step profile whose three jumps scale linearly with the road length.

    Levels: the first jump (0.15 -> 0.05) is a rarefaction entirely below
    the critical density, so its fan advects downstream and the cells around
    x = 3 go quiet; the second (0.05 -> 0.35) is a slow forward-moving shock
    that stays near x = 6 and absorbs perturbations from both sides, keeping
    the vehicle count bounded independently of the road length; the third
    (0.35 -> 0.2) is another sub-critical rarefaction that fades out. The
    wrap jump (0.2 -> 0.15) stays below delta_v, so only the three interior
    discontinuities activate; dx and dt are held fixed as the road grows,
    which is what the CPU benchmark requires.
    """
    s = length / 20.0
    return ScenarioConfig(
        name="T1",
        T=3.0, L=length, n_x=int(round(5 * length)), n_t=300,
        model="arz", tau=0.01, gamma_max=20,
        delta_v=0.08, delta_t_steps=15, delta_big_v=0.3,
        boundary_mode="periodic",
        profile=((0.0, 0.15), (3.0 * s, 0.05), (6.0 * s, 0.35), (11.0 * s, 0.2)),
        preset_convention=True,
    )


def t2_preset(tau: float = 0.01) -> ScenarioConfig:
    """Congested upstream half, empty downstream half, free outflow.

    The congested level 0.72 keeps the jam vehicles moving slowly instead of
    standing still; with a large relaxation time they hold their stale speed
    while the jam dissolves under them, which is what makes the flux-density
    cloud spread out (including transient compressions above the initial
    level). The quicker tau = 0.01 run stays close to equilibrium and its
    cloud collapses onto the curve up to the one-vehicle quantization floor.
    """
    return ScenarioConfig(
        name="T2",
        T=3.0, L=20.0, n_x=100, n_t=600,
        model="arz", tau=tau, gamma_max=30,
        delta_v=0.1, delta_t_steps=15, delta_big_v=0.5,
        boundary_mode="free",
        profile=((0.0, 0.72), (10.0, 0.0)),
        preset_convention=True,
    )


def t3_preset() -> ScenarioConfig:
    """Uniform flow with a two-cell slow (dense) bump at mid-road.

    The bump stays below the critical density, so the perturbation is a
    traveling structure: the vehicles around it keep its back shock sharp
    well past the point where the pure continuum solution has flattened
    out, and once the jump finally drops below delta_v every vehicle
    deactivates and the road stays vehicle-free.
    """
    return ScenarioConfig(
        name="T3",
        T=12.0, L=20.0, n_x=100, n_t=1200,
        model="arz", tau=0.1, gamma_max=30,
        delta_v=0.1, delta_t_steps=30, delta_big_v=0.2,
        boundary_mode="periodic",
        profile=((0.0, 0.15), (9.8, 0.35), (10.2, 0.15)),
        preset_convention=True,
    )


def t4_preset() -> ScenarioConfig:
    """Ring road, stop & go model, vehicles forced on everywhere at t = 0."""
    dx = 314.0 / 35.0
    ell = dx / 16.0
    return ScenarioConfig(
        name="T4",
        T=500.0, L=314.0, n_x=35, n_t=4000,
        model="zz", tau=4.86, gamma_max=16,
        alpha=0.47, delta_min=2.6 * ell,
        delta_v=0.3, delta_t_steps=250, delta_big_v=0.07,
        boundary_mode="periodic",
        profile=((0.0, 0.25), (17 * dx, 0.45), (18 * dx, 0.25)),
        forced_activation=True,
        preset_convention=True,
    )


PRESETS = {
    "T1": t1_preset,
    "T2": t2_preset,
    "T3": t3_preset,
    "T4": t4_preset,
}


def profile_to_density(profile, grid: Grid1D) -> np.ndarray:
    starts = np.array([p[0] for p in profile])
    values = np.array([p[1] for p in profile])
    if np.any(np.diff(starts) <= 0):
        raise ConfigError("profile segment starts must increase")
    idx = np.searchsorted(starts, grid.centers(), side="right") - 1
    return values[idx].astype(float)


def build_scenario(config: ScenarioConfig) -> tuple[SimState, MultiscaleParams]:
    """Construct the initial state and engine parameters, enforcing the CFL
    bound up front."""
    config.validate()
    law = VelocityLaw(rho_max=config.rho_max, v_max=config.v_max)
    bound = cfl_bound(law)
    if config.lam >= bound:
        raise ConfigError(
            f"lambda = dt/dx = {config.lam:.6g} violates the CFL bound "
            f"{bound:.6g} (reduce dt or coarsen the grid)"
        )
    scaling = ScalingParams(
        dx=config.dx, dt=config.dt, gamma_max=config.gamma_max,
        rho_max=config.rho_max, v_max=config.v_max,
    )
    grid = Grid1D(
        x_min=0.5 * config.dx, n_cells=config.n_x, dx=config.dx,
        boundary_mode=config.boundary_mode,
    )
    rho = profile_to_density(config.profile, grid)
    if config.model == "zz":
        model = ZzParams(
            tau=config.tau, alpha=config.alpha,
            delta_min=config.delta_min, v_max=config.v_max,
        )
    else:
        model = ArzMicroParams(tau=config.tau, gamma=config.gamma,
                               v_ref=config.v_ref)
    activation = ActivationParams(config.delta_v, config.delta_t_steps,
                                  config.delta_big_v)
    params = MultiscaleParams(
        scaling=scaling, law=law, activation=activation, model=model,
        clamp_density=config.clamp_density,
    )
    state = SimState(grid=grid, rho=rho, theta=config.theta)
    if config.forced_activation or config.engine == "complete":
        # seed every cell, bypassing the velocity-jump check, at step 0 only
        seed_vehicles_from_density(
            rho, range(grid.n_cells), grid, scaling, law, state
        )
        label_next(state)
    return state, params


@dataclass
class RunLog:
    config: ScenarioConfig
    snapshot_steps: list[int]
    density: np.ndarray                      # (n_snapshots, n_cells)
    vehicle_rows: list[tuple]                # (step, id, pos, vel, cell, leader)
    events: list[Event]
    # per step, including step 0: road mass plus cumulative net mass that
    # left through free boundaries, so the series is conserved on any road
    mass: np.ndarray
    wall_time: float
    diagnostics: Diagnostics
    final_rho: np.ndarray = field(default=None)


def _record_vehicles(state: SimState, rows: list) -> None:
    for v in state.vehicles:
        rows.append(
            (state.step, v.vid, v.pos, v.vel,
             cell_index(v.pos, state.grid), int(v.next_id is None))
        )


def run(
    state: SimState,
    params: MultiscaleParams,
    config: ScenarioConfig,
    record_vehicles: bool = True,
    record_density: bool = True,
) -> RunLog:
    """Drive the configured engine for n_t steps, collecting logs."""
    events: list[Event] = []
    vehicle_rows: list[tuple] = []
    snapshot_steps: list[int] = []
    snapshots: list[np.ndarray] = []
    mass = np.empty(config.n_t + 1)
    stride = max(config.snapshot_stride, 1)

    def snap():
        if record_density:
            snapshot_steps.append(state.step)
            snapshots.append(state.rho.copy())
        if record_vehicles:
            _record_vehicles(state, vehicle_rows)

    mass[0] = total_mass(state.rho, state.grid)
    snap()
    t0 = time.perf_counter()
    for n in range(config.n_t):
        if config.engine == "lwr":
            if not state.grid.periodic:
                h = interface_godunov_fluxes(state.rho, state.grid, params.law)
                state.boundary_balance += params.scaling.dt * (h[-1] - h[0])
            state.rho = lwr_step(state.rho, state.grid, params.scaling, params.law)
            state.step += 1
        elif config.engine == "complete":
            complete_info_step(state, params, events)
        else:
            multiscale_step(state, params, events)
        if not np.all(np.isfinite(state.rho)):
            raise NumericalError(f"non-finite density at step {state.step}")
        mass[state.step] = total_mass(state.rho, state.grid) + state.boundary_balance
        if state.step % stride == 0 or state.step == config.n_t:
            snap()
    wall = time.perf_counter() - t0

    density = np.array(snapshots) if snapshots else np.empty((0, state.grid.n_cells))
    return RunLog(
        config=config,
        snapshot_steps=snapshot_steps,
        density=density,
        vehicle_rows=vehicle_rows,
        events=events,
        mass=mass,
        wall_time=wall,
        diagnostics=state.diagnostics,
        final_rho=state.rho.copy(),
    )


def run_scenario(config: ScenarioConfig, **kwargs) -> RunLog:
    state, params = build_scenario(config)
    return run(state, params, config, **kwargs)


def fundamental_diagram(runlog: RunLog) -> np.ndarray:
    """Flux-vs-density sample cloud: one point per (active vehicle, step),
    pairing the density of the occupied cell with that density times the
    vehicle's own speed. Returns an (n, 2) array."""
    snap_of_step = {s: i for i, s in enumerate(runlog.snapshot_steps)}
    points = []
    for step, _vid, _pos, vel, cell, _leader in runlog.vehicle_rows:
        i = snap_of_step.get(step)
        if i is None:
            continue
        rho_cell = runlog.density[i, cell]
        points.append((rho_cell, rho_cell * vel))
    return np.array(points) if points else np.empty((0, 2))


@dataclass(frozen=True)
class BenchRow:
    length: float
    t_ms_multiscale: float
    t_ms_micro: float
    peak_vehicles_multiscale: int
    peak_vehicles_micro: int


def benchmark_cpu(lengths, reps: int = 3) -> list[BenchRow]:
    """Wall-time comparison of the hybrid engine against the fully microscopic
    one on the scaled three-jump profile, dx and gamma_max held fixed."""
    rows = []
    for length in lengths:
        times = {"multiscale": [], "complete": []}
        peaks = {}
        for engine in ("multiscale", "complete"):
            cfg = replace(t1_preset(length), engine=engine, snapshot_stride=10**9)
            for _ in range(reps):
                runlog = run_scenario(
                    cfg, record_vehicles=False, record_density=False
                )
                times[engine].append(runlog.wall_time)
                peaks[engine] = runlog.diagnostics.peak_vehicles
        rows.append(
            BenchRow(
                length=length,
                t_ms_multiscale=1e3 * statistics.median(times["multiscale"]),
                t_ms_micro=1e3 * statistics.median(times["complete"]),
                peak_vehicles_multiscale=peaks["multiscale"],
                peak_vehicles_micro=peaks["complete"],
            )
        )
        log.info(
            "bench L=%g: multiscale %.1f ms, micro %.1f ms",
            length, rows[-1].t_ms_multiscale, rows[-1].t_ms_micro,
        )
    return rows


# ---------------------------------------------------------------------------
# Flat key=value configuration files
# ---------------------------------------------------------------------------

_BOOL_WORDS = {"true": True, "false": False, "yes": True, "no": False,
               "1": True, "0": False}


def _parse_profile(text: str):
    segs = []
    for part in text.split(","):
        start, _, value = part.partition(":")
        segs.append((float(start), float(value)))
    return tuple(segs)


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines; '#' starts a comment."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        out[key.strip()] = value.strip()
    return out


def config_from_mapping(raw: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from string key/value pairs, starting from a
    preset when one is named. `delta_t` (absolute time) is normalized to
    steps."""
    raw = dict(raw)
    preset = raw.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r} (have {sorted(PRESETS)})")
        base = PRESETS[preset]()
    else:
        base = ScenarioConfig()

    known = {f.name: f.type for f in fields(ScenarioConfig)}
    updates: dict = {}
    delta_t_abs = raw.pop("delta_t", None)
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"unknown configuration key {key!r}")
        current = getattr(base, key)
        if key == "profile":
            updates[key] = _parse_profile(value)
        elif isinstance(current, bool):
            word = str(value).strip().lower()
            if word not in _BOOL_WORDS:
                raise ConfigError(f"{key}: expected a boolean, got {value!r}")
            updates[key] = _BOOL_WORDS[word]
        elif isinstance(current, int):
            updates[key] = int(value)
        elif isinstance(current, float):
            updates[key] = float(value)
        else:
            updates[key] = str(value)
    cfg = replace(base, **updates)
    if delta_t_abs is not None:
        steps = max(int(round(float(delta_t_abs) / cfg.dt)), 1)
        cfg = replace(cfg, delta_t_steps=steps)
    cfg.validate()
    return cfg


def load_config(path, overrides: dict | None = None) -> ScenarioConfig:
    with open(path) as fh:
        raw = parse_config_text(fh.read())
    if overrides:
        raw.update(overrides)
    return config_from_mapping(raw)
