"""Command-line entry point: run scenarios, validate configs, emit CSVs."""
from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .core import total_mass
from .errors import ConfigError, TrafficError
from .macro import VelocityLaw, cfl_bound
from .micro import ZzParams, ring_init, run_ring
from .scenarios import (
    RunLog,
    benchmark_cpu,
    build_scenario,
    fundamental_diagram,
    load_config,
    run,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4

OUTDIR_ENV = "MSTRAFFIC_OUTDIR"


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def emit_outputs(runlog: RunLog, outdir: Path) -> None:
    """Write the delimited artifacts plus a human-readable summary."""
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        probe = outdir / ".write_probe"
        probe.touch()
        probe.unlink()
    except OSError as exc:
        raise TrafficError(f"output directory {outdir} is not writable: {exc}")

    _write_csv(
        outdir / "density.csv",
        ("step", "cell", "rho"),
        (
            (step, j, rho_j)
            for step, row in zip(runlog.snapshot_steps, runlog.density)
            for j, rho_j in enumerate(row)
        ),
    )
    _write_csv(
        outdir / "vehicles.csv",
        ("step", "id", "pos", "vel", "cell", "leader"),
        runlog.vehicle_rows,
    )
    _write_csv(
        outdir / "events.csv",
        ("step", "kind", "cell", "vehicle", "count", "reason"),
        (
            (e.step, e.kind,
             "" if e.cell is None else e.cell,
             "" if e.vehicle is None else e.vehicle,
             "" if e.count is None else e.count,
             e.reason or "")
            for e in runlog.events
        ),
    )
    _write_csv(
        outdir / "mass.csv",
        ("step", "mass"),
        enumerate(runlog.mass),
    )
    fd = fundamental_diagram(runlog)
    _write_csv(outdir / "fd.csv", ("rho", "flux"), fd)

    d = runlog.diagnostics
    mass0 = runlog.mass[0]
    drift = float(np.max(np.abs(runlog.mass - mass0)) / abs(mass0)) if mass0 else 0.0
    activations = sum(e.count or 0 for e in runlog.events if e.kind == "activation")
    deactivations = sum(1 for e in runlog.events if e.kind == "deactivation")
    lines = [
        f"scenario          : {runlog.config.name}",
        f"steps             : {runlog.config.n_t}",
        f"wall time [s]     : {runlog.wall_time:.3f}",
        f"mass drift (rel)  : {drift:.3e}",
        f"peak vehicles     : {d.peak_vehicles}",
        f"activations       : {activations}",
        f"deactivations     : {deactivations}",
        f"range violations  : {d.range_violations}"
        f" (worst excursion {d.worst_excursion:.3e})",
        f"velocity clamps   : {d.negative_vel_clamps} low, {d.over_vmax_clamps} high",
        f"collisions        : {d.collisions}",
        f"max crossings/ifc : {d.max_crossing}",
        f"vehicles exited   : {d.vehicles_exited}",
        "",
        "resolved configuration:",
    ]
    for key, value in asdict(runlog.config).items():
        lines.append(f"  {key} = {value}")
    (outdir / "summary.txt").write_text("\n".join(lines) + "\n")


def _parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        key, eq, value = pair.partition("=")
        if not eq:
            raise ConfigError(f"override {pair!r} is not of the form key=value")
        out[key.strip()] = value.strip()
    return out


def _default_outdir(args) -> Path:
    if args.out is not None:
        return Path(args.out)
    return Path(os.environ.get(OUTDIR_ENV, "out"))


def _cmd_run(args) -> int:
    cfg = load_config(args.config, _parse_overrides(args.set))
    state, params = build_scenario(cfg)
    runlog = run(state, params, cfg)
    emit_outputs(runlog, _default_outdir(args))
    print(f"{cfg.name}: {cfg.n_t} steps in {runlog.wall_time:.3f} s, "
          f"peak vehicles {runlog.diagnostics.peak_vehicles}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.config, _parse_overrides(args.set))
    law = VelocityLaw(rho_max=cfg.rho_max, v_max=cfg.v_max)
    bound = cfl_bound(law)
    ell = cfg.dx / cfg.gamma_max
    print(f"lambda = dt/dx = {cfg.lam:.6g} (CFL bound {bound:.6g})")
    print(f"ell_n = {ell:.6g}")
    print(f"sigma = {law.sigma:.6g}")
    if cfg.lam >= bound:
        print(f"REJECTED: lambda {cfg.lam:.6g} >= bound {bound:.6g}", file=sys.stderr)
        return EXIT_CONFIG
    build_scenario(cfg)  # full constructive check
    print("configuration OK")
    return EXIT_OK


def _cmd_ring(args) -> int:
    p = ZzParams(tau=args.tau, alpha=args.alpha, delta_min=args.dmin,
                 v_max=args.vmax)
    ring = ring_init(args.n, args.L)
    pos, vel = run_ring(ring, p, args.dt, args.steps)
    outdir = _default_outdir(args)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        outdir / "trajectories.csv",
        ("step", "id", "pos", "vel"),
        (
            (s, k, pos[s, k], vel[s, k])
            for s in range(pos.shape[0])
            for k in range(pos.shape[1])
        ),
    )
    print(f"ring: {args.n} vehicles, {args.steps} steps -> "
          f"{outdir / 'trajectories.csv'}")
    return EXIT_OK


def _cmd_fd(args) -> int:
    indir = Path(args.indir)
    density = {}
    with open(indir / "density.csv") as fh:
        for row in csv.DictReader(fh):
            density[(int(row["step"]), int(row["cell"]))] = float(row["rho"])
    points = []
    with open(indir / "vehicles.csv") as fh:
        for row in csv.DictReader(fh):
            key = (int(row["step"]), int(row["cell"]))
            if key in density:
                rho = density[key]
                points.append((rho, rho * float(row["vel"])))
    outdir = _default_outdir(args)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(outdir / "fd.csv", ("rho", "flux"), points)
    print(f"fd: {len(points)} points -> {outdir / 'fd.csv'}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    lengths = [float(x) for x in args.lengths.split(",")]
    rows = benchmark_cpu(lengths, reps=args.reps)
    outdir = _default_outdir(args)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        outdir / "bench.csv",
        ("L", "t_ms_multiscale", "t_ms_micro",
         "peak_vehicles_multiscale", "peak_vehicles_micro"),
        (
            (r.length, r.t_ms_multiscale, r.t_ms_micro,
             r.peak_vehicles_multiscale, r.peak_vehicles_micro)
            for r in rows
        ),
    )
    for r in rows:
        print(f"L={r.length:g}: multiscale {r.t_ms_multiscale:.1f} ms "
              f"({r.peak_vehicles_multiscale} veh), "
              f"micro {r.t_ms_micro:.1f} ms ({r.peak_vehicles_micro} veh)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mstraffic",
        description="Multi-scale traffic simulator (LWR + follow-the-leader)",
    )
    sub = ap.add_subparsers(dest="verb", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="flat key=value file")
            p.add_argument("--set", action="append", metavar="KEY=VALUE",
                           help="override a configuration key")
        p.add_argument("--out", default=None,
                       help=f"output directory (default: ${OUTDIR_ENV} or ./out)")

    p = sub.add_parser("run", help="run a scenario and write the CSV artifacts")
    add_common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate", help="check a configuration and print "
                                        "derived quantities")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("ring", help="standalone stop&go ring-road simulation")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--dmin", type=float, required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--dt", type=float, default=0.125)
    p.add_argument("--vmax", type=float, default=1.0)
    add_common(p, needs_config=False)
    p.set_defaults(func=_cmd_ring)

    p = sub.add_parser("fd", help="recompute the fundamental diagram from an "
                                  "existing run directory")
    p.add_argument("--in", dest="indir", required=True)
    add_common(p, needs_config=False)
    p.set_defaults(func=_cmd_fd)

    p = sub.add_parser("bench", help="CPU-time comparison multiscale vs fully "
                                     "microscopic")
    p.add_argument("--lengths", default="20,40,80,160")
    p.add_argument("--reps", type=int, default=3)
    add_common(p, needs_config=False)
    p.set_defaults(func=_cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrafficError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FileNotFoundError as exc:
        print(f"file not found: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
