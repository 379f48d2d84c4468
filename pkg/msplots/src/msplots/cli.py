"""One entry point per figure kind, each taking --in <dir> --out <file>."""
import argparse
import sys

from .io import SchemaError
from . import figures


def _parser(description, with_step=False):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--in", dest="indir", required=True,
                   help="run directory with the CSV artifacts")
    p.add_argument("--out", required=True, help="output image path")
    if with_step:
        p.add_argument("--step", type=int, default=None,
                       help="recorded step to plot (default: last)")
    return p


def _run(render, argv, **extra):
    try:
        out = render(**extra)
    except (SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


def main_density(argv=None):
    args = _parser("density snapshot with vehicle markers",
                   with_step=True).parse_args(argv)
    return _run(figures.density_snapshot, argv, indir=args.indir,
                out=args.out, step=args.step)


def main_trajectories(argv=None):
    args = _parser("space-time vehicle trajectories").parse_args(argv)
    return _run(figures.space_time_trajectories, argv, indir=args.indir,
                out=args.out)


def main_fd(argv=None):
    p = _parser("flux-density scatter with the equilibrium curve")
    p.add_argument("--vmax", type=float, default=1.0)
    p.add_argument("--rhomax", type=float, default=1.0)
    args = p.parse_args(argv)
    return _run(figures.fd_scatter, argv, indir=args.indir, out=args.out,
                v_max=args.vmax, rho_max=args.rhomax)


def main_cpu(argv=None):
    args = _parser("CPU time vs road length").parse_args(argv)
    return _run(figures.cpu_curve, argv, indir=args.indir, out=args.out)


def main_mass(argv=None):
    args = _parser("relative mass drift over the run").parse_args(argv)
    return _run(figures.mass_drift, argv, indir=args.indir, out=args.out)
