"""One renderer per figure kind. All of them read CSV artifacts from a
run directory and write a PNG; nothing is mutated, so re-running with
the same inputs reproduces the same image."""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import load_columns


def _finish(fig, out):
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def density_snapshot(indir, out, step=None):
    """Density profile at one recorded step, with a tick on the x-axis
    for each cell that holds an active vehicle. Renders density only
    when the vehicle log is empty."""
    indir = Path(indir)
    dens = load_columns(indir / "density.csv", ("step", "cell", "rho"))
    steps = np.unique(dens["step"])
    if steps.size == 0:
        raise ValueError(f"{indir / 'density.csv'}: no data rows")
    chosen = steps[-1] if step is None else float(step)
    if chosen not in steps:
        raise ValueError(
            f"step {step} not recorded; available: "
            f"{', '.join(str(int(s)) for s in steps[:20])}"
            f"{' ...' if steps.size > 20 else ''}"
        )
    sel = dens["step"] == chosen
    order = np.argsort(dens["cell"][sel])
    cells = dens["cell"][sel][order]
    rho = dens["rho"][sel][order]

    veh = load_columns(indir / "vehicles.csv", ("step", "cell"))
    occupied = np.unique(veh["cell"][veh["step"] == chosen])

    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.step(cells, rho, where="mid", lw=1.2)
    if occupied.size:
        ax.plot(occupied, np.zeros_like(occupied), "|", color="crimson",
                ms=12, mew=1.5, label=f"{occupied.size} occupied cells")
        ax.legend(loc="upper right", frameon=False)
    ax.set_xlabel("cell")
    ax.set_ylabel(r"$\rho$")
    ax.set_ylim(bottom=-0.05)
    ax.set_title(f"density at step {int(chosen)}")
    fig.tight_layout()
    return _finish(fig, out)


def space_time_trajectories(indir, out):
    """Position vs time, one dotted track per vehicle id. Works on the
    run artifact (vehicles.csv) and on the standalone ring output
    (trajectories.csv)."""
    indir = Path(indir)
    src = indir / "vehicles.csv"
    if not src.exists() and (indir / "trajectories.csv").exists():
        src = indir / "trajectories.csv"
    data = load_columns(src, ("step", "id", "pos"))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for vid in np.unique(data["id"]):
        sel = data["id"] == vid
        ax.plot(data["step"][sel], data["pos"][sel], ".", ms=1.0,
                rasterized=True)
    ax.set_xlabel("step")
    ax.set_ylabel("position")
    ax.set_title(f"{np.unique(data['id']).size} vehicle trajectories")
    fig.tight_layout()
    return _finish(fig, out)


def fd_scatter(indir, out, v_max=1.0, rho_max=1.0):
    """Flux-density sample cloud with the equilibrium curve
    rho * v_max * (1 - rho/rho_max) overlaid."""
    data = load_columns(Path(indir) / "fd.csv", ("rho", "flux"))

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(data["rho"], data["flux"], ".", ms=2, alpha=0.4,
            label=f"{data['rho'].size} samples")
    r = np.linspace(0.0, rho_max, 200)
    ax.plot(r, r * v_max * (1.0 - r / rho_max), "k-", lw=1.2,
            label="equilibrium")
    ax.set_xlabel(r"$\rho$")
    ax.set_ylabel("flux")
    ax.legend(loc="upper right", frameon=False)
    fig.tight_layout()
    return _finish(fig, out)


def cpu_curve(indir, out):
    """Wall time of the hybrid and the fully microscopic engine against
    road length."""
    data = load_columns(
        Path(indir) / "bench.csv", ("L", "t_ms_multiscale", "t_ms_micro")
    )

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(data["L"], data["t_ms_multiscale"], "o-", label="multiscale")
    ax.plot(data["L"], data["t_ms_micro"], "s--", label="fully microscopic")
    ax.set_xlabel("road length L")
    ax.set_ylabel("wall time [ms]")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _finish(fig, out)


def mass_drift(indir, out):
    """Relative deviation of the conserved mass series from its initial
    value, on a log scale (floored at 1e-17 so exact zeros plot)."""
    data = load_columns(Path(indir) / "mass.csv", ("step", "mass"))
    m = data["mass"]
    if m.size == 0:
        raise ValueError(f"{Path(indir) / 'mass.csv'}: no data rows")
    drift = np.abs(m - m[0]) / max(abs(m[0]), 1e-300)

    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.semilogy(data["step"], np.maximum(drift, 1e-17), lw=1.0)
    ax.axhline(1e-10, color="crimson", ls=":", lw=1.0, label="1e-10 budget")
    ax.set_xlabel("step")
    ax.set_ylabel("relative mass drift")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _finish(fig, out)
