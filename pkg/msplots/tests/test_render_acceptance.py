"""Secondary acceptance: every figure kind renders nonempty images from
artifacts produced by the simulator's command-line interface."""
import subprocess
import sys

import pytest

from msplots import (
    cpu_curve,
    density_snapshot,
    fd_scatter,
    mass_drift,
    space_time_trajectories,
)

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def mstraffic(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "mstraffic.cli", *args],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="session")
def artifacts(tmp_path_factory):
    """Run the three scenario presets and the benchmark once via the CLI."""
    root = tmp_path_factory.mktemp("artifacts")
    for preset, extra in (("T1", []),
                          ("T2", []),
                          ("T4", ["--set", "snapshot_stride=10"])):
        cfg = root / f"{preset.lower()}.cfg"
        cfg.write_text(f"preset = {preset}\n")
        mstraffic("run", "--config", str(cfg), *extra,
                  "--out", str(root / preset.lower()))
    mstraffic("bench", "--lengths", "20,40,80", "--reps", "1",
              "--out", str(root / "bench"))
    return root


def assert_png(path):
    data = path.read_bytes()
    assert data.startswith(PNG_MAGIC) and len(data) > 1000, path


def test_density_snapshot_from_t1(artifacts, tmp_path):
    # step 1, where the vehicles cluster around the three density jumps
    assert_png(density_snapshot(artifacts / "t1", tmp_path / "snap.png",
                                step=1))


def test_trajectories_from_t4(artifacts, tmp_path):
    assert_png(space_time_trajectories(artifacts / "t4", tmp_path / "xt.png"))


def test_fd_scatter_from_t2(artifacts, tmp_path):
    assert_png(fd_scatter(artifacts / "t2", tmp_path / "fd.png"))


def test_cpu_curve_from_bench(artifacts, tmp_path):
    assert_png(cpu_curve(artifacts / "bench", tmp_path / "cpu.png"))


def test_mass_drift_from_t1(artifacts, tmp_path):
    assert_png(mass_drift(artifacts / "t1", tmp_path / "mass.png"))
