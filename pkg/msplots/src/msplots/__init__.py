"""Figure rendering for the CSV artifacts written by the mstraffic CLI.

This package never imports the simulator; the CSV files are the only
interface between the two.
"""

from .io import SchemaError, load_columns
from .figures import (
    cpu_curve,
    density_snapshot,
    fd_scatter,
    mass_drift,
    space_time_trajectories,
)

__all__ = [
    "SchemaError",
    "load_columns",
    "density_snapshot",
    "space_time_trajectories",
    "fd_scatter",
    "cpu_curve",
    "mass_drift",
]
