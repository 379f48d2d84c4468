"""CSV loading with schema validation."""
import csv
from pathlib import Path

import numpy as np


class SchemaError(ValueError):
    """The CSV is missing, or lacks a required column."""


def load_columns(path, required):
    """Read a CSV into a dict of float arrays, one per required column.

    Raises SchemaError naming the file if it does not exist and naming
    the missing columns if the header is incomplete. An empty body
    (header only) yields empty arrays.
    """
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"missing input file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row")
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(
                f"{path}: missing column(s) {', '.join(missing)}"
            )
        idx = [header.index(c) for c in required]
        rows = [[float(r[i]) for i in idx] for r in reader if r]
    data = np.array(rows, dtype=float).reshape(len(rows), len(required))
    return {c: data[:, k] for k, c in enumerate(required)}
