"""Field snapshot output: raw float64 with a small text header, plus an
optional structured-points text export for external viewers."""

from __future__ import annotations

import numpy as np

MAGIC = "chemns-snapshot-v1"


def write_snapshot(path, name, t, grid, values):
    """Header lines (magic, field name, time, dims, lengths), then the raw
    little-endian float64 payload in C order with axes (x, y[, z])."""
    arr = np.ascontiguousarray(values, dtype="<f8")
    header = (f"{MAGIC}\n"
              f"field {name}\n"
              f"time {t!r}\n"
              f"dims {' '.join(str(n) for n in arr.shape)}\n"
              f"lengths {' '.join(repr(L) for L in grid.lengths)}\n"
              f"end\n")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(arr.tobytes())


def read_snapshot(path):
    with open(path, "rb") as fh:
        data = fh.read()
    head, _, rest = data.partition(b"end\n")
    lines = head.decode("ascii").splitlines()
    if lines[0] != MAGIC:
        raise ValueError(f"{path} is not a chemns snapshot")
    meta = dict(line.split(" ", 1) for line in lines[1:])
    dims = tuple(int(n) for n in meta["dims"].split())
    values = np.frombuffer(rest, dtype="<f8").reshape(dims)
    return meta["field"], float(meta["time"]), values.copy()


def write_structured_points(path, name, grid, values):
    """Legacy structured-points text export (cell-centered samples)."""
    arr = np.asarray(values)
    dims = " ".join(str(n) for n in arr.shape + (1,) * (3 - arr.ndim))
    spacing = list(grid.spacing) + [1.0] * (3 - grid.dim)
    origin = [h / 2 for h in grid.spacing] + [0.0] * (3 - grid.dim)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{name}\nASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {dims}\n")
        fh.write(f"ORIGIN {' '.join(repr(v) for v in origin)}\n")
        fh.write(f"SPACING {' '.join(repr(v) for v in spacing)}\n")
        fh.write(f"POINT_DATA {arr.size}\n")
        fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
        for v in arr.reshape(-1, order="F"):
            fh.write(f"{v!r}\n")
