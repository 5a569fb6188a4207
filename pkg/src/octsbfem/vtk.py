"""Minimal VTK legacy ASCII writer (unstructured grids)."""
from __future__ import annotations

import io
import os
import tempfile
from pathlib import Path

import numpy as np

# hexahedron, quad, vertex
HEXAHEDRON, QUAD, VERTEX = 12, 9, 1


def write_unstructured(path, title, points, cells, cell_type, cell_data=None, point_data=None):
    """Write points, one cell type and optional cell/point arrays.

    ``cell_data`` maps name -> 1-D scalars; ``point_data`` maps name ->
    1-D scalars or (n, 3) vectors.  Written through a temp file and renamed.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    buf = io.StringIO()
    buf.write("# vtk DataFile Version 3.0\n")
    buf.write(title.replace("\n", " ")[:255] + "\n")
    buf.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
    buf.write(f"POINTS {len(points)} double\n")
    for p in points:
        buf.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
    size = sum(len(c) + 1 for c in cells)
    buf.write(f"CELLS {len(cells)} {size}\n")
    for c in cells:
        buf.write(" ".join(str(int(v)) for v in [len(c), *c]) + "\n")
    buf.write(f"CELL_TYPES {len(cells)}\n")
    buf.write("\n".join(str(cell_type) for _ in cells) + "\n")
    if cell_data:
        buf.write(f"CELL_DATA {len(cells)}\n")
        for name, values in cell_data.items():
            _scalars(buf, name, values)
    if point_data:
        buf.write(f"POINT_DATA {len(points)}\n")
        for name, values in point_data.items():
            values = np.asarray(values, dtype=float)
            if values.ndim == 2:
                buf.write(f"VECTORS {name} double\n")
                for v in values:
                    buf.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
            else:
                _scalars(buf, name, values)
    atomic_write_text(path, buf.getvalue())


def _scalars(buf, name, values):
    values = np.asarray(values)
    kind = "int" if np.issubdtype(values.dtype, np.integer) else "double"
    buf.write(f"SCALARS {name} {kind} 1\nLOOKUP_TABLE default\n")
    buf.write("\n".join(f"{v:.17g}" if kind == "double" else str(int(v)) for v in values) + "\n")


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
