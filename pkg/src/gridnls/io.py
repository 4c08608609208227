"""JSON and CSV formats for grids, fields and reports.

Every JSON document carries ``schema_version`` and a ``kind`` tag. Floats are
written with ``repr`` precision, so identical inputs give identical bytes.
"""
import csv
import io as _io
import json
import math
import os
import tempfile

import numpy as np

from .functions import GraphFunction, build_mesh
from .grid import GridSpec, build_grid

SCHEMA_VERSION = 1


class FormatError(ValueError):
    pass


def grid_to_dict(grid):
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "grid",
        "spec": grid.spec.to_dict(),
        "vertices": grid.vertices.tolist(),
        "edges": np.column_stack([grid.edges, grid.axes]).tolist(),
        "lines": [[line.tolist() for line in per_axis] for per_axis in grid.lines],
        "boundary_vertices": grid.boundary_vertices.tolist(),
    }


def _check_header(doc, kind):
    if not isinstance(doc, dict) or doc.get("kind") != kind:
        raise FormatError(f"not a {kind} document")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise FormatError(f"unsupported schema_version {doc.get('schema_version')!r}")


def grid_from_dict(doc):
    """Rebuild a grid and confirm the stored indexing matches the construction."""
    _check_header(doc, "grid")
    grid = build_grid(GridSpec(**doc["spec"]))
    if grid_to_dict(grid) != doc:
        raise FormatError("stored grid arrays disagree with the grid rebuilt from its spec")
    return grid


def mesh_descriptor(mesh):
    return mesh.to_dict()


def mesh_from_descriptor(desc):
    return build_mesh(build_grid(GridSpec(**desc["grid"])), desc["samples_per_edge"])


def function_to_dict(f):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "graph_function",
        "mesh": mesh_descriptor(f.mesh),
        "dtype": "complex" if f.is_complex else "real",
    }
    if f.is_complex:
        doc["values"] = np.real(f.values).tolist()
        doc["values_imag"] = np.imag(f.values).tolist()
    else:
        doc["values"] = f.values.tolist()
    return doc


def function_from_dict(doc, mesh=None):
    _check_header(doc, "graph_function")
    if mesh is None:
        mesh = mesh_from_descriptor(doc["mesh"])
    elif mesh_descriptor(mesh) != doc["mesh"]:
        raise FormatError("field was saved on a different mesh")
    vals = np.asarray(doc["values"], dtype=float)
    if doc.get("dtype") == "complex":
        vals = vals + 1j * np.asarray(doc["values_imag"], dtype=float)
    return GraphFunction(mesh, vals)


def load_function(path, mesh=None):
    with open(path) as fh:
        return function_from_dict(json.load(fh), mesh)


def function_to_csv(f):
    """CSV text: node index, embedded coordinates, value columns."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d = f.mesh.grid.dimension
    coord_cols = ["x", "y", "z"][:d]
    value_cols = ["value_real", "value_imag"] if f.is_complex else ["value"]
    w.writerow(["node", *coord_cols, *value_cols])
    for i, (c, v) in enumerate(zip(f.mesh.coords, f.values)):
        vals = [repr(float(v.real)), repr(float(v.imag))] if f.is_complex else [repr(float(v))]
        w.writerow([i, *(repr(float(x)) for x in c), *vals])
    return buf.getvalue()


def _clean(obj):
    """Make an object JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(doc):
    return json.dumps(_clean(doc), indent=2, allow_nan=False) + "\n"


def rows_to_csv(columns, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow(["" if row.get(c) is None else _csv_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _csv_cell(v):
    v = _clean(v)
    if isinstance(v, float):
        return repr(v)
    return v


def write_atomic(path, text):
    """Write through a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
