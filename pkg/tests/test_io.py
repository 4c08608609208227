import csv
import io as stdio
import json
import os

import numpy as np
import pytest

from gridnls import families as fam
from gridnls import io
from gridnls.functions import GraphFunction
from gridnls.grid import GridSpec, build_grid
from conftest import make_mesh


def test_grid_roundtrip():
    grid = build_grid(GridSpec(3, 0.5, 2, "neumann"))
    doc = json.loads(io.dumps(io.grid_to_dict(grid)))
    assert doc["schema_version"] == io.SCHEMA_VERSION
    back = io.grid_from_dict(doc)
    assert np.array_equal(back.edges, grid.edges)
    assert back.spec == grid.spec


def test_grid_tampering_detected():
    doc = io.grid_to_dict(build_grid(GridSpec(2, 1.0, 1)))
    doc["edges"][0][1] = 7
    with pytest.raises(io.FormatError, match="disagree"):
        io.grid_from_dict(doc)


def test_header_checks():
    doc = io.grid_to_dict(build_grid(GridSpec(2, 1.0, 1)))
    with pytest.raises(io.FormatError, match="schema_version"):
        io.grid_from_dict({**doc, "schema_version": 99})
    with pytest.raises(io.FormatError, match="not a grid"):
        io.grid_from_dict({**doc, "kind": "graph_function"})


def test_function_roundtrip_real_and_complex(tmp_path):
    mesh = make_mesh(dim=2, radius=1, n=3)
    f = fam.random_field(mesh, np.random.default_rng(0))
    path = tmp_path / "f.json"
    io.write_atomic(str(path), io.dumps(io.function_to_dict(f)))
    g = io.load_function(str(path))
    assert np.array_equal(g.values, f.values)  # repr floats round-trip exactly

    z = GraphFunction(mesh, f.values + 2j * f.values[::-1])
    w = io.function_from_dict(json.loads(io.dumps(io.function_to_dict(z))), mesh)
    assert np.array_equal(w.values, z.values)


def test_function_on_wrong_mesh():
    f = fam.random_field(make_mesh(dim=2, radius=1, n=3), np.random.default_rng(0))
    with pytest.raises(io.FormatError, match="different mesh"):
        io.function_from_dict(io.function_to_dict(f), make_mesh(dim=2, radius=1, n=4))


def test_function_csv():
    mesh = make_mesh(dim=3, radius=1, n=2)
    f = fam.random_field(mesh, np.random.default_rng(1))
    rows = list(csv.reader(stdio.StringIO(io.function_to_csv(f))))
    assert rows[0] == ["node", "x", "y", "z", "value"]
    assert len(rows) == mesh.n_nodes + 1
    assert float(rows[5][4]) == f.values[4]


def test_dumps_non_finite_and_numpy_types():
    text = io.dumps({"a": np.float64("inf"), "b": np.int64(3), "c": np.array([1.5, np.nan]),
                     "d": np.bool_(True)})
    assert json.loads(text) == {"a": "inf", "b": 3, "c": [1.5, "nan"], "d": True}


def test_rows_to_csv_blank_for_missing():
    text = io.rows_to_csv(["a", "b"], [{"a": 1.25}, {"a": None, "b": "x"}])
    assert text == "a,b\n1.25,\n,x\n"


def test_write_atomic_leaves_no_temp_on_failure(tmp_path):
    target = tmp_path / "out.json"
    io.write_atomic(str(target), "one")
    assert target.read_text() == "one"

    with pytest.raises(TypeError):
        io.write_atomic(str(target), 123)  # not text
    assert target.read_text() == "one"
    assert [p.name for p in tmp_path.iterdir()] == ["out.json"]


def test_write_atomic_missing_directory(tmp_path):
    with pytest.raises(OSError):
        io.write_atomic(os.path.join(str(tmp_path), "nope", "x.json"), "{}")
