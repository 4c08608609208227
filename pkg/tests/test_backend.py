import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridnls import kernels
from gridnls._backend import BACKEND
from oracles import finite_difference_gradient
from conftest import make_mesh

MESH = make_mesh(dim=3, radius=2, n=4)


def node_values(seed, kind):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(MESH.n_nodes)
    if kind == "near_equal":
        # adjacent values within the series cut-off on many intervals
        v = 1.0 + 1e-5 * rng.standard_normal(MESH.n_nodes)
    elif kind == "with_zeros":
        v[rng.random(MESH.n_nodes) < 0.3] = 0.0
    elif kind == "equal":
        v = np.full(MESH.n_nodes, -0.7)
    return v


@pytest.mark.parametrize("kind", ["normal", "near_equal", "with_zeros", "equal"])
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.5, 7.0])
def test_kernels_agree(kind, p):
    v = node_values(1, kind)
    l, r, h = MESH.left, MESH.right, MESH.h
    assert kernels.power_integral_numba(v, l, r, h, p) == pytest.approx(
        kernels.power_integral_numpy(v, l, r, h, p), rel=1e-13)
    assert kernels.mass_integral_numba(v, l, r, h) == pytest.approx(
        kernels.mass_integral_numpy(v, l, r, h), rel=1e-13)
    a = kernels.derivative_sums_numba(v, l, r, h)
    b = kernels.derivative_sums_numpy(v, l, r, h)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-300)
    if p > 2:
        g1, g2 = np.empty_like(v), np.empty_like(v)
        e1 = kernels.energy_and_gradient_numba(v, l, r, h, p, g1)
        e2 = kernels.energy_and_gradient_numpy(v, l, r, h, p, g2)
        assert e1 == pytest.approx(e2, rel=1e-12)
        assert np.allclose(g1, g2, rtol=1e-11, atol=1e-12 * np.abs(g2).max())


@pytest.mark.parametrize("kind", ["normal", "near_equal", "with_zeros"])
@pytest.mark.parametrize("impl", ["numba", "numpy"])
def test_energy_gradient_finite_differences(kind, impl):
    fn = getattr(kernels, f"energy_and_gradient_{impl}")
    v = node_values(2, kind)
    l, r, h = MESH.left, MESH.right, MESH.h
    p = 4.5
    g = np.empty_like(v)
    fn(v, l, r, h, p, g)
    idx = np.random.default_rng(0).choice(MESH.n_nodes, 15, replace=False)
    fd = finite_difference_gradient(lambda x: fn(x, l, r, h, p, np.empty_like(x)), v, idx)
    assert np.abs(fd - g[idx]).max() <= 1e-6 * np.abs(g).max()


def test_energy_kernel_equals_energy_parts():
    from gridnls import functions as fs
    f = fs.GraphFunction(MESH, node_values(3, "normal"))
    e = kernels.energy_and_gradient(f.values, MESH.left, MESH.right, MESH.h, 3.5,
                                    np.empty(MESH.n_nodes))
    assert e == pytest.approx(fs.energy(f, 3.5).energy, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-1e-3, 1e-3), st.sampled_from([2.5, 3.0, 4.0, 6.0, 7.5]))
def test_gradient_continuous_across_series_cutoff(a, rel, p):
    """Two-node gradients agree between the series and closed-form regimes."""
    if abs(a) < 1e-3:
        a = 1.0
    v = np.array([a, a * (1 + rel)])
    l, r = np.array([0]), np.array([1])
    g = np.empty(2)
    kernels.energy_and_gradient_numpy(v, l, r, 1.0, p, g)
    fd = finite_difference_gradient(
        lambda x: kernels.energy_and_gradient_numpy(x, l, r, 1.0, p, np.empty(2)), v, [0, 1],
        rel_step=1e-5)
    assert np.allclose(g, fd, rtol=1e-6, atol=1e-8 * max(1.0, abs(a)) ** (p - 1))


def run_energy_in_subprocess(flag):
    code = (
        "import json, numpy as np\n"
        "from gridnls import BACKEND, functions as fs\n"
        "from gridnls.grid import GridSpec, build_grid\n"
        "m = fs.build_mesh(build_grid(GridSpec(3, 1.0, 2)), 4)\n"
        "f = fs.sample(m, lambda x: np.exp(-np.sum(x**2, axis=1)))\n"
        "print(json.dumps([BACKEND, fs.energy(f, 4.0).energy]))\n"
    )
    env = dict(os.environ, GRIDNLS_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    return json.loads(out.stdout)


def test_environment_flag_selects_backend():
    numpy_backend, e_numpy = run_energy_in_subprocess("0")
    numba_backend, e_numba = run_energy_in_subprocess("1")
    assert numpy_backend == "numpy"
    assert numba_backend == "numba"
    assert e_numpy == pytest.approx(e_numba, rel=1e-13)


def test_backend_name():
    assert BACKEND in ("numba", "numpy")
