import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridnls import families as fam
from gridnls import functions as fs
from gridnls import inequalities as ineq
from gridnls.inequalities import Form, InequalityError
from conftest import make_mesh

P_FORMS = {
    Form.GN_1D: [2.0, 3.0, 4.0, 6.0],
    Form.GN_3D: [2.0, 10 / 3, 4.0, 6.0],
    Form.GN_CRITICAL: [10 / 3, 4.0, 5.0, 6.0],
    Form.HOLDER_INTERP: [2.5, 4.0, 5.5],
}


def test_report_conventions():
    r = ineq.make_report(Form.GN_1D, 3.0, 0.0, 0.0, 1.0)
    assert (r.ratio, r.verdict) == (1.0, ineq.VACUOUS)
    r = ineq.make_report(Form.GN_1D, 3.0, 1.0, 0.0, 1.0)
    assert r.ratio == math.inf and r.verdict == ineq.VIOLATED
    r = ineq.make_report(Form.GN_1D, 3.0, 1.0 + 5e-10, 1.0, 1.0)
    assert r.verdict == ineq.SATISFIED  # inside the relative tolerance
    r = ineq.make_report(Form.GN_1D, 3.0, 1.0 + 5e-9, 1.0, 1.0)
    assert r.verdict == ineq.VIOLATED
    d = r.to_dict()
    assert set(d) >= {"form", "power", "left", "right", "ratio", "provable_bound", "verdict"}
    assert d["form"] == "GN_1D"


def test_derived_constants():
    assert ineq.sobolev_constant(3, 1.0) == 12.0
    assert ineq.sobolev_constant(3, 0.5) == 6.0
    assert ineq.gn3d_constant(6.0, 1.0) == pytest.approx(96.0**4)
    assert ineq.critical_constant(6.0, 3, 1.0) == 1.0
    assert ineq.critical_constant(4.0, 3, 1.0) == pytest.approx(96.0)
    assert ineq.critical_constant(4.0, 2, 1.0) == pytest.approx(4.0)


def test_tent_values():
    # 1D grid: one tent on an interior edge of a radius-2 line
    mesh = make_mesh(dim=1, radius=2, n=4)
    f = fam.tent_on_edge(mesh, 1)
    r = ineq.check_sobolev_1d(f)
    assert r.ratio == pytest.approx(0.5)  # sup 1, total variation 2: the bound is attained
    r = ineq.check_gn_1d(f, 2.0)
    assert r.ratio == pytest.approx(1.0)  # both sides are the mass at p = 2
    r = ineq.check_gn_infty(f)
    # sup^2 = 1, sqrt(1/3 * 4)
    assert r.ratio == pytest.approx(1 / math.sqrt(4 / 3))
    assert r.extra["printed_form_right"] == pytest.approx((1 / 3) ** 0.25 * 4 ** 0.25)


@pytest.fixture(scope="module")
def fields():
    mesh = make_mesh(dim=3, radius=2, n=4)
    rng = np.random.default_rng(99)
    return [fam.random_field(mesh, rng) for _ in range(40)]


def test_random_fields_satisfy_every_form(fields):
    for f in fields:
        for form in (Form.SOBOLEV_3D, Form.SOBOLEV_1D, Form.GN_INFTY):
            assert ineq.check(form, f).verdict != ineq.VIOLATED
        for form, powers in P_FORMS.items():
            for p in powers:
                assert ineq.check(form, f, p).verdict != ineq.VIOLATED, (form, p)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 100.0), st.integers(0, 39))
def test_ratios_scale_invariant(c, i):
    mesh = make_mesh(dim=3, radius=1, n=4)
    f = fam.random_field(mesh, np.random.default_rng(i))
    for form, p in ((Form.SOBOLEV_3D, None), (Form.GN_INFTY, None), (Form.GN_1D, 4.0),
                    (Form.GN_CRITICAL, 4.0), (Form.GN_3D, 5.0), (Form.HOLDER_INTERP, 3.0)):
        a = ineq.check(form, f, p).ratio
        b = ineq.check(form, c * f, p).ratio
        assert b == pytest.approx(a, rel=1e-9)


def test_zero_field_is_vacuous():
    f = fs.zeros(make_mesh(dim=3, radius=1, n=2))
    assert ineq.check_sobolev_3d(f).verdict == ineq.VACUOUS
    assert ineq.check_gn_1d(f, 3.0).verdict == ineq.VACUOUS


def test_precondition_errors():
    mesh = make_mesh(dim=3, radius=1, n=2)
    f = fs.sample(mesh, lambda x: np.ones(len(x)))
    with pytest.raises(InequalityError, match="vanish"):
        ineq.check_sobolev_3d(f)
    g = fs.zeros(mesh)
    with pytest.raises(InequalityError):
        ineq.check_gn_3d(g, 7.0)
    with pytest.raises(InequalityError):
        ineq.check_gn_critical(g, 3.0)
    with pytest.raises(InequalityError):
        ineq.check_holder_interp(g, 6.0)
    with pytest.raises(InequalityError):
        ineq.check_gn_1d(g, 1.5)
    f2 = fs.zeros(make_mesh(dim=2, radius=1, n=2))
    with pytest.raises(InequalityError, match="3-dimensional"):
        ineq.check_sobolev_3d(f2)
    z = fs.GraphFunction(mesh, np.zeros(mesh.n_nodes, dtype=complex))
    with pytest.raises(InequalityError, match="real"):
        ineq.check_gn_infty(z)


def test_sobolev_dispatch_by_dimension():
    for d, form in ((1, Form.SOBOLEV_1D), (2, Form.SOBOLEV_2D), (3, Form.SOBOLEV_3D)):
        mesh = make_mesh(dim=d, radius=2, n=2)
        f = fam.random_field(mesh, np.random.default_rng(d))
        assert ineq.check_sobolev(f).form is form


def test_sobolev_2d_on_random_fields():
    mesh = make_mesh(dim=2, radius=3, n=4)
    rng = np.random.default_rng(5)
    for _ in range(50):
        assert ineq.check_sobolev_2d(fam.random_field(mesh, rng)).verdict != ineq.VIOLATED


def test_path_estimate_random_points(fields):
    for i, f in enumerate(fields[:10]):
        rep = ineq.check_path_estimate(f, n_points=50, seed=i)
        assert rep.ok and rep.points == 50
        assert rep.max_ratio <= 1.0


def test_path_estimate_explicit_points_and_errors(fields):
    f = fields[1]
    grid = f.mesh.grid
    x_edge = int(np.flatnonzero(grid.axes == 0)[10])
    rep = ineq.check_path_estimate(f, points=[(x_edge, 0.0), (x_edge, 0.5), (x_edge, 1.0)])
    assert rep.points == 3
    y_edge = int(np.flatnonzero(grid.axes == 1)[0])
    with pytest.raises(InequalityError):
        ineq.path_bound(f, y_edge, 0.5)


def test_path_estimate_on_single_edge_bump():
    """A bump on one x-edge: the x-line and the cell carry all the variation."""
    mesh = make_mesh(dim=3, radius=2, n=8)
    grid = mesh.grid
    centre = grid.vertex_index((0, 0, 0))
    e = int(np.flatnonzero((grid.edges[:, 0] == centre) & (grid.axes == 0))[0])
    f = fam.tent_on_edge(mesh, e)
    left, right = ineq.path_bound(f, e, 0.5)
    assert left == pytest.approx(1.0)
    # X = 2, Y = Z = 0 on the transverse lines, the cell carries 2
    assert right == pytest.approx(math.sqrt(2) * math.sqrt(2) * math.sqrt(2))


def test_line_variations_total(fields):
    f = fields[2]
    ev, lines = ineq.line_variations(f)
    assert sum(l.sum() for l in lines) == pytest.approx(fs.derivative_l1(f))
    assert ev.sum() == pytest.approx(fs.derivative_l1(f))
