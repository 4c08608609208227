"""Sobolev and Gagliardo-Nirenberg inequalities on grid graphs.

Each ``check_*`` evaluates both sides of one inequality exactly for a
piecewise-linear field and compares their ratio with the explicit constant
obtained from the corresponding proof. The constants:

* Sobolev, 3D grid:   ||f||_{3/2}^{3/2} <= 12 ell ||f'||_1^{3/2}
* Sobolev, 2D grid:   ||f||_2^2 <= ell ||f'||_1^2   (same path argument, two axes)
* Sobolev, any grid:  ||f||_inf <= ||f'||_1 / 2      (two half-lines through x)
* L-infinity:         ||f||_inf^2 <= ||f||_2 ||f'||_2
* GN 1D:              bound 1, via ||f||_p^p <= ||f||_inf^(p-2) ||f||_2^2
* GN 3D, p = 6:       Sobolev applied to |f|^4 and Cauchy-Schwarz give
                      ||f||_6^6 <= (96 ell)^4 ||f'||_2^6; Hoelder between
                      2 and 6 then gives (96 ell)^(p-2) for p in [2, 6]
* critical GN:        interpolating 10/3 (bound (96 ell)^(4/3)) and 6
                      (bound 1) gives (96 ell)^((6-p)/2); on 2D grids the
                      same route from p = 4 (bound 4 ell) gives (4 ell)^((6-p)/2)

All checks except the Hoelder one need the field to vanish on the
truncation faces, so that it extends by zero to the infinite grid.
"""
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import functions as fs

TOL = 1e-9


class Form(str, Enum):
    GN_1D = "GN_1D"
    GN_INFTY = "GN_INFTY"
    SOBOLEV_1D = "SOBOLEV_1D"
    SOBOLEV_2D = "SOBOLEV_2D"
    SOBOLEV_3D = "SOBOLEV_3D"
    GN_3D = "GN_3D"
    GN_CRITICAL = "GN_CRITICAL"
    HOLDER_INTERP = "HOLDER_INTERP"


SATISFIED = "satisfied"
VIOLATED = "violated"
VACUOUS = "vacuous"


class InequalityError(ValueError):
    pass


@dataclass
class InequalityReport:
    form: Form
    power: float
    left: float
    right: float
    ratio: float
    provable_bound: float
    verdict: str
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        def num(x):
            if x is None:
                return None
            x = float(x)
            return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")

        out = {
            "form": self.form.value,
            "power": None if self.power is None else float(self.power),
            "left": num(self.left),
            "right": num(self.right),
            "ratio": num(self.ratio),
            "provable_bound": num(self.provable_bound),
            "verdict": self.verdict,
        }
        if self.extra:
            out["extra"] = {k: num(v) if isinstance(v, (int, float)) else v
                            for k, v in self.extra.items()}
        return out


def make_report(form, p, left, right, bound, tol=TOL, extra=None):
    left, right = float(left), float(right)
    if left == 0.0 and right == 0.0:
        ratio, verdict = 1.0, VACUOUS
    else:
        ratio = math.inf if right == 0.0 else left / right
        violated = bound is not None and ratio > bound * (1.0 + tol)
        verdict = VIOLATED if violated else SATISFIED
    return InequalityReport(Form(form), p, left, right, ratio, bound, verdict, extra or {})


def _require_zero_boundary(f):
    if not f.vanishes_on_boundary():
        raise InequalityError("field must vanish on every boundary vertex of the truncated grid")


def _require_dimension(f, d):
    if f.mesh.grid.dimension != d:
        raise InequalityError(f"this inequality needs a {d}-dimensional grid")


def _require_real(f):
    if f.is_complex:
        raise InequalityError("inequality checks take real fields")


def _norms(f):
    m2 = fs.mass(f)
    d2 = fs.derivative_l2_sq(f)
    return m2, d2


def sobolev_constant(dimension, ell):
    return {1: 0.5, 2: ell, 3: 12.0 * ell}[dimension]


def gn3d_constant(p, ell):
    return (96.0 * ell) ** (p - 2.0)


def critical_range(dimension):
    return {1: (6.0, 6.0), 2: (4.0, 6.0), 3: (10.0 / 3.0, 6.0)}[dimension]


def critical_constant(p, dimension, ell):
    base = {1: 1.0, 2: 4.0 * ell, 3: 96.0 * ell}[dimension]
    return base ** ((6.0 - p) / 2.0)


def check_sobolev_3d(f, tol=TOL):
    _require_real(f)
    _require_dimension(f, 3)
    _require_zero_boundary(f)
    left = fs.power_integral(f, 1.5)
    right = fs.derivative_l1(f) ** 1.5
    return make_report(Form.SOBOLEV_3D, 1.5, left, right,
                       sobolev_constant(3, f.mesh.grid.edge_length), tol)


def check_sobolev_2d(f, tol=TOL):
    _require_real(f)
    _require_dimension(f, 2)
    _require_zero_boundary(f)
    left = fs.mass(f)
    right = fs.derivative_l1(f) ** 2
    return make_report(Form.SOBOLEV_2D, 2.0, left, right,
                       sobolev_constant(2, f.mesh.grid.edge_length), tol)


def check_sobolev_1d(f, tol=TOL):
    """||f||_inf <= C ||f'||_1; holds on every grid, C = 1/2."""
    _require_real(f)
    _require_zero_boundary(f)
    return make_report(Form.SOBOLEV_1D, None, fs.sup_norm(f), fs.derivative_l1(f),
                       sobolev_constant(1, f.mesh.grid.edge_length), tol)


def check_sobolev(f, tol=TOL):
    """The Sobolev inequality matching the grid dimension."""
    d = f.mesh.grid.dimension
    return {1: check_sobolev_1d, 2: check_sobolev_2d, 3: check_sobolev_3d}[d](f, tol)


def check_gn_1d(f, p, tol=TOL):
    _require_real(f)
    if not p >= 2:
        raise InequalityError(f"GN_1D needs p >= 2 (got {p})")
    _require_zero_boundary(f)
    m2, d2 = _norms(f)
    left = fs.power_integral(f, p)
    right = m2 ** ((p / 2 + 1) / 2) * d2 ** ((p / 2 - 1) / 2)
    return make_report(Form.GN_1D, p, left, right, 1.0, tol)


def check_gn_infty(f, tol=TOL):
    _require_real(f)
    _require_zero_boundary(f)
    m2, d2 = _norms(f)
    left = fs.sup_norm(f) ** 2
    right = math.sqrt(m2) * math.sqrt(d2)
    # exponents as printed in the source (1/2 on each norm); logged only
    printed = m2 ** 0.25 * d2 ** 0.25
    extra = {"printed_form_right": printed,
             "printed_form_ratio": (left / printed) if printed > 0 else None}
    return make_report(Form.GN_INFTY, None, left, right, 1.0, tol, extra)


def check_gn_3d(f, p, tol=TOL):
    _require_real(f)
    if not 2 <= p <= 6:
        raise InequalityError(f"GN_3D needs p in [2, 6] (got {p})")
    _require_dimension(f, 3)
    _require_zero_boundary(f)
    m2, d2 = _norms(f)
    left = fs.power_integral(f, p)
    right = m2 ** ((3 - p / 2) / 2) * d2 ** ((1.5 * p - 3) / 2)
    return make_report(Form.GN_3D, p, left, right,
                       gn3d_constant(p, f.mesh.grid.edge_length), tol)


def check_gn_critical(f, p, tol=TOL):
    """||f||_p^p <= C ||f||_2^(p-2) ||f'||_2^2 over the grid's critical range."""
    _require_real(f)
    d = f.mesh.grid.dimension
    lo, hi = critical_range(d)
    if not lo - 1e-12 <= p <= hi:
        raise InequalityError(f"critical GN on a {d}D grid needs p in [{lo:.6g}, {hi:g}] (got {p})")
    _require_zero_boundary(f)
    m2, d2 = _norms(f)
    left = fs.power_integral(f, p)
    right = m2 ** ((p - 2) / 2) * d2
    return make_report(Form.GN_CRITICAL, p, left, right,
                       critical_constant(p, d, f.mesh.grid.edge_length), tol)


def check_holder_interp(f, p, tol=TOL):
    _require_real(f)
    if not 2 < p < 6:
        raise InequalityError(f"Hoelder interpolation needs p in (2, 6) (got {p})")
    t = (6.0 - p) / 4.0
    left = fs.power_integral(f, p)
    right = fs.mass(f) ** t * fs.power_integral(f, 6.0) ** (1 - t)
    return make_report(Form.HOLDER_INTERP, p, left, right, 1.0, tol)


@dataclass
class PathReport:
    points: int
    violations: int
    vacuous: int
    max_ratio: float
    worst: dict = None

    @property
    def ok(self):
        return self.violations == 0

    def to_dict(self):
        return {"points": self.points, "violations": self.violations,
                "vacuous": self.vacuous, "max_ratio": self.max_ratio, "worst": self.worst}


def line_variations(f):
    """Integral of |f'| over every line, per axis as a (2R+1)^(d-1) array."""
    grid = f.mesh.grid
    ev = fs.edge_variation(f)
    side = 2 * grid.radius + 1
    out = []
    for a in range(grid.dimension):
        sums = np.array([ev[line].sum() for line in grid.lines[a]])
        out.append(sums.reshape((side,) * (grid.dimension - 1)))
    return ev, out


def path_bound(f, edge, t, variations=None):
    """Both sides of the pointwise three-path estimate at fraction t of an x-edge."""
    grid = f.mesh.grid
    if grid.axes[edge] != 0:
        raise InequalityError("path estimate points must lie on x-axis edges")
    ev, lines = variations if variations is not None else line_variations(f)
    R = grid.radius
    h, j, k = (int(c) + R for c in grid.vertices[grid.edges[edge, 0]])
    x_line = lines[0][j, k]
    y_line = lines[1][h, k]
    z_line = lines[2][h, j]
    cell = ev[edge]
    left = abs(f.evaluate(edge, t)) ** 1.5
    right = math.sqrt(x_line) * (math.sqrt(y_line) + math.sqrt(cell)) \
        * (math.sqrt(z_line) + math.sqrt(cell))
    return left, right


def check_path_estimate(f, points=None, n_points=100, seed=0, tol=TOL):
    """Pointwise estimate |f(x)|^{3/2} <= sqrt(X) (sqrt(Y) + sqrt(c)) (sqrt(Z) + sqrt(c)).

    ``points`` is a sequence of (x-axis edge index, fraction in [0, 1]);
    when omitted, ``n_points`` are drawn uniformly with ``seed``.
    """
    _require_real(f)
    _require_dimension(f, 3)
    _require_zero_boundary(f)
    grid = f.mesh.grid
    if points is None:
        rng = np.random.default_rng(seed)
        x_edges = np.flatnonzero(grid.axes == 0)
        points = list(zip(rng.choice(x_edges, n_points), rng.random(n_points)))
    variations = line_variations(f)
    viol = vac = 0
    max_ratio = 0.0
    worst = None
    for e, t in points:
        left, right = path_bound(f, int(e), float(t), variations)
        if left == 0.0 and right == 0.0:
            vac += 1
            continue
        ratio = math.inf if right == 0.0 else left / right
        if ratio > 1.0 + tol:
            viol += 1
        if ratio >= max_ratio:
            max_ratio = ratio
            worst = {"edge": int(e), "t": float(t), "left": left, "right": right}
    return PathReport(len(points), viol, vac, max_ratio, worst)


CHECKS = {
    Form.SOBOLEV_1D: lambda f, p, tol=TOL: check_sobolev_1d(f, tol),
    Form.SOBOLEV_2D: lambda f, p, tol=TOL: check_sobolev_2d(f, tol),
    Form.SOBOLEV_3D: lambda f, p, tol=TOL: check_sobolev_3d(f, tol),
    Form.GN_1D: check_gn_1d,
    Form.GN_INFTY: lambda f, p, tol=TOL: check_gn_infty(f, tol),
    Form.GN_3D: check_gn_3d,
    Form.GN_CRITICAL: check_gn_critical,
    Form.HOLDER_INTERP: check_holder_interp,
}

# forms whose ratio does not depend on p
P_FREE = {Form.SOBOLEV_1D, Form.SOBOLEV_2D, Form.SOBOLEV_3D, Form.GN_INFTY}


def check(form, f, p=None, tol=TOL):
    return CHECKS[Form(form)](f, p, tol)
