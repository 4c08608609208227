"""Piecewise-linear fields on a meshed grid and their exact norms.

Each edge is cut into ``n`` intervals of length ``h = ell / n``. A field
stores one value per mesh node: the grid vertices come first (in grid
order), then the ``n - 1`` interior nodes of every edge, edge by edge.
Because a vertex is a single node, continuity at vertices cannot be broken.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .grid import Boundary


class FunctionSpaceError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    grid: object
    n: int
    edge_nodes: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    right: np.ndarray = field(repr=False)
    coords: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    boundary_nodes: np.ndarray = field(repr=False)

    @property
    def h(self):
        return self.grid.edge_length / self.n

    @property
    def n_nodes(self):
        return self.coords.shape[0]

    @property
    def n_intervals(self):
        return self.left.shape[0]

    @property
    def dirichlet(self):
        return self.grid.spec.boundary is Boundary.DIRICHLET

    def total_length(self):
        return self.grid.n_edges * self.grid.edge_length

    def node_on_edge(self, edge, k):
        """Node index of the ``k``-th node (0..n) along ``edge``."""
        return int(self.edge_nodes[edge, k])

    def to_dict(self):
        return {"grid": self.grid.spec.to_dict(), "samples_per_edge": self.n}


def build_mesh(grid, n):
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise FunctionSpaceError(f"samples_per_edge must be an integer >= 1 (got {n!r})")
    n = int(n)
    nv, ne = grid.n_vertices, grid.n_edges
    edge_nodes = np.empty((ne, n + 1), dtype=np.int64)
    edge_nodes[:, 0] = grid.edges[:, 0]
    edge_nodes[:, n] = grid.edges[:, 1]
    if n > 1:
        edge_nodes[:, 1:n] = nv + np.arange(ne * (n - 1)).reshape(ne, n - 1)
    left = np.ascontiguousarray(edge_nodes[:, :-1].ravel())
    right = np.ascontiguousarray(edge_nodes[:, 1:].ravel())

    ell = grid.edge_length
    d = grid.dimension
    coords = np.empty((nv + ne * (n - 1), d))
    coords[:nv] = grid.vertices * ell
    if n > 1:
        t = np.arange(1, n) / n
        tails = grid.vertices[grid.edges[:, 0]] * ell
        step = np.zeros((ne, d))
        step[np.arange(ne), grid.axes] = ell
        inner = tails[:, None, :] + t[None, :, None] * step[:, None, :]
        coords[nv:] = inner.reshape(-1, d)

    h = ell / n
    weights = np.zeros(coords.shape[0])
    np.add.at(weights, left, 0.5 * h)
    np.add.at(weights, right, 0.5 * h)

    boundary = np.zeros(coords.shape[0], dtype=bool)
    boundary[:nv] = grid.boundary_mask
    for arr in (edge_nodes, left, right, coords, weights, boundary):
        arr.setflags(write=False)
    return Mesh(grid, n, edge_nodes, left, right, coords, weights, boundary)


@dataclass(eq=False)
class GraphFunction:
    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.dtype.kind not in "fc":
            vals = vals.astype(float)
        if vals.shape != (self.mesh.n_nodes,):
            raise FunctionSpaceError(
                f"expected {self.mesh.n_nodes} node values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise FunctionSpaceError("field contains non-finite values")
        self.values = vals

    @property
    def is_complex(self):
        return self.values.dtype.kind == "c"

    def __mul__(self, c):
        return GraphFunction(self.mesh, self.values * c)

    __rmul__ = __mul__

    def copy(self):
        return GraphFunction(self.mesh, self.values.copy())

    def edge_values(self):
        """(E, n+1) array of node values along every edge."""
        return self.values[self.mesh.edge_nodes]

    def vanishes_on_boundary(self):
        return not np.any(self.values[self.mesh.boundary_nodes])

    def evaluate(self, edge, t):
        """Value at fraction ``t`` in [0, 1] along ``edge``."""
        n = self.mesh.n
        s = min(max(float(t), 0.0), 1.0) * n
        k = min(int(s), n - 1)
        a = self.values[self.mesh.edge_nodes[edge, k]]
        b = self.values[self.mesh.edge_nodes[edge, k + 1]]
        return a + (b - a) * (s - k)


@dataclass(frozen=True)
class EnergyBreakdown:
    mass: float
    kinetic: float
    potential: float
    energy: float
    power: float

    def to_dict(self):
        return {
            "mass": self.mass,
            "kinetic": self.kinetic,
            "potential": self.potential,
            "energy": self.energy,
            "power": self.power,
        }


def zeros(mesh):
    return GraphFunction(mesh, np.zeros(mesh.n_nodes))


def sample(mesh, rule):
    """Evaluate ``rule`` on the node coordinates, shape (N, d) -> (N,)."""
    vals = np.asarray(rule(mesh.coords))
    if vals.shape == ():
        vals = np.full(mesh.n_nodes, vals[()])
    if vals.shape != (mesh.n_nodes,):
        raise FunctionSpaceError(f"rule returned shape {vals.shape}, expected ({mesh.n_nodes},)")
    if not np.all(np.isfinite(vals)):
        raise FunctionSpaceError("rule returned a non-finite value")
    return GraphFunction(mesh, vals.copy())


def _real_values(f, what):
    if f.is_complex:
        raise FunctionSpaceError(f"{what} is only available for real fields")
    return np.ascontiguousarray(f.values, dtype=float)


def lp_norm(f, p):
    if not p >= 1:
        raise FunctionSpaceError(f"p must be >= 1 (got {p})")
    return power_integral(f, p) ** (1.0 / p)


def power_integral(f, p):
    """Exact integral of |f|^p over the grid."""
    m = f.mesh
    if f.is_complex:
        if p != 2:
            raise FunctionSpaceError("only the L2 norm is defined for complex fields")
        a, b = f.values[m.left], f.values[m.right]
        return float(m.h * np.sum(np.abs(a) ** 2 + np.real(a * np.conj(b)) + np.abs(b) ** 2) / 3.0)
    return kernels.power_integral(_real_values(f, "lp_norm"), m.left, m.right, m.h, float(p))


def mass(f):
    return power_integral(f, 2.0)


def sup_norm(f):
    return float(np.max(np.abs(f.values))) if f.values.size else 0.0


def derivative_l2_sq(f):
    m = f.mesh
    if f.is_complex:
        d = f.values[m.right] - f.values[m.left]
        return float(np.sum(np.abs(d) ** 2)) / m.h
    sq, _ = kernels.derivative_sums(_real_values(f, ""), m.left, m.right, m.h)
    return sq


def derivative_l1(f):
    m = f.mesh
    if f.is_complex:
        return float(np.sum(np.abs(f.values[m.right] - f.values[m.left])))
    _, ab = kernels.derivative_sums(_real_values(f, ""), m.left, m.right, m.h)
    return ab


def edge_variation(f):
    """Integral of |f'| over each edge, shape (E,)."""
    ev = f.edge_values()
    return np.abs(np.diff(ev, axis=1)).sum(axis=1)


def _check_power(p):
    if not p > 2:
        raise FunctionSpaceError(f"p must exceed 2 (got {p})")


def energy(f, p):
    _check_power(p)
    T = 0.5 * derivative_l2_sq(f)
    V = power_integral(f, p) / p
    return EnergyBreakdown(mass=mass(f), kinetic=T, potential=V, energy=T - V, power=float(p))


def project_mass(f, target):
    if not target > 0:
        raise FunctionSpaceError(f"target mass must be positive (got {target})")
    m0 = mass(f)
    if m0 <= 0:
        raise FunctionSpaceError("cannot project the zero function onto a mass sphere")
    return GraphFunction(f.mesh, f.values * np.sqrt(target / m0))


def energy_gradient(f, p):
    """Partial derivatives of ``energy(f, p).energy`` in the node values.

    Entries on Dirichlet boundary nodes are zeroed, since those values are fixed.
    """
    _check_power(p)
    m = f.mesh
    grad = np.empty(m.n_nodes)
    kernels.energy_and_gradient(_real_values(f, "energy_gradient"), m.left, m.right, m.h,
                                float(p), grad)
    if m.dirichlet:
        grad[m.boundary_nodes] = 0.0
    return GraphFunction(m, grad)
