"""Parametric and random families of zero-boundary fields on a mesh."""
import numpy as np

from .functions import GraphFunction


def cutoff(mesh):
    """Product of cosines: 1 at the centre, 0 on every truncation face."""
    L = mesh.grid.radius * mesh.grid.edge_length
    return np.prod(np.cos(0.5 * np.pi * mesh.coords / L), axis=1)


def _zero_boundary(mesh, vals):
    vals = np.asarray(vals, dtype=float)
    vals[mesh.boundary_nodes] = 0.0
    return GraphFunction(mesh, vals)


def random_field(mesh, rng, kind=None):
    """A random field vanishing on the truncation faces.

    ``kind`` picks the texture: 'nodes' (independent node values),
    'vertices' (random vertex values, linear along edges), 'sparse'
    (a few random spikes), or 'smooth' (a signed sum of random Gaussians).
    Without ``kind`` one is drawn at random.
    """
    kinds = ("nodes", "vertices", "sparse", "smooth")
    if kind is None:
        kind = kinds[rng.integers(len(kinds))]
    n = mesh.n_nodes
    if kind == "nodes":
        vals = rng.standard_normal(n)
    elif kind == "vertices":
        nv = mesh.grid.n_vertices
        vv = rng.standard_normal(nv)
        vals = np.empty(n)
        vals[:nv] = vv
        t = np.arange(1, mesh.n) / mesh.n
        ends = vv[mesh.grid.edges]
        inner = ends[:, :1] * (1 - t) + ends[:, 1:] * t
        vals[nv:] = inner.ravel()
    elif kind == "sparse":
        vals = np.zeros(n)
        k = int(rng.integers(1, 6))
        vals[rng.choice(n, k, replace=False)] = rng.standard_normal(k) * 10 ** rng.uniform(-2, 2)
    elif kind == "smooth":
        L = mesh.grid.radius * mesh.grid.edge_length
        vals = np.zeros(n)
        for _ in range(int(rng.integers(1, 5))):
            c = rng.uniform(-L, L, mesh.grid.dimension)
            w = rng.uniform(0.1, 1.5) * mesh.grid.edge_length
            r2 = np.sum((mesh.coords - c) ** 2, axis=1)
            vals += rng.standard_normal() * np.exp(-0.5 * r2 / w**2)
        vals *= cutoff(mesh)
    else:
        raise ValueError(f"unknown random field kind {kind!r}")
    f = _zero_boundary(mesh, vals)
    if not np.any(f.values):
        f.values[int(np.argmax(~mesh.boundary_nodes))] = 1.0
    return f


def gaussian_bump(mesh, center, width):
    r2 = np.sum((mesh.coords - np.asarray(center)) ** 2, axis=1)
    return _zero_boundary(mesh, np.exp(-0.5 * r2 / width**2) * cutoff(mesh))


def soliton_line(mesh, center, width, power=6.0):
    """1D soliton profile along the x-line through the origin.

    Transverse edges leaving that line taper linearly to zero over one edge,
    which keeps the field continuous at the line's vertices.
    """
    ell = mesh.grid.edge_length
    x = mesh.coords[:, 0]
    transverse = np.sum(np.abs(mesh.coords[:, 1:]), axis=1)
    taper = np.clip(1.0 - transverse / ell, 0.0, None)
    prof = np.cosh((x - center) / width) ** (-2.0 / (power - 2.0))
    L = mesh.grid.radius * ell
    prof *= np.cos(0.5 * np.pi * x / L)
    return _zero_boundary(mesh, prof * taper)


def tensor_bump(mesh, center, widths):
    """Product over axes of cos^2 bumps of the given half-widths."""
    vals = np.ones(mesh.n_nodes)
    for a in range(mesh.grid.dimension):
        u = (mesh.coords[:, a] - center[a]) / widths[a]
        vals *= np.where(np.abs(u) < 1.0, np.cos(0.5 * np.pi * u) ** 2, 0.0)
    return _zero_boundary(mesh, vals)


def tent_on_edge(mesh, edge, peak=1.0):
    """Tent supported on one edge, peak at its midpoint (needs even n)."""
    n = mesh.n
    if n % 2:
        raise ValueError("a midpoint tent needs an even number of samples per edge")
    vals = np.zeros(mesh.n_nodes)
    k = np.arange(n + 1)
    vals[mesh.edge_nodes[edge]] = peak * (1.0 - np.abs(2.0 * k / n - 1.0))
    return GraphFunction(mesh, vals)
