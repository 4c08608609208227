"""Truncated d-dimensional grid graphs and their decomposition into lines."""
from dataclasses import dataclass, field
from enum import Enum
from itertools import product

import numpy as np


class Boundary(str, Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    dimension: int
    edge_length: float = 1.0
    radius: int = 2
    boundary: Boundary = Boundary.DIRICHLET

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        problems = self.problems()
        if problems:
            raise GridError("; ".join(problems))

    def problems(self):
        out = []
        if isinstance(self.dimension, bool) or self.dimension not in (1, 2, 3):
            out.append(f"dimension must be 1, 2 or 3 (got {self.dimension!r})")
        if not (isinstance(self.edge_length, (int, float)) and np.isfinite(self.edge_length)
                and self.edge_length > 0):
            out.append(f"edge_length must be positive (got {self.edge_length!r})")
        if isinstance(self.radius, bool) or not isinstance(self.radius, (int, np.integer)) \
                or self.radius < 1:
            out.append(f"radius must be an integer >= 1 (got {self.radius!r})")
        return out

    def to_dict(self):
        return {
            "dimension": int(self.dimension),
            "edge_length": float(self.edge_length),
            "radius": int(self.radius),
            "boundary": self.boundary.value,
        }


@dataclass(frozen=True, eq=False)
class MetricGrid:
    """A grid cube of lattice radius R.

    ``vertices`` holds lattice coordinates, shape (V, d), sorted
    lexicographically. ``edges`` holds (tail, head) vertex indices with the
    head one lattice step further along ``axes``. ``lines[a]`` is a list of
    edge-index arrays, one per maximal straight line parallel to axis ``a``,
    ordered along the axis.
    """

    spec: GridSpec
    vertices: np.ndarray
    edges: np.ndarray
    axes: np.ndarray
    lengths: np.ndarray
    lines: tuple
    boundary_mask: np.ndarray = field(repr=False)

    @property
    def dimension(self):
        return self.spec.dimension

    @property
    def edge_length(self):
        return self.spec.edge_length

    @property
    def radius(self):
        return self.spec.radius

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_edges(self):
        return self.edges.shape[0]

    @property
    def boundary_vertices(self):
        return np.flatnonzero(self.boundary_mask)

    def vertex_index(self, coords):
        """Index of the vertex with lattice coordinates ``coords``."""
        R = self.radius
        idx = 0
        for c in coords:
            if not -R <= c <= R:
                raise GridError(f"lattice point {tuple(coords)} outside the grid")
            idx = idx * (2 * R + 1) + (c + R)
        return idx

    def degrees(self):
        return np.bincount(self.edges.ravel(), minlength=self.n_vertices)

    def positions(self):
        """Vertex positions embedded in R^d."""
        return self.vertices * self.edge_length


def expected_counts(dimension, radius):
    side = 2 * radius + 1
    return side**dimension, dimension * 2 * radius * side ** (dimension - 1)


def build_grid(spec):
    d, R, ell = spec.dimension, spec.radius, spec.edge_length
    side = 2 * R + 1
    coords = np.array(list(product(range(-R, R + 1), repeat=d)), dtype=np.int64)
    strides = side ** np.arange(d - 1, -1, -1)

    tails, heads, axes = [], [], []
    for v, c in enumerate(coords):
        for a in range(d):
            if c[a] < R:
                tails.append(v)
                heads.append(v + strides[a])
                axes.append(a)
    edges = np.column_stack([tails, heads]).astype(np.int64)
    axes = np.array(axes, dtype=np.int64)

    # edge lookup keyed by (tail vertex, axis)
    edge_of = {(int(t), int(a)): e for e, (t, a) in enumerate(zip(tails, axes))}
    lines = []
    for a in range(d):
        others = [b for b in range(d) if b != a]
        per_axis = []
        for fixed in product(range(-R, R + 1), repeat=d - 1):
            line = []
            for s in range(-R, R):
                c = np.empty(d, dtype=np.int64)
                c[a] = s
                c[others] = fixed
                tail = int(np.dot(c + R, strides))
                line.append(edge_of[(tail, a)])
            per_axis.append(np.array(line, dtype=np.int64))
        lines.append(tuple(per_axis))

    boundary = np.any(np.abs(coords) == R, axis=1)
    for arr in (coords, edges, axes, boundary):
        arr.setflags(write=False)
    lengths = np.full(edges.shape[0], float(ell))
    lengths.setflags(write=False)
    return MetricGrid(spec, coords, edges, axes, lengths, tuple(lines), boundary)


def line_decomposition(grid, axis):
    if not 0 <= axis < grid.dimension:
        raise GridError(f"axis {axis} out of range for a {grid.dimension}-dimensional grid")
    return list(grid.lines[axis])


def line_containing(grid, edge):
    """(axis, line index, position on line) of an edge."""
    a = int(grid.axes[edge])
    tail = grid.vertices[grid.edges[edge, 0]]
    R = grid.radius
    others = [b for b in range(grid.dimension) if b != a]
    idx = 0
    for b in others:
        idx = idx * (2 * R + 1) + int(tail[b]) + R
    return a, idx, int(tail[a]) + R


@dataclass
class GridReport:
    checks: dict

    @property
    def ok(self):
        return all(c["passed"] for c in self.checks.values())

    def failures(self):
        return [name for name, c in self.checks.items() if not c["passed"]]


def validate(grid):
    """Check every structural invariant; violations are reported, never raised."""
    spec = grid.spec
    checks = {}

    def record(name, passed, detail=""):
        checks[name] = {"passed": bool(passed), "detail": detail}

    problems = spec.problems()
    record("spec valid", not problems, "; ".join(problems))
    if problems:
        return GridReport(checks)

    d, R, ell = spec.dimension, spec.radius, spec.edge_length
    nv, ne = expected_counts(d, R)
    record("vertex count", grid.n_vertices == nv, f"{grid.n_vertices} vs {nv}")
    record("edge count", grid.n_edges == ne, f"{grid.n_edges} vs {ne}")

    lengths_ok = grid.lengths.shape == (grid.n_edges,) and bool(np.all(grid.lengths == ell))
    record("edges have length ell", lengths_ok)

    ends_ok = True
    if grid.n_edges:
        ends_ok = bool(np.all((grid.edges >= 0) & (grid.edges < grid.n_vertices)))
    if ends_ok and grid.n_edges:
        step = grid.vertices[grid.edges[:, 1]] - grid.vertices[grid.edges[:, 0]]
        unit = np.zeros_like(step)
        unit[np.arange(grid.n_edges), grid.axes] = 1
        ends_ok = bool(np.array_equal(step, unit))
    record("edges join lattice neighbours", ends_ok)

    if ends_ok:
        deg = grid.degrees()
        interior = ~grid.boundary_mask
        record("interior degree 2d", bool(np.all(deg[interior] == 2 * d)))
    else:
        record("interior degree 2d", False, "edge endpoints invalid")

    seen = np.concatenate([np.concatenate(ls) for ls in grid.lines if len(ls)]) \
        if any(len(ls) for ls in grid.lines) else np.array([], dtype=np.int64)
    partition = (
        seen.size == grid.n_edges
        and np.array_equal(np.sort(seen), np.arange(grid.n_edges))
    )
    if partition:
        for a, ls in enumerate(grid.lines):
            for line in ls:
                if np.any(grid.axes[line] != a):
                    partition = False
    record("lines partition edges", partition)
    record(
        "line lengths 2R",
        all(len(line) == 2 * R for ls in grid.lines for line in ls),
    )
    return GridReport(checks)
