"""Mass-constrained energy minimisation and the (p, mu) existence diagram."""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import functions as fs
from .families import cutoff
from .functions import GraphFunction
from .inequalities import critical_constant, critical_range

log = logging.getLogger(__name__)

NEGATIVE = "negative_ground_state"
NONNEGATIVE = "nonnegative_no_minimizer_suspected"
UNBOUNDED = "unbounded_below_suspected"


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    power: float
    mass: float
    init: str = "mixed"  # gaussian | random | edge | mixed | file
    metric: str = "h1"  # descent metric: h1 (preconditioned) or l2
    init_file: str = None
    seed: int = 0
    step: float = 0.5
    backtrack: float = 0.5
    grow: float = 1.25
    max_iter: int = 20000
    energy_tol: float = 1e-12
    grad_tol: float = 1e-5
    multistart: int = 9
    sign_tol: float = 1e-10
    stall_iter: int = 200  # stop after this many steps without energy progress

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self):
        out = []
        if not self.power > 2:
            out.append("p must exceed 2")
        if not self.mass > 0:
            out.append("mass must be positive")
        if not self.step > 0:
            out.append("step must be positive")
        if not 0 < self.backtrack < 1:
            out.append("backtrack factor must lie in (0, 1)")
        if not self.grow >= 1:
            out.append("grow factor must be >= 1")
        if not (self.energy_tol > 0 and self.grad_tol > 0 and self.sign_tol > 0):
            out.append("tolerances must be positive")
        if self.max_iter < 1 or self.multistart < 1 or self.stall_iter < 1:
            out.append("max_iter, multistart and stall_iter must be >= 1")
        if self.init not in ("gaussian", "random", "edge", "mixed", "file"):
            out.append(f"unknown init {self.init!r}")
        if self.metric not in ("h1", "l2"):
            out.append(f"unknown metric {self.metric!r}")
        if self.init == "file" and not self.init_file:
            out.append("init 'file' needs init_file")
        return out

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class GroundStateResult:
    minimizer: GraphFunction
    breakdown: fs.EnergyBreakdown
    iterations: int
    converged: bool
    grad_norm: float
    start: int = 0
    energies: np.ndarray = field(default=None, repr=False)
    mass_drift: float = 0.0
    anomalies: list = field(default_factory=list)

    def to_dict(self):
        return {
            "breakdown": self.breakdown.to_dict(),
            "iterations": self.iterations,
            "converged": self.converged,
            "grad_norm": self.grad_norm,
            "start": self.start,
            "mass_drift": self.mass_drift,
            "anomalies": list(self.anomalies),
        }


def initial_guess(mesh, kind, index, seed):
    """Deterministic starting field number ``index`` of a multistart.

    'mixed' cycles through a vertex-centred Gaussian, a random positive
    field and a bump on the edge leaving the centre, so both spread and
    concentrated minimisers are within reach.
    """
    L = mesh.grid.radius * mesh.grid.edge_length
    cut = cutoff(mesh) if mesh.dirichlet else np.ones(mesh.n_nodes)
    k = index
    if kind == "mixed":
        kind = ("gaussian", "random", "edge")[index % 3]
        k = index // 3
    if kind == "gaussian":
        # widths cycle from a fraction of an edge to a third of the cube
        widths = np.geomspace(0.25 * mesh.grid.edge_length, L / 1.5, 4)
        w = widths[k % 4]
        r2 = np.sum(mesh.coords**2, axis=1)
        vals = np.exp(-0.5 * r2 / w**2) * cut
    elif kind == "random":
        rng = np.random.default_rng([seed, index])
        vals = (0.1 + rng.random(mesh.n_nodes)) * cut
    elif kind == "edge":
        lam = min(2.0 ** (k % 3), max(1.0, 0.5 / mesh.h))
        vals = concentration_member(mesh, lam).values
    else:
        raise SolverError(f"unknown initial guess {kind!r}")
    if mesh.dirichlet:
        vals = np.where(mesh.boundary_nodes, 0.0, vals)
    return GraphFunction(mesh, vals)


def _mass_matvec(mesh, x):
    """Consistent mass matrix times x; grad of the exact mass is 2 M x."""
    a, b = x[mesh.left], x[mesh.right]
    h = mesh.h
    n = mesh.n_nodes
    return (np.bincount(mesh.left, (2 * a + b) * (h / 6), n)
            + np.bincount(mesh.right, (a + 2 * b) * (h / 6), n))


def _free_mask(mesh):
    if mesh.dirichlet:
        return ~mesh.boundary_nodes
    return np.ones(mesh.n_nodes, dtype=bool)


def projected_gradient_norm(f, p, grad=None):
    """Relative size of the energy gradient tangent to the mass sphere.

    Returns |g - lambda M f| / |g| in the lumped L2 metric, with lambda the
    best Lagrange multiplier; zero exactly at a constrained critical point.
    The value does not depend on the descent metric that produced ``f``.
    """
    mesh = f.mesh
    if grad is None:
        grad = fs.energy_gradient(f, p).values
    free = _free_mask(mesh)
    w = mesh.weights[free]
    g = grad[free]
    gg = np.dot(g, g / w)
    if gg == 0.0:
        return 0.0
    mx = _mass_matvec(mesh, f.values)[free]
    lam = np.dot(g, mx / w) / np.dot(mx, mx / w)
    r = g - lam * mx
    return float(np.sqrt(np.dot(r, r / w) / gg))


_FACTOR_CACHE = {}


def _h1_solver(mesh):
    """Factorised (K + M / ell^2) on the free nodes; K stiffness, M lumped mass."""
    key = id(mesh)
    hit = _FACTOR_CACHE.get(key)
    if hit is not None and hit[0] is mesh:
        return hit[1]
    n, h = mesh.n_nodes, mesh.h
    rows = np.concatenate([mesh.left, mesh.right, mesh.left, mesh.right])
    cols = np.concatenate([mesh.left, mesh.right, mesh.right, mesh.left])
    k = np.full(mesh.n_intervals, 1.0 / h)
    vals = np.concatenate([k, k, -k, -k])
    K = sp.csc_matrix((vals, (rows, cols)), shape=(n, n))
    A = K + sp.diags(mesh.weights / mesh.grid.edge_length**2)
    free = np.flatnonzero(_free_mask(mesh))
    lu = splu(sp.csc_matrix(A[free][:, free]))
    if len(_FACTOR_CACHE) > 16:
        _FACTOR_CACHE.clear()
    _FACTOR_CACHE[key] = (mesh, (free, lu))
    return free, lu


def _direction_fn(mesh, metric):
    free = _free_mask(mesh)
    if metric == "l2":
        inv_w = np.where(free, 1.0 / mesh.weights, 0.0)
        return lambda g: g * inv_w
    idx, lu = _h1_solver(mesh)

    def h1(g):
        out = np.zeros_like(g)
        out[idx] = lu.solve(g[idx])
        return out
    return h1


def _descend(f0, cfg, callback=None):
    mesh = f0.mesh
    p, mu = float(cfg.power), float(cfg.mass)
    x = fs.project_mass(f0, mu).values.copy()
    if mesh.dirichlet:
        x[mesh.boundary_nodes] = 0.0
        x = fs.project_mass(GraphFunction(mesh, x), mu).values
    left, right, h = mesh.left, mesh.right, mesh.h
    energy_and_gradient = fs.kernels.energy_and_gradient
    mass_integral = fs.kernels.mass_integral
    direction_of = _direction_fn(mesh, cfg.metric)
    # l2 steps live on the h^2 stability scale; h1 steps are O(1)
    unit = h * h if cfg.metric == "l2" else 1.0
    tau = cfg.step * unit
    tau_max = 64.0 * cfg.step * unit

    grad = np.empty(mesh.n_nodes)
    trial_grad = np.empty_like(grad)
    E = energy_and_gradient(x, left, right, h, p, grad)
    if not math.isfinite(E):
        raise SolverError("non-finite energy at the initial guess")
    energies = [E]
    converged = False
    stalled = 0
    it = 0
    for it in range(1, cfg.max_iter + 1):
        # remove the component normal to the mass sphere in the descent metric
        direction = direction_of(grad)
        mx = _mass_matvec(mesh, x)
        u = direction_of(mx)
        direction -= (np.dot(grad, u) / np.dot(mx, u)) * u
        accepted = False
        for _ in range(60):
            y = x - tau * direction
            m = mass_integral(y, left, right, h)
            if m > 0:
                y *= math.sqrt(mu / m)
                E_new = energy_and_gradient(y, left, right, h, p, trial_grad)
                if not math.isfinite(E_new):
                    raise SolverError(f"non-finite energy at iteration {it}")
                if E_new <= E:
                    accepted = True
                    break
            tau *= cfg.backtrack
        if not accepted:
            break  # no descent left at machine resolution
        dE = E - E_new
        x, E = y, E_new
        grad, trial_grad = trial_grad, grad
        energies.append(E)
        tau = min(tau * cfg.grow, tau_max)
        if callback is not None:
            callback(it, x, E)
        if dE <= cfg.energy_tol * max(1.0, abs(E)):
            stalled += 1
            if mesh.dirichlet:
                grad[mesh.boundary_nodes] = 0.0
            if projected_gradient_norm(GraphFunction(mesh, x), p, grad) <= cfg.grad_tol:
                converged = True
                break
            if stalled >= cfg.stall_iter:
                break  # energy flat to rounding; the gradient test is left to the caller
        else:
            stalled = 0
    f = GraphFunction(mesh, x)
    if mesh.dirichlet:
        grad[mesh.boundary_nodes] = 0.0
    gnorm = projected_gradient_norm(f, p, grad)
    converged = converged or gnorm <= cfg.grad_tol
    return f, it, converged, gnorm, np.array(energies)


def small_mass_threshold(p, dimension, ell):
    """Mass below which the critical GN bound forces E >= 0 for zero-boundary fields.

    From V <= C mu^(p/2-1) ||f'||^2 / p = (2/p) C mu^(p/2-1) T, the energy
    T - V stays nonnegative while (2/p) C mu^(p/2-1) < 1. Returns None when p
    lies outside the grid's critical range.
    """
    lo, hi = critical_range(dimension)
    if not lo - 1e-12 <= p <= hi:
        return None
    C = critical_constant(p, dimension, ell)
    return (p / (2.0 * C)) ** (1.0 / (p / 2.0 - 1.0))


def _consistency_anomalies(mesh, cfg, res):
    """Energies that contradict the small-mass inequality bound."""
    out = []
    if not mesh.dirichlet:
        return out
    thr = small_mass_threshold(cfg.power, mesh.grid.dimension, mesh.grid.edge_length)
    if thr is not None and cfg.mass < thr and res.breakdown.energy < -cfg.sign_tol:
        out.append(f"energy {res.breakdown.energy:.3e} < 0 below the inequality-implied "
                   f"mass threshold {thr:.4g}")
    return out


def minimize(mesh, cfg, initial=None, callback=None):
    """Normalized gradient flow with backtracking, best over a multistart.

    Each accepted step is f <- P(f - tau A^-1 grad E), where A is the
    stiffness plus lumped mass over ell^2 (metric 'h1') or the lumped mass
    alone ('l2'), the direction is made tangent to the mass sphere, and P
    rescales onto it. tau shrinks until the energy does not increase. Every
    start is checked against the mass and monotonicity invariants, and the
    lowest final energy wins.
    """
    if initial is not None:
        starts = [initial]
    elif cfg.init == "file":
        from .io import load_function
        starts = [load_function(cfg.init_file, mesh)]
    else:
        starts = [initial_guess(mesh, cfg.init, k, cfg.seed) for k in range(cfg.multistart)]
    best = None
    anomalies = []
    for k, f0 in enumerate(starts):
        f, it, conv, gnorm, energies = _descend(f0, cfg, callback)
        bd = fs.energy(f, cfg.power)
        res = GroundStateResult(
            f, bd, it, conv, gnorm, start=k, energies=energies,
            mass_drift=abs(bd.mass - cfg.mass) / cfg.mass,
        )
        if res.mass_drift > 1e-10:
            anomalies.append(f"start {k}: mass drift {res.mass_drift:.2e}")
        if np.any(np.diff(energies) > 0):
            anomalies.append(f"start {k}: energy increased")
        anomalies.extend(f"start {k}: {a}" for a in _consistency_anomalies(mesh, cfg, res))
        log.debug("start %d: E=%.6e it=%d converged=%s", k, bd.energy, it, conv)
        if best is None or bd.energy < best.breakdown.energy:
            best = res
    best.anomalies = anomalies
    return best


@dataclass
class CriticalMassEstimate:
    power: float
    estimate: float
    bracket: tuple
    history: list
    anomalies: list

    def to_dict(self):
        return {
            "power": self.power,
            "estimate": self.estimate,
            "bracket": list(self.bracket),
            "history": self.history,
            "anomalies": self.anomalies,
        }


class CriticalMassError(ValueError):
    pass


def estimate_critical_mass(mesh, p, bracket, tol=1e-3, cfg=None):
    """Bisect on mu for the sign change of the best multistart energy.

    The predicate is "best energy < -sign_tol"; it is assumed monotone in mu
    (false below the critical mass, true above). Solver non-convergence and
    monotonicity breaks are recorded as anomalies with the step index.
    """
    lo_p, hi_p = critical_range(mesh.grid.dimension)
    if not lo_p - 1e-12 <= p <= hi_p:
        raise CriticalMassError(
            f"critical masses exist for p in [{lo_p:.6g}, {hi_p:g}] on this grid (got {p})")
    lo, hi = float(bracket[0]), float(bracket[1])
    if not 0 < lo < hi:
        raise CriticalMassError("bracket must satisfy 0 < mu_lo < mu_hi")
    base = cfg if cfg is not None else SolverConfig(power=p, mass=1.0)
    history, anomalies = [], []

    def negative(mu, step):
        c = SolverConfig(**{**base.to_dict(), "power": p, "mass": mu})
        res = minimize(mesh, c)
        E = res.breakdown.energy
        history.append({"step": step, "mass": mu, "energy": E, "converged": res.converged})
        if not res.converged:
            anomalies.append(f"step {step}: solver did not converge at mu={mu:.6g}")
        for a in res.anomalies:
            anomalies.append(f"step {step}: {a}")
        return E < -base.sign_tol

    neg_lo = negative(lo, 0)
    neg_hi = negative(hi, 1)
    if neg_lo == neg_hi:
        raise CriticalMassError(
            f"no sign change on [{lo}, {hi}]: both ends {'negative' if neg_lo else 'nonnegative'}")
    if neg_lo and not neg_hi:
        anomalies.append("predicate decreases in mu: negative energy below, nonnegative above")
    step = 2
    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        if negative(mid, step) == neg_lo:
            lo = mid
        else:
            hi = mid
        step += 1
    return CriticalMassEstimate(float(p), 0.5 * (lo + hi), (lo, hi), history, anomalies)


class ProbeError(ValueError):
    pass


@dataclass
class ProbeEvidence:
    kind: str
    power: float
    mass: float
    parameters: list
    energies: list
    scaled: list
    decreasing_tail: bool
    unbounded: bool
    negative: bool

    def to_dict(self):
        return dict(self.__dict__)


def concentration_member(mesh, lam):
    """sqrt(lam) * phi(lam * (s - ell/2)) on the x-edge leaving the central vertex.

    phi(u) = cos^2(pi u / ell) on |u| <= ell/2, so for lam >= 1 the support
    stays inside that single edge and the family is mass invariant.
    """
    grid = mesh.grid
    ell = grid.edge_length
    centre = grid.vertex_index((0,) * grid.dimension)
    edge = int(np.flatnonzero((grid.edges[:, 0] == centre) & (grid.axes == 0))[0])
    s = np.arange(mesh.n + 1) * mesh.h
    u = lam * (s - 0.5 * ell)
    phi = np.where(np.abs(u) <= 0.5 * ell, np.cos(np.pi * u / ell) ** 2, 0.0)
    vals = np.zeros(mesh.n_nodes)
    vals[mesh.edge_nodes[edge]] = np.sqrt(lam) * phi
    return GraphFunction(mesh, vals)


def concentration_probe(mesh, p, mu, lambdas, threshold=-1e3):
    """Energy of the mass-mu concentration family along a lambda schedule.

    ``scaled`` energies are in units of the kinetic energy of the lambda = 1
    member. The family is flagged unbounded when the energy strictly
    decreases over the last half of the schedule and its scaled value ends
    below ``threshold``.
    """
    fs._check_power(p)
    lambdas = [float(x) for x in lambdas]
    if len(lambdas) < 2 or any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise ProbeError("lambda schedule must be strictly increasing with >= 2 entries")
    if lambdas[0] < 1.0:
        raise ProbeError("lambda schedule must start at >= 1 to keep the bump on one edge")
    if lambdas[-1] * mesh.h > 1.0:
        raise ProbeError(f"lambda * h = {lambdas[-1] * mesh.h:.3g} > 1: refine the mesh")
    base = fs.project_mass(concentration_member(mesh, 1.0), mu)
    unit = fs.energy(base, p).kinetic
    energies = []
    for lam in lambdas:
        f = fs.project_mass(concentration_member(mesh, lam), mu)
        energies.append(fs.energy(f, p).energy)
    scaled = [e / unit for e in energies]
    tail = energies[len(energies) // 2:]
    decreasing = all(b < a for a, b in zip(tail, tail[1:]))
    unbounded = decreasing and scaled[-1] < threshold
    return ProbeEvidence("concentration", float(p), float(mu), lambdas, energies, scaled,
                         decreasing, unbounded, min(energies) < 0)


def spreading_member(mesh, sigma):
    """cos^2 bump in the sup-norm radius |v|_inf / sigma."""
    r = np.max(np.abs(mesh.coords), axis=1) / sigma
    return GraphFunction(mesh, np.where(r < 1.0, np.cos(0.5 * np.pi * r) ** 2, 0.0))


def spreading_probe(mesh, p, mu, sigmas, sign_tol=1e-10):
    fs._check_power(p)
    sigmas = [float(x) for x in sigmas]
    if len(sigmas) < 2 or any(b <= a for a, b in zip(sigmas, sigmas[1:])):
        raise ProbeError("sigma schedule must be strictly increasing with >= 2 entries")
    L = mesh.grid.radius * mesh.grid.edge_length
    if sigmas[-1] > L * (1 + 1e-12):
        raise ProbeError(f"sigma = {sigmas[-1]:g} exceeds the grid radius {L:g}")
    if sigmas[0] <= 0:
        raise ProbeError("sigma must be positive")
    energies = []
    for s in sigmas:
        f = fs.project_mass(spreading_member(mesh, s), mu)
        energies.append(fs.energy(f, p).energy)
    return ProbeEvidence("spreading", float(p), float(mu), sigmas, energies, list(energies),
                         all(b < a for a, b in zip(energies, energies[1:])), False,
                         min(energies) < -sign_tol)


def default_lambdas(mesh, count=8):
    """Geometric schedule from 1 up to lambda * h = 1/2."""
    top = 0.5 / mesh.h
    return list(np.geomspace(1.0, top, count)) if top > 1 else [1.0, 1.0 + 1e-9]


def default_sigmas(mesh, count=6):
    L = mesh.grid.radius * mesh.grid.edge_length
    return list(np.linspace(mesh.grid.edge_length, L, count)) if L > mesh.grid.edge_length \
        else [0.5 * L, L]


@dataclass
class PhasePoint:
    power: float
    mass: float
    best_energy: float
    energy_source: str
    classification: str
    evidence: dict

    def to_dict(self):
        return dict(self.__dict__)


def classify(solver_energy, concentration, spreading, sign_tol):
    """(classification, best energy, source) from the solver and both probes."""
    candidates = [(solver_energy, "minimize")]
    if spreading is not None:
        candidates.append((min(spreading.energies), "spreading_probe"))
    if concentration is not None and not concentration.unbounded:
        candidates.append((min(concentration.energies), "concentration_probe"))
    candidates = [c for c in candidates if c[0] is not None]
    best, source = min(candidates) if candidates else (None, "none")
    if concentration is not None and concentration.unbounded:
        return UNBOUNDED, best, source
    if best is not None and best < -sign_tol:
        return NEGATIVE, best, source
    return NONNEGATIVE, best, source


def phase_diagram(mesh, powers, masses, cfg, lambdas=None, sigmas=None, threshold=-10.0):
    """Classify every (p, mu) cell; failures are stored in the cell, never raised."""
    if not len(powers) or not len(masses):
        raise ValueError("powers and masses must be non-empty")
    lambdas = default_lambdas(mesh) if lambdas is None else lambdas
    sigmas = default_sigmas(mesh) if sigmas is None else sigmas
    points = []
    for p in powers:
        for mu in masses:
            evidence = {"errors": []}
            E = conc = spread = None
            try:
                c = SolverConfig(**{**cfg.to_dict(), "power": float(p), "mass": float(mu)})
                res = minimize(mesh, c)
                E = res.breakdown.energy
                evidence["minimize"] = res.to_dict()
            except Exception as exc:  # a failed cell must not stop the sweep
                evidence["errors"].append(f"minimize: {exc}")
            try:
                conc = concentration_probe(mesh, p, mu, lambdas, threshold)
                evidence["concentration_probe"] = conc.to_dict()
            except Exception as exc:
                evidence["errors"].append(f"concentration_probe: {exc}")
            try:
                spread = spreading_probe(mesh, p, mu, sigmas, cfg.sign_tol)
                evidence["spreading_probe"] = spread.to_dict()
            except Exception as exc:
                evidence["errors"].append(f"spreading_probe: {exc}")
            label, best, source = classify(E, conc, spread, cfg.sign_tol)
            points.append(PhasePoint(float(p), float(mu), best, source, label, evidence))
    return points
