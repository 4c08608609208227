"""Command-line front end: ``gridnls <subcommand> [options]``.

Exit status: 0 on success, 1 when an inequality is violated or the solver
reports an anomaly, 2 on usage or I/O errors. JSON goes to standard output
unless ``--output`` names a file; the one-line summary goes to stderr.
"""
import argparse
import datetime
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from types import SimpleNamespace

import numpy as np

from . import __version__
from . import families as fam
from . import functions as fs
from . import inequalities as ineq
from . import io
from ._backend import BACKEND
from .constants import FAMILIES, AscentConfig, ConstantError, estimate_constant
from .grid import Boundary, GridError, GridSpec, build_grid, validate
from .ground_state import (
    CriticalMassError,
    SolverConfig,
    concentration_probe,
    default_lambdas,
    default_sigmas,
    estimate_critical_mass,
    minimize,
    phase_diagram,
    spreading_probe,
)

log = logging.getLogger("gridnls")

SUBCOMMANDS = ("build-grid", "check-inequalities", "estimate-constants",
               "ground-state", "phase-diagram", "probe")

FORM_ALIASES = {
    "sobolev1d": ineq.Form.SOBOLEV_1D,
    "sobolev2d": ineq.Form.SOBOLEV_2D,
    "sobolev3d": ineq.Form.SOBOLEV_3D,
    "gn1d": ineq.Form.GN_1D,
    "gninf": ineq.Form.GN_INFTY,
    "gn3d": ineq.Form.GN_3D,
    "gncrit": ineq.Form.GN_CRITICAL,
    "holder": ineq.Form.HOLDER_INTERP,
    "path": "PATH_ESTIMATE",
}

DEFAULT_INEQUALITY_POWERS = (10 / 3, 4.0, 5.0, 6.0)
MINIMISATION = ("ground-state", "phase-diagram", "probe")

SOLVER_FIELDS = ("init", "metric", "step", "backtrack", "max_iter", "energy_tol",
                 "grad_tol", "multistart", "sign_tol", "stall_iter")


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class RunConfig:
    subcommand: str
    dim: int = 3
    radius: int = 2
    ell: float = 1.0
    boundary: str = None  # neumann for minimisation, dirichlet for inequality work
    n: int = 8
    forms: list = field(default_factory=lambda: ["sobolev3d", "gn1d", "gninf", "gn3d",
                                                  "gncrit", "holder", "path"])
    p: list = field(default_factory=list)
    mu: list = field(default_factory=list)
    seed: int = 0
    samples: int = 50
    points: int = 100
    family: str = "gaussian"
    starts: int = 4
    simplex_evals: int = 150
    node_steps: int = 0
    init: str = "mixed"
    init_file: str = None
    metric: str = "h1"
    step: float = 0.5
    backtrack: float = 0.5
    max_iter: int = 20000
    energy_tol: float = 1e-12
    grad_tol: float = 1e-5
    multistart: int = 9
    sign_tol: float = 1e-10
    stall_iter: int = 200
    probe: str = "both"
    lambdas: list = None
    sigmas: list = None
    threshold: float = None
    critical_bracket: list = None
    critical_tol: float = 1e-3
    save_minimizer: str = None
    output: str = None
    format: str = "json"
    no_timestamp: bool = False
    inject_violation: bool = False

    def grid_spec(self):
        return GridSpec(self.dim, self.ell, self.radius, self.boundary)

    def solver(self, p, mu):
        return SolverConfig(power=p, mass=mu, seed=self.seed, init_file=self.init_file,
                            **{k: getattr(self, k) for k in SOLVER_FIELDS})

    def public(self):
        out = asdict(self)
        for k in ("output", "no_timestamp", "inject_violation"):
            out.pop(k)
        return out


FIELD_NAMES = {f.name for f in fields(RunConfig)}
LIST_FIELDS = {"forms", "p", "mu", "lambdas", "sigmas", "critical_bracket"}


def _floats(text):
    """Comma list of numbers; fractions such as 10/3 are allowed."""
    try:
        return [float(Fraction(x.strip())) for x in str(text).split(",") if x.strip()]
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _words(text):
    return [x.strip() for x in str(text).split(",") if x.strip()]


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gridnls",
        description="NLS ground states and functional inequalities on grid graphs.",
    )
    parser.add_argument("--version", action="version", version=f"gridnls {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    def common(p):
        S = argparse.SUPPRESS
        g = p.add_argument_group("grid")
        g.add_argument("--dim", type=int, default=S, help="grid dimension 1-3 (default 3)")
        g.add_argument("--radius", type=int, default=S,
                       help="lattice radius R, indices -R..R per axis (default 2)")
        g.add_argument("--ell", type=float, default=S, help="edge length (default 1)")
        g.add_argument("--boundary", choices=[b.value for b in Boundary], default=S,
                       help="truncation boundary (default: neumann for ground-state, "
                            "phase-diagram and probe; dirichlet otherwise)")
        g.add_argument("--n", type=int, default=S, help="mesh intervals per edge (default 8)")
        o = p.add_argument_group("run")
        o.add_argument("--config", default=S, help="JSON file with option values; flags win")
        o.add_argument("--seed", type=int, default=S,
                       help="random seed (default: $GRIDNLS_SEED, else 0)")
        o.add_argument("--output", "-o", default=S, help="output file (default stdout)")
        o.add_argument("--format", choices=["json", "csv"], default=S, help="output format")
        o.add_argument("--no-timestamp", action="store_true", default=S, dest="no_timestamp",
                       help="omit the timestamp so identical runs give identical bytes")
        o.add_argument("-v", "--verbose", action="count", default=0)
        return p

    def powers(p, help_):
        p.add_argument("--p", type=_floats, default=argparse.SUPPRESS, help=help_)

    def solver(p):
        S = argparse.SUPPRESS
        g = p.add_argument_group("solver")
        g.add_argument("--mu", type=_floats, default=S, help="comma-separated masses")
        g.add_argument("--init", choices=["gaussian", "random", "edge", "mixed", "file"], default=S)
        g.add_argument("--init-file", dest="init_file", default=S)
        g.add_argument("--metric", choices=["h1", "l2"], default=S,
                       help="descent metric (default h1)")
        g.add_argument("--step", type=float, default=S)
        g.add_argument("--backtrack", type=float, default=S)
        g.add_argument("--max-iter", dest="max_iter", type=int, default=S)
        g.add_argument("--energy-tol", dest="energy_tol", type=float, default=S)
        g.add_argument("--grad-tol", dest="grad_tol", type=float, default=S)
        g.add_argument("--multistart", type=int, default=S)
        g.add_argument("--stall-iter", dest="stall_iter", type=int, default=S,
                       help="stop a start after this many steps without energy progress")
        g.add_argument("--sign-tol", dest="sign_tol", type=float, default=S,
                       help="energies below -sign_tol count as negative (default 1e-10)")

    p = common(sub.add_parser("build-grid", help="construct and validate a grid"))

    p = common(sub.add_parser("check-inequalities", help="verify inequalities on random fields"))
    p.add_argument("--forms", type=_words, default=argparse.SUPPRESS,
                   help="comma list of: " + ",".join(FORM_ALIASES))
    powers(p, "powers for p-dependent forms (default 10/3,4,5,6)")
    p.add_argument("--samples", type=int, default=argparse.SUPPRESS,
                   help="random zero-boundary fields (default 50)")
    p.add_argument("--points", type=int, default=argparse.SUPPRESS,
                   help="path-estimate points per field (default 100)")
    p.add_argument("--inject-violation", action="store_true", default=argparse.SUPPRESS,
                   dest="inject_violation", help=argparse.SUPPRESS)

    p = common(sub.add_parser("estimate-constants", help="empirical lower bounds for constants"))
    p.add_argument("--forms", type=_words, default=argparse.SUPPRESS)
    powers(p, "powers for p-dependent forms")
    p.add_argument("--family", choices=FAMILIES, default=argparse.SUPPRESS)
    p.add_argument("--starts", type=int, default=argparse.SUPPRESS)
    p.add_argument("--simplex-evals", dest="simplex_evals", type=int, default=argparse.SUPPRESS)
    p.add_argument("--node-steps", dest="node_steps", type=int, default=argparse.SUPPRESS)

    p = common(sub.add_parser("ground-state", help="mass-constrained energy minimisation"))
    powers(p, "comma-separated powers p > 2")
    solver(p)
    p.add_argument("--save-minimizer", dest="save_minimizer", default=argparse.SUPPRESS,
                   help="write the minimiser as GraphFunction JSON (single p and mu only)")

    p = common(sub.add_parser("phase-diagram", help="classify a (p, mu) grid"))
    powers(p, "comma-separated powers p > 2")
    solver(p)
    p.add_argument("--lambdas", type=_floats, default=argparse.SUPPRESS)
    p.add_argument("--sigmas", type=_floats, default=argparse.SUPPRESS)
    p.add_argument("--threshold", type=float, default=argparse.SUPPRESS,
                   help="scaled-energy level for the unboundedness verdict (default -10)")
    p.add_argument("--critical-bracket", dest="critical_bracket", type=_floats,
                   default=argparse.SUPPRESS, help="lo,hi: also bisect for the critical mass")
    p.add_argument("--critical-tol", dest="critical_tol", type=float, default=argparse.SUPPRESS)

    p = common(sub.add_parser("probe", help="concentration and spreading probes"))
    powers(p, "comma-separated powers p > 2")
    p.add_argument("--mu", type=_floats, default=argparse.SUPPRESS)
    p.add_argument("--probe", choices=["concentration", "spreading", "both"],
                   default=argparse.SUPPRESS)
    p.add_argument("--lambdas", type=_floats, default=argparse.SUPPRESS)
    p.add_argument("--sigmas", type=_floats, default=argparse.SUPPRESS)
    p.add_argument("--threshold", type=float, default=argparse.SUPPRESS,
                   help="scaled-energy level for the unboundedness verdict (default -1000)")
    return parser


def _load_file(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"cannot read config file {path}: {exc}"])
    if not isinstance(doc, dict):
        raise ConfigError([f"config file {path} must hold a JSON object"])
    return doc


def parse_config(argv=None, environ=None):
    """Merge defaults, an optional --config file and flags into a RunConfig."""
    environ = os.environ if environ is None else environ
    parser = build_parser()
    ns = vars(parser.parse_args(argv))
    verbose = ns.pop("verbose", 0)
    sub = ns.pop("subcommand")
    if sub is None:
        parser.print_usage(sys.stderr)
        raise ConfigError(["a subcommand is required: " + ", ".join(SUBCOMMANDS)])

    problems = []
    values = {}
    if environ.get("GRIDNLS_SEED"):
        try:
            values["seed"] = int(environ["GRIDNLS_SEED"])
        except ValueError:
            problems.append(f"GRIDNLS_SEED must be an integer (got {environ['GRIDNLS_SEED']!r})")
    if "config" in ns:
        doc = _load_file(ns.pop("config"))
        for k, v in doc.items():
            key = k.replace("-", "_")
            if key not in FIELD_NAMES or key == "subcommand":
                problems.append(f"unknown config key {k!r}")
                continue
            if key in LIST_FIELDS and isinstance(v, (str, int, float)):
                try:
                    v = _words(v) if key == "forms" else _floats(v)
                except argparse.ArgumentTypeError as exc:
                    problems.append(f"{key}: {exc}")
                    continue
            values[key] = v
    values.update(ns)

    cfg = RunConfig(sub)
    for k, v in values.items():
        setattr(cfg, k, v)
    if cfg.boundary is None:
        cfg.boundary = "neumann" if sub in MINIMISATION else "dirichlet"
    if not cfg.p and sub in ("check-inequalities", "estimate-constants"):
        cfg.p = list(DEFAULT_INEQUALITY_POWERS)
    problems.extend(_validate(cfg))
    if problems:
        raise ConfigError(problems)
    cfg._verbose = verbose
    return cfg


def _is_int(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float, np.number)) and not isinstance(v, bool) and np.isfinite(v)


def _validate(cfg):
    out = []
    for name in ("dim", "radius", "n", "seed", "samples", "points", "starts", "simplex_evals",
                 "node_steps", "max_iter", "multistart", "stall_iter"):
        if not _is_int(getattr(cfg, name)):
            out.append(f"{name} must be an integer (got {getattr(cfg, name)!r})")
    for name in ("ell", "step", "backtrack", "energy_tol", "grad_tol", "sign_tol", "critical_tol"):
        if not _is_num(getattr(cfg, name)):
            out.append(f"{name} must be a number (got {getattr(cfg, name)!r})")
    for name in LIST_FIELDS:
        v = getattr(cfg, name)
        if v is None:
            continue
        if not isinstance(v, list):
            out.append(f"{name} must be a list")
        elif name != "forms" and not all(_is_num(x) for x in v):
            out.append(f"{name} must hold numbers")
    if out:
        return out

    try:
        GridSpec(cfg.dim, float(cfg.ell), cfg.radius, cfg.boundary)
    except (GridError, ValueError) as exc:
        out.append(str(exc))
    if cfg.n < 1:
        out.append("n must be >= 1")
    if cfg.format not in ("json", "csv"):
        out.append(f"format must be json or csv (got {cfg.format!r})")
    if cfg.seed < 0:
        out.append("seed must be >= 0")
    for target in (cfg.output, cfg.save_minimizer):
        if target and not os.path.isdir(os.path.dirname(os.path.abspath(target))):
            out.append(f"output directory for {target} does not exist")

    sub = cfg.subcommand
    if sub in ("check-inequalities", "estimate-constants"):
        bad = [f for f in cfg.forms if f not in FORM_ALIASES]
        if bad:
            out.append(f"unknown forms {bad}; choose from {', '.join(FORM_ALIASES)}")
        if sub == "estimate-constants" and "path" in cfg.forms:
            out.append("the path estimate has no constant to estimate")
        forms = [FORM_ALIASES[f] for f in cfg.forms if f in FORM_ALIASES]
        out.extend(_form_problems(cfg, forms))
        if cfg.samples < 1 or cfg.points < 1 or cfg.starts < 1:
            out.append("samples, points and starts must be >= 1")
        if cfg.family not in FAMILIES:
            out.append(f"unknown family {cfg.family!r}")
    if sub in ("ground-state", "phase-diagram", "probe"):
        if not cfg.p:
            out.append("at least one power --p is required")
        for p in cfg.p:
            if not p > 2:
                out.append(f"p must exceed 2 (got {p:g})")
        if not cfg.mu:
            out.append("at least one mass --mu is required")
        for mu in cfg.mu:
            if not mu > 0:
                out.append(f"mu must be positive (got {mu:g})")
    if sub in ("ground-state", "phase-diagram"):
        shadow = SimpleNamespace(power=3.0, mass=1.0, grow=SolverConfig.grow,
                                 init_file=cfg.init_file,
                                 **{k: getattr(cfg, k) for k in SOLVER_FIELDS})
        out.extend(SolverConfig.problems(shadow))
        if cfg.save_minimizer and (len(cfg.p) != 1 or len(cfg.mu) != 1):
            out.append("--save-minimizer needs exactly one p and one mu")
    if sub == "phase-diagram" and cfg.critical_bracket is not None:
        if len(cfg.critical_bracket) != 2 or not 0 < cfg.critical_bracket[0] < cfg.critical_bracket[1]:
            out.append("critical bracket must be lo,hi with 0 < lo < hi")
    if sub == "probe" and cfg.probe not in ("concentration", "spreading", "both"):
        out.append(f"unknown probe {cfg.probe!r}")
    return out


def _in_range(form, p, dim):
    lo_c, hi_c = ineq.critical_range(dim)
    return {
        ineq.Form.GN_1D: p >= 2,
        ineq.Form.GN_3D: 2 <= p <= 6,
        ineq.Form.GN_CRITICAL: lo_c - 1e-12 <= p <= hi_c,
        ineq.Form.HOLDER_INTERP: 2 < p < 6,
    }[form]


def _form_problems(cfg, forms):
    """Dimension mismatches, and p-dependent forms with no admissible power."""
    out = []
    needs_p = [f for f in forms if f not in ineq.P_FREE and f != "PATH_ESTIMATE"]
    if needs_p and not cfg.p:
        out.append("p-dependent forms need at least one --p")
    for f in forms:
        dim_need = {ineq.Form.SOBOLEV_2D: 2, ineq.Form.SOBOLEV_3D: 3, ineq.Form.GN_3D: 3,
                    "PATH_ESTIMATE": 3}.get(f)
        if dim_need and cfg.dim != dim_need:
            out.append(f"{getattr(f, 'value', f)} needs --dim {dim_need}")
        if f in needs_p and cfg.p and not any(_in_range(f, p, cfg.dim) for p in cfg.p):
            out.append(f"no power in {cfg.p} lies in the range of {f.value}")
    return out


# ---------------------------------------------------------------- commands


def _mesh(cfg):
    return fs.build_mesh(build_grid(cfg.grid_spec()), cfg.n)


def _powers_for(form, cfg):
    """Powers to test for a form; out-of-range powers are skipped, not errors."""
    if form in ineq.P_FREE:
        return [None]
    return [p for p in cfg.p if _in_range(form, p, cfg.dim)]


def cmd_build_grid(cfg):
    grid = build_grid(cfg.grid_spec())
    report = validate(grid)
    doc = {"grid": io.grid_to_dict(grid), "validation": report.checks}
    rows = []
    for a, per_axis in enumerate(grid.lines):
        for li, line in enumerate(per_axis):
            for pos, e in enumerate(line):
                rows.append({"edge": int(e), "tail": int(grid.edges[e, 0]),
                             "head": int(grid.edges[e, 1]), "axis": a, "line": li,
                             "position": pos})
    rows.sort(key=lambda r: r["edge"])
    csv_text = io.rows_to_csv(["edge", "tail", "head", "axis", "line", "position"], rows)
    status = 0 if report.ok else 1
    summary = (f"grid d={grid.dimension} R={grid.radius}: {grid.n_vertices} vertices, "
               f"{grid.n_edges} edges, validation {'ok' if report.ok else 'FAILED'}")
    return doc, csv_text, status, summary


REPORT_COLUMNS = ["field", "form", "power", "left", "right", "ratio", "provable_bound", "verdict"]


def cmd_check_inequalities(cfg):
    mesh = _mesh(cfg)
    rng = np.random.default_rng(cfg.seed)
    forms = [FORM_ALIASES[f] for f in cfg.forms]
    reports, paths = [], []
    for i in range(cfg.samples):
        f = fam.random_field(mesh, rng)
        for form in forms:
            if form == "PATH_ESTIMATE":
                pr = ineq.check_path_estimate(f, n_points=cfg.points, seed=cfg.seed * 100003 + i)
                paths.append({"field": i, **pr.to_dict()})
                continue
            for p in _powers_for(form, cfg):
                rep = ineq.check(form, f, p)
                reports.append({"field": i, **rep.to_dict()})
    if cfg.inject_violation:
        fake = ineq.make_report(ineq.Form.SOBOLEV_3D, 1.5, 1.0, 1e-3, 12.0)
        reports.append({"field": -1, **fake.to_dict(), "injected": True})

    summary = {}
    for r in reports:
        key = f"{r['form']}" + ("" if r["power"] is None else f"@p={r['power']:.6g}")
        s = summary.setdefault(key, {"form": r["form"], "power": r["power"], "checks": 0,
                                     "violations": 0, "vacuous": 0, "max_ratio": 0.0,
                                     "provable_bound": r["provable_bound"]})
        s["checks"] += 1
        s["violations"] += r["verdict"] == ineq.VIOLATED
        s["vacuous"] += r["verdict"] == ineq.VACUOUS
        ratio = r["ratio"] if isinstance(r["ratio"], float) else float("inf")
        if r["verdict"] != ineq.VACUOUS:
            s["max_ratio"] = max(s["max_ratio"], ratio)
    if paths:
        summary["PATH_ESTIMATE"] = {
            "form": "PATH_ESTIMATE", "points": sum(p["points"] for p in paths),
            "violations": sum(p["violations"] for p in paths),
            "max_ratio": max(p["max_ratio"] for p in paths), "provable_bound": 1.0,
        }
    violations = sum(s["violations"] for s in summary.values())
    doc = {"summary": summary, "reports": reports, "path_estimates": paths}
    csv_text = io.rows_to_csv(REPORT_COLUMNS, reports)
    line = (f"{len(reports)} checks on {cfg.samples} fields"
            + (f", {sum(p['points'] for p in paths)} path points" if paths else "")
            + f": {violations} violations")
    return doc, csv_text, (1 if violations else 0), line


def cmd_estimate_constants(cfg):
    mesh = _mesh(cfg)
    asc = AscentConfig(cfg.starts, cfg.simplex_evals, cfg.node_steps)
    rows = []
    for name in cfg.forms:
        form = FORM_ALIASES[name]
        for p in _powers_for(form, cfg):
            est = estimate_constant(mesh, form, p, cfg.family, asc, cfg.seed)
            rows.append(est.to_dict())
    above = [r for r in rows if r["provable_bound"] is not None
             and r["best_ratio"] > r["provable_bound"] * (1 + ineq.TOL)]
    doc = {"estimates": rows}
    csv_text = io.rows_to_csv(["form", "power", "family", "best_ratio", "provable_bound",
                               "evaluations"], rows)
    line = f"{len(rows)} constant estimates ({cfg.family}), {len(above)} above proven bounds"
    return doc, csv_text, (1 if above else 0), line


def cmd_ground_state(cfg):
    mesh = _mesh(cfg)
    rows, anomalies = [], 0
    saved = None
    for p in cfg.p:
        for mu in cfg.mu:
            res = minimize(mesh, cfg.solver(p, mu))
            rows.append({"p": p, "mu": mu, **res.to_dict()})
            anomalies += len(res.anomalies)
            saved = res.minimizer
    if cfg.save_minimizer:
        io.write_atomic(cfg.save_minimizer, io.dumps(io.function_to_dict(saved)))
    flat = [{"p": r["p"], "mu": r["mu"], "energy": r["breakdown"]["energy"],
             "kinetic": r["breakdown"]["kinetic"], "potential": r["breakdown"]["potential"],
             "iterations": r["iterations"], "converged": r["converged"],
             "grad_norm": r["grad_norm"]} for r in rows]
    csv_text = io.rows_to_csv(list(flat[0]), flat)
    line = (f"{len(rows)} minimisations, {sum(r['converged'] for r in rows)} converged, "
            f"{anomalies} anomalies")
    return {"results": rows}, csv_text, (1 if anomalies else 0), line


def cmd_phase_diagram(cfg):
    mesh = _mesh(cfg)
    solver = cfg.solver(cfg.p[0], cfg.mu[0])
    threshold = -10.0 if cfg.threshold is None else cfg.threshold
    points = phase_diagram(mesh, cfg.p, cfg.mu, solver, cfg.lambdas, cfg.sigmas, threshold)
    doc = {"points": [pt.to_dict() for pt in points]}
    anomalies = sum(len(pt.evidence.get("minimize", {}).get("anomalies", []))
                    + len(pt.evidence["errors"]) for pt in points)
    if cfg.critical_bracket is not None:
        crit = []
        for p in cfg.p:
            try:
                est = estimate_critical_mass(mesh, p, cfg.critical_bracket, cfg.critical_tol,
                                             cfg.solver(p, 1.0))
                crit.append(est.to_dict())
                anomalies += len(est.anomalies)
            except CriticalMassError as exc:
                crit.append({"power": p, "error": str(exc)})
        doc["critical_masses"] = crit
    rows = [{"p": pt.power, "mu": pt.mass, "best_E": pt.best_energy,
             "classification": pt.classification} for pt in points]
    csv_text = io.rows_to_csv(["p", "mu", "best_E", "classification"], rows)
    counts = {}
    for pt in points:
        counts[pt.classification] = counts.get(pt.classification, 0) + 1
    line = f"{len(points)} cells: " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items()))
    return doc, csv_text, (1 if anomalies else 0), line


def cmd_probe(cfg):
    mesh = _mesh(cfg)
    threshold = -1e3 if cfg.threshold is None else cfg.threshold
    rows, flat = [], []
    for p in cfg.p:
        for mu in cfg.mu:
            if cfg.probe in ("concentration", "both"):
                lam = cfg.lambdas or default_lambdas(mesh)
                ev = concentration_probe(mesh, p, mu, lam, threshold)
                rows.append(ev.to_dict())
            if cfg.probe in ("spreading", "both"):
                sig = cfg.sigmas or default_sigmas(mesh)
                ev = spreading_probe(mesh, p, mu, sig, cfg.sign_tol)
                rows.append(ev.to_dict())
    for r in rows:
        for par, e, s in zip(r["parameters"], r["energies"], r["scaled"]):
            flat.append({"kind": r["kind"], "p": r["power"], "mu": r["mass"],
                         "parameter": par, "energy": e, "scaled": s})
    csv_text = io.rows_to_csv(["kind", "p", "mu", "parameter", "energy", "scaled"], flat)
    line = f"{len(rows)} probes, {sum(r['unbounded'] for r in rows)} flagged unbounded"
    return {"probes": rows}, csv_text, 0, line


COMMANDS = {
    "build-grid": cmd_build_grid,
    "check-inequalities": cmd_check_inequalities,
    "estimate-constants": cmd_estimate_constants,
    "ground-state": cmd_ground_state,
    "phase-diagram": cmd_phase_diagram,
    "probe": cmd_probe,
}


def run(cfg, stdout=None):
    """Execute a validated RunConfig; returns the process exit code."""
    stdout = sys.stdout if stdout is None else stdout
    t0 = time.perf_counter()
    try:
        body, csv_text, status, line = COMMANDS[cfg.subcommand](cfg)
    except (ConstantError, CriticalMassError, GridError, ValueError) as exc:
        print(f"gridnls: error: {exc}", file=sys.stderr)
        return 2
    if cfg.format == "csv":
        text = csv_text
    else:
        doc = {"schema_version": io.SCHEMA_VERSION, "kind": cfg.subcommand,
               "config": cfg.public(), "backend": BACKEND, **body}
        if not cfg.no_timestamp:
            doc["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        text = io.dumps(doc)
    try:
        if cfg.output:
            io.write_atomic(cfg.output, text)
        else:
            stdout.write(text)
            stdout.flush()
    except OSError as exc:
        print(f"gridnls: cannot write output: {exc}", file=sys.stderr)
        return 2
    print(f"{cfg.subcommand}: {line} [{time.perf_counter() - t0:.1f}s]", file=sys.stderr)
    return status


def main(argv=None):
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"gridnls: error: {p}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.WARNING - 10 * min(getattr(cfg, "_verbose", 0), 2),
                        format="%(levelname)s %(name)s: %(message)s")
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
