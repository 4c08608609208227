"""End-to-end acceptance checks at desk scale.

Each test prints one PASS/FAIL line (visible with ``pytest -v``) before asserting.
"""
import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from gridnls import families as fam
from gridnls import functions as fs
from gridnls import inequalities as ineq
from gridnls.ground_state import (
    SolverConfig,
    concentration_probe,
    default_lambdas,
    estimate_critical_mass,
    minimize,
)
from conftest import make_mesh
from oracles import continuum_edge_integral, finite_difference_gradient, simpson_energy, \
    simpson_power_integral

TOL = 1e-9


def emit(capsys, name, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


@pytest.fixture(scope="module")
def suite():
    """500 random zero-boundary fields on the d=3, ell=1, R=2, n=8 grid."""
    mesh = make_mesh(dim=3, radius=2, n=8)
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    fields = [fam.random_field(mesh, rng) for _ in range(500)]
    return fields, time.perf_counter() - t0


def test_sobolev_soundness(capsys, suite):
    fields, t_build = suite
    t0 = time.perf_counter()
    reports = [ineq.check_sobolev_3d(f, TOL) for f in fields]
    elapsed = t_build + time.perf_counter() - t0
    violations = sum(r.verdict == ineq.VIOLATED for r in reports)
    worst = max(r.ratio for r in reports if r.verdict != ineq.VACUOUS)
    bound_ok = all(r.provable_bound == 12.0 for r in reports)
    ok = violations == 0 and bound_ok and elapsed < 30
    emit(capsys, "sobolev soundness", ok,
         f"{violations} violations in 500 fields, max ratio {worst:.4g} vs 12, {elapsed:.1f}s")
    assert ok


def test_gn_family_soundness(capsys, suite):
    fields, _ = suite
    plan = [(ineq.Form.GN_1D, [2, 3, 4, 5, 6]),
            (ineq.Form.GN_INFTY, [None]),
            (ineq.Form.GN_3D, [2, 10 / 3, 4, 5, 6]),
            (ineq.Form.GN_CRITICAL, [10 / 3, 4, 5, 6]),
            (ineq.Form.HOLDER_INTERP, [2.5, 10 / 3, 4, 5])]
    violations, checks, worst = 0, 0, {}
    for form, powers in plan:
        for p in powers:
            for f in fields:
                r = ineq.check(form, f, p, TOL)
                checks += 1
                violations += r.verdict == ineq.VIOLATED
                if r.verdict != ineq.VACUOUS:
                    key = form.value
                    worst[key] = max(worst.get(key, 0.0), r.ratio / r.provable_bound)
    bound6 = ineq.check_gn_3d(fields[0], 6.0).provable_bound
    ok = violations == 0 and bound6 == pytest.approx(96.0**4)
    detail = ", ".join(f"{k} {v:.3g}" for k, v in worst.items())
    emit(capsys, "GN family soundness", ok,
         f"{violations} violations in {checks} checks; max ratio/bound: {detail}")
    assert ok


def test_path_estimate_soundness(capsys, suite):
    fields, _ = suite
    reports = [ineq.check_path_estimate(f, n_points=100, seed=i, tol=TOL)
               for i, f in enumerate(fields[:50])]
    violations = sum(r.violations for r in reports)
    points = sum(r.points for r in reports)
    worst = max(r.max_ratio for r in reports)
    ok = violations == 0 and points == 5000
    emit(capsys, "path estimate soundness", ok,
         f"{violations} violations at {points} points, max ratio {worst:.3g}")
    assert ok


def test_gradient_correctness(capsys):
    """Central differences of the energy against the analytic gradient.

    The error is measured as max |fd - g| / max |g| over 25 random free nodes
    per field, which stays meaningful where single entries are near zero.
    """
    mesh = make_mesh(dim=3, radius=2, n=4)
    rng = np.random.default_rng(7)
    free = np.flatnonzero(~mesh.boundary_nodes)
    worst = 0.0
    for _ in range(20):
        f = fam.random_field(mesh, rng)
        for p in (2.5, 4.0, 6.0):
            g = fs.energy_gradient(f, p).values
            idx = rng.choice(free, 25, replace=False)
            fd = finite_difference_gradient(
                lambda v: fs.energy(fs.GraphFunction(mesh, v), p).energy, f.values, idx)
            worst = max(worst, np.abs(fd - g[idx]).max() / np.abs(g).max())
    ok = worst < 1e-6
    emit(capsys, "gradient correctness", ok, f"max relative error {worst:.2e} (60 cases)")
    assert ok


def test_oracle_equivalence(capsys):
    mesh = make_mesh(dim=3, radius=2, n=8)
    worst = 0.0
    for width, centre in ((0.6, (0.0, 0.0, 0.0)), (0.9, (0.3, -0.2, 0.1)), (1.3, (-0.5, 0.4, 0.0))):
        c = np.array(centre)
        f = fs.sample(mesh, lambda x: np.exp(-0.5 * np.sum((x - c) ** 2, axis=1) / width**2))
        for p in (2.0, 2.5, 3.0, 4.0, 6.0):
            got = fs.lp_norm(f, p)
            ref = simpson_power_integral(f, p, 10) ** (1 / p)
            worst = max(worst, abs(got - ref) / ref)
        for p in (2.5, 4.0, 6.0):
            got = fs.energy(f, p).energy
            worst = max(worst, abs(got - simpson_energy(f, p, 10)) / abs(got))

    # second order in h against the continuum integrals of the sampled Gaussian
    w, p = 0.8, 4.0
    rates = []
    errs_v, errs_t = [], []
    for n in (4, 8, 16, 32):
        m = make_mesh(dim=3, radius=1, n=n, boundary="neumann")
        if n == 4:
            exact_v = continuum_edge_integral(m.grid, lambda x, d: math.exp(-0.5 * p * x @ x / w**2))
            exact_t = 0.5 * continuum_edge_integral(
                m.grid, lambda x, d: ((x @ d) / w**2) ** 2 * math.exp(-x @ x / w**2))
        f = fs.sample(m, lambda x: np.exp(-0.5 * np.sum(x**2, axis=1) / w**2))
        errs_v.append(abs(fs.power_integral(f, p) - exact_v))
        errs_t.append(abs(fs.energy(f, p).kinetic - exact_t))
    for errs in (errs_v, errs_t):
        rates += [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    ok = worst < 1e-8 and all(1.8 < r < 2.2 for r in rates)
    emit(capsys, "oracle equivalence", ok,
         f"max relative gap {worst:.2e}; observed orders {', '.join(f'{r:.2f}' for r in rates)}")
    assert ok


def test_negative_energy_for_small_powers(capsys):
    mesh = make_mesh(dim=3, radius=3, n=8, boundary="neumann")
    t0 = time.perf_counter()
    cells = {}
    for p in (2.5, 3.0):
        for mu in (0.5, 1.0, 2.0):
            cells[(p, mu)] = minimize(mesh, SolverConfig(p, mu)).breakdown.energy
    elapsed = time.perf_counter() - t0
    ok = all(e < 0 for e in cells.values()) and elapsed < 300
    emit(capsys, "negative energy for p < 10/3", ok,
         f"max E {max(cells.values()):.4g} over 6 cells (neumann R=3 n=8), {elapsed:.1f}s")
    assert ok


def test_small_mass_nonnegative(capsys):
    mesh = make_mesh(dim=3, radius=3, n=8)
    energies, anomalies = {}, []
    for p in (4.0, 5.0):
        res = minimize(mesh, SolverConfig(p, 0.01))
        energies[p] = res.breakdown.energy
        anomalies += res.anomalies
    ok = all(e >= -1e-10 for e in energies.values()) and not anomalies
    emit(capsys, "small-mass nonnegativity", ok,
         f"E(p=4) {energies[4.0]:.3e}, E(p=5) {energies[5.0]:.3e} (dirichlet R=3 n=8), "
         f"{len(anomalies)} consistency anomalies")
    assert ok


def test_critical_mass_crossover(capsys):
    mesh = make_mesh(dim=3, radius=3, n=8)
    tol = 1e-3
    runs = [estimate_critical_mass(mesh, 4.0, (8.0, 32.0), tol, SolverConfig(4.0, 1.0, seed=s))
            for s in (0, 1)]
    flips = []
    for r in runs:
        by_mass = {h["mass"]: h["energy"] for h in r.history}
        lo, hi = r.bracket
        flips.append(by_mass[lo] >= -1e-10 and by_mass[hi] < -1e-10)
    spread = abs(runs[0].estimate - runs[1].estimate)
    ok = all(flips) and spread <= 2 * tol and all(r.bracket[1] - r.bracket[0] < tol for r in runs)
    emit(capsys, "critical mass crossover", ok,
         f"mu_4 = {runs[0].estimate:.5f} / {runs[1].estimate:.5f} (seeds 0/1), "
         f"spread {spread:.1e}, predicate flips {flips}")
    assert ok


def test_unboundedness_trend(capsys):
    mesh = make_mesh(dim=3, radius=2, n=64)
    lambdas = default_lambdas(mesh, 10)
    sup = concentration_probe(mesh, 7.0, 2.0, lambdas)
    sub = concentration_probe(mesh, 4.0, 0.01, lambdas)
    ok = (lambdas[-1] * mesh.h == pytest.approx(0.5) and sup.decreasing_tail
          and sup.scaled[-1] < -1e3 and min(sub.energies) >= 0)
    emit(capsys, "unboundedness trend", ok,
         f"p=7 scaled energy {sup.scaled[-1]:.4g} (tail decreasing: {sup.decreasing_tail}); "
         f"p=4 mu=0.01 min E {min(sub.energies):.3g}")
    assert ok


def test_phase_diagram_determinism(capsys, tmp_path):
    args = ["phase-diagram", "--radius", "2", "--n", "4", "--p", "3,4,7", "--mu", "0.5,20",
            "--seed", "11"]
    docs, raw = [], []
    for k in range(2):
        out = tmp_path / f"pd{k}.json"
        subprocess.run([sys.executable, "-m", "gridnls", *args, "--output", str(out)],
                       check=True, capture_output=True)
        doc = json.loads(out.read_text())
        doc.pop("timestamp")
        docs.append(json.dumps(doc, indent=2))
        out2 = tmp_path / f"pd{k}-nt.json"
        subprocess.run([sys.executable, "-m", "gridnls", *args, "--no-timestamp",
                        "--output", str(out2)], check=True, capture_output=True)
        raw.append(out2.read_bytes())
    ok = docs[0] == docs[1] and raw[0] == raw[1]
    emit(capsys, "phase diagram determinism", ok,
         f"two runs byte-identical: {raw[0] == raw[1]} ({len(raw[0])} bytes)")
    assert ok
