"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (the summary lines are
collected at the end of the session), or ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from cascade_fpe import HarmonicMonomial, LogNormalDensity, RadialPower, solve
from cascade_fpe.harmonics import degeneracy
from cascade_fpe.kernels import (
    dilate,
    gauss_hermite,
    gaussian_log_average,
    gaussian_log_average_reflected,
    log_average_operator,
)
from cascade_fpe.oracle import (
    compare_with_exact,
    exponent_identity,
    harmonic_dimension,
    mc_simulate,
    radial_moment,
    residual_check,
)
from cascade_fpe.solvers import solve_isotropic

from .helpers import ACCEPTANCE_LINES, cli_cases, golden_mismatches, make_coeffs, random_points, run_cli

VARIABLE_A = "1 + 0.5*sin(lambda)"
VARIABLE_C = "0.2*exp(-lambda)"


def report(number: int, title: str, passed: bool, elapsed: float, budget: float | None, detail: str) -> None:
    ok = passed and (budget is None or elapsed < budget)
    limit = f" (budget {budget:g} s)" if budget is not None else ""
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  [{elapsed:.2f} s{limit}]  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line
    if budget is not None:
        assert elapsed < budget, line


def on_axis(r, n):
    r = np.asarray(r, dtype=float)
    pts = np.zeros(r.shape + (n,))
    pts[..., 0] = r
    return pts


# -- criterion 1 -----------------------------------------------------------------

EIGEN_CASES = [("degenerate", 1), ("degenerate", 2), ("degenerate", 3), ("isotropic", 2), ("isotropic", 3)]


def eigen_errors(a, c, beta_of, rng) -> float:
    """Worst relative error of the solver against the radial-power closed form."""
    worst = 0.0
    for variant, n in EIGEN_CASES:
        coeffs = make_coeffs(variant, n, a, c, lambda_max=1.0)
        pts = random_points(rng, n, 24)
        for p in (0.5, 1.0, 2.0):
            mu = p * p if variant == "degenerate" else p * (p + n - 2)
            for lam in (0.1, 0.5, 1.0):
                b0, b1, g = beta_of(variant, n, lam, coeffs)
                exact = math.exp(b0 + p * b1 + g * mu) * np.linalg.norm(pts, axis=1) ** p
                got = solve(coeffs, RadialPower(p), lam, pts)
                worst = max(worst, float(np.max(np.abs(got / exact - 1))))
    return worst


def constant_betas(variant, n, lam, coeffs):
    a, c = 1.0, 0.5
    if variant == "isotropic":
        return n * (a + 2 * c) * lam, (a + 4 * c) * lam, c * lam
    return (n * a + (n * n + n) * c) * lam, (a + (2 * n + 1) * c) * lam, c * lam


def test_criterion_1_eigenfunction_closed_forms(rng):
    t0 = time.perf_counter()
    worst = eigen_errors(1.0, 0.5, constant_betas, rng)
    report(1, "radial-power closed forms", worst <= 1e-10, time.perf_counter() - t0, 1.0,
           f"max rel err {worst:.2e} <= 1e-10")


# -- criterion 2 -----------------------------------------------------------------

def test_criterion_2_spectral_sign(rng):
    t0 = time.perf_counter()
    coeffs = make_coeffs("isotropic", 3, 1.0, 0.5, lambda_max=1.0)
    ic = HarmonicMonomial(1.0, 1, 2, 3)  # Y_1^0 |v|
    lams = rng.uniform(0.1, 0.9, 50)
    pts = random_points(rng, 3, 50, 0.5, 2.0)

    def evaluator(sign):
        return lambda lam, v: solve_isotropic(coeffs, ic, lam, v, spectral_sign=sign)

    good = residual_check(evaluator(1), coeffs, lams, pts)
    bad = residual_check(evaluator(-1), coeffs, lams, pts)
    passed = good.order >= 1.7 and bad.order < 0.5 and bad.relative_max > 1e-2
    report(2, "spectral sign e^{+gamma lambda_l}", passed, time.perf_counter() - t0, 10.0,
           f"order(+)={good.order:.3f} >= 1.7; order(-)={bad.order:.3f} < 0.5 "
           f"with relative residual {bad.relative_max:.2f}")


# -- criterion 3 -----------------------------------------------------------------

def test_criterion_3_degeneracy_oracle():
    t0 = time.perf_counter()
    mismatches = [(l, n) for n in range(2, 7) for l in range(9) if degeneracy(l, n) != harmonic_dimension(l, n)]
    odd = all(degeneracy(l, 3) == 2 * l + 1 for l in range(9))
    report(3, "degeneracy vs brute-force kernel dimension", not mismatches and odd, time.perf_counter() - t0, 30.0,
           f"{45 - len(mismatches)}/45 (l, n) pairs agree; d(l,3)=2l+1: {odd}")


# -- criterion 4 -----------------------------------------------------------------

def mass_errors(a, c) -> tuple[float, float]:
    worst, ident = 0.0, 0.0
    for variant, n in (("degenerate", 1), ("isotropic", 3)):
        coeffs = make_coeffs(variant, n, a, c, lambda_max=1.0)
        ic = LogNormalDensity(n, 0.0, 1.0)
        for lam in (0.1, 0.5, 1.0):
            mass = radial_moment(lambda r: solve(coeffs, ic, lam, on_axis(r, n)), n)
            worst = max(worst, abs(mass - 1.0))
            ident = max(ident, abs(exponent_identity(coeffs, lam)))
    return worst, ident


def test_criterion_4_mass_conservation():
    t0 = time.perf_counter()
    worst, ident = mass_errors(1.0, 0.25)
    report(4, "mass conservation", worst <= 1e-8, time.perf_counter() - t0, 5.0,
           f"max |mass-1| {worst:.2e} <= 1e-8; exponent identity {ident:.1e}")


# -- criterion 5 -----------------------------------------------------------------

def mol_gaps(a, c):
    out = []
    for variant, n in (("degenerate", 1), ("isotropic", 2)):
        coeffs = make_coeffs(variant, n, a, c, lambda_max=1.0)
        cmp = compare_with_exact(coeffs, LogNormalDensity(n, 0.0, 1.0), 0.5, h=0.02, levels=2)
        out.append((f"{variant[:3]} n={n}", cmp))
    return out


def test_criterion_5_method_of_lines():
    t0 = time.perf_counter()
    results = mol_gaps(1.0, 0.25)
    passed = all(r.gap <= 1e-4 and r.order >= 1.8 for _, r in results)
    detail = "; ".join(f"{name}: gap {r.gap:.1e}, order {r.order:.2f}" for name, r in results)
    report(5, "method-of-lines cross-check", passed, time.perf_counter() - t0, 60.0, detail)


# -- criterion 6 -----------------------------------------------------------------

def test_criterion_6_monte_carlo():
    t0 = time.perf_counter()
    lam = 0.5
    coeffs = make_coeffs("degenerate", 3, 1.0, 0.1, lambda_max=lam)
    ic = LogNormalDensity(3, 0.0, 0.5)
    counts = {}
    for q in (1, 2):
        exact = radial_moment(lambda r: solve(coeffs, ic, lam, on_axis(r, 3)), 3, q)
        hits = 0
        for seed in range(20):
            est = mc_simulate(coeffs, ic, lambda v, q=q: np.linalg.norm(v, axis=1) ** q, lam, 100_000, seed,
                              steps=10, method="exact")
            hits += abs(est.estimate - exact) <= 3 * est.stderr
        counts[q] = hits
    report(6, "Monte-Carlo moments", all(h >= 19 for h in counts.values()), time.perf_counter() - t0, 120.0,
           f"|v|: {counts[1]}/20, |v|^2: {counts[2]}/20 seeds within 3 stderr (need >= 19)")


# -- criterion 7 -----------------------------------------------------------------

def test_criterion_7_kernel_invariants(rng):
    t0 = time.perf_counter()
    rule = gauss_hermite(64)
    v = random_points(rng, 3, 16, 0.5, 2.0)
    f = lambda x: np.exp(-np.sum(x * x, axis=-1)) * (1 + x[..., 0])  # noqa: E731
    gamma, shift, beta = 0.3, 0.2, 0.4

    sym = np.max(np.abs(gaussian_log_average(f, gamma, shift, rule, v)
                        - gaussian_log_average_reflected(f, gamma, shift, rule, v)))
    op = log_average_operator(gamma, 0.0, rule)
    order = np.max(np.abs(dilate(op(f), beta)(v) - op(dilate(f, beta))(v)))
    limit = np.max(np.abs(gaussian_log_average(f, 1e-14, shift, rule, v) - f(v * math.exp(shift))))
    limit /= np.max(np.abs(f(v * math.exp(shift))))
    w, u = rule.weights, rule.nodes
    gh = max(abs(w.sum() - math.sqrt(math.pi)) / math.sqrt(math.pi), abs(np.sum(w * u)),
             abs(np.sum(w * u**3)), abs(np.sum(w * u * u) - math.sqrt(math.pi) / 2))
    passed = sym <= 1e-13 and order <= 1e-12 and limit <= 1e-10 and gh <= 1e-13
    report(7, "kernel invariants", passed, time.perf_counter() - t0, 1.0,
           f"+-sym {sym:.1e}; order {order:.1e}; gamma->0 {limit:.1e}; GH {gh:.1e}")


# -- criterion 8 -----------------------------------------------------------------

def variable_betas(variant, n, lam, coeffs):
    A = lam + 0.5 * (1 - math.cos(lam))
    G = 0.2 * (1 - math.exp(-lam))
    if variant == "isotropic":
        return n * (A + 2 * G), A + 4 * G, G
    return n * A + (n * n + n) * G, A + (2 * n + 1) * G, G


def test_criterion_8_variable_coefficients(rng):
    t0 = time.perf_counter()
    eig = eigen_errors(VARIABLE_A, VARIABLE_C, variable_betas, rng)
    mass, ident = mass_errors(VARIABLE_A, VARIABLE_C)
    mol = mol_gaps(VARIABLE_A, VARIABLE_C)
    passed = eig <= 1e-10 and mass <= 1e-8 and all(r.gap <= 1e-4 and r.order >= 1.8 for _, r in mol)
    detail = (f"closed forms {eig:.1e}; mass {mass:.1e}; "
              + "; ".join(f"MoL {name} gap {r.gap:.1e} order {r.order:.2f}" for name, r in mol))
    report(8, "variable coefficients", passed, time.perf_counter() - t0, 90.0, detail)


# -- criterion 9 -----------------------------------------------------------------

def test_criterion_9_cli_contract():
    t0 = time.perf_counter()
    cases = cli_cases()
    golden_bad, exit_bad = [], []
    for case in cases["golden"]:
        with tempfile.TemporaryDirectory() as tmp:
            code, _ = run_cli(case, Path(tmp))
            if code != 0 or golden_mismatches(case, Path(tmp)):
                golden_bad.append(case["name"])
    for case in cases["errors"]:
        with tempfile.TemporaryDirectory() as tmp:
            code, _ = run_cli(case, Path(tmp))
            if code != case["exit"]:
                exit_bad.append(f"{case['name']}={code}")
    passed = not golden_bad and not exit_bad
    report(9, "CLI golden corpus and exit codes", passed, time.perf_counter() - t0, None,
           f"{len(cases['golden']) - len(golden_bad)}/{len(cases['golden'])} golden byte-identical; "
           f"{len(cases['errors']) - len(exit_bad)}/{len(cases['errors'])} error exits"
           + (f"; mismatched: {golden_bad + exit_bad}" if not passed else ""))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
