"""Acceptance checks 1-8.  Each test prints a single ``[ACCEPT n] PASS|FAIL`` line."""
import math
from fractions import Fraction

import numpy as np
import pytest

from wolffkit.counterexample import AppendixConstants, CounterexampleSpec, build, verify_global_upper, \
    verify_local_lower
from wolffkit.density import constant_density, log_power_density, power_density, unit_ball_volume
from wolffkit.elliptic import RadialGrid, hardy_check, solution_theta, solve_radial_dirichlet, verify_sup_bound
from wolffkit.parabolic import (
    Barenblatt, IntervalGrid, ParabolicProblem, SpaceTimeGrid, StructureCoefficients, VectorFieldSpec,
    regularize, sine_tests, solve_ivbp, weak_residual,
)
from wolffkit.potential import class_embedding_check, embedding_exponents, wolff
from wolffkit.testfunctions import theta_family
from wolffkit.verifier import scale_coefficients, scaling_transform, threshold_scan


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[ACCEPT {n}] {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def slopes(errors):
    e = np.asarray(errors, float)
    return np.log2(e[:-1] / e[1:])


# 1 ------------------------------------------------------------------------

def test_1_wolff_closed_forms(report):
    worst, R = 0.0, 1.2
    for N in (3, 4):
        om = unit_ball_volume(N)
        for p in (2.0, 3.0):
            c = 2.0
            exact = (p - 1) / p * (c * om) ** (1 / (p - 1)) * R ** (p / (p - 1))
            worst = max(worst, abs(wolff(constant_density(c, 1.5, N), [0] * N, R, 1, p) / exact - 1))
            for s in (0.5, 1.0, p - 0.5):
                exact = (p - 1) / (p - s) * (N * om / (N - s)) ** (1 / (p - 1)) * R ** ((p - s) / (p - 1))
                worst = max(worst, abs(wolff(power_density(s, 2.0, N), [0] * N, R, 1, p) / exact - 1))
    report(1, worst <= 1e-6, f"max relative error {worst:.2e} (tol 1e-6)")


# 2 ------------------------------------------------------------------------

def test_2_appendix_separation(report):
    spec = CounterexampleSpec()
    f = build(spec)
    lower = verify_local_lower(spec, f)
    a_exact = 0.5 * unit_ball_volume(3)  # ((p-1)/p) omega_3 at p = 2
    a_err = float(np.max(np.abs(lower.values / a_exact - 1)))
    upper = verify_global_upper(spec, f)
    k = AppendixConstants(3, 2.0)
    bound = k.b_p + k.c_p * spec.series(1)
    ok = (a_err <= 1e-8 and abs(lower.a_p / a_exact - 1) <= 1e-12 and upper.lhs <= bound
          and upper.margin >= 0 and not upper.violations and len(lower.values) == 12)
    report(2, ok, f"a_p error {a_err:.1e}; max {upper.computed_max:.4f} + tail {upper.tail:.1e} "
                  f"<= bound {bound:.4f}, margin {upper.margin:.3f}, {len(upper.violations)} violations")


# 3 ------------------------------------------------------------------------

def _hardy_case(f, p, spacing):
    fam = theta_family(1.0, f.dim, 20, seed=0)
    worst, excess = 0.0, []
    for n in (65, 129, 257, 513):
        grid = RadialGrid(1.0, n, spacing, 1e-12) if spacing == "log" else RadialGrid(1.0, n)
        h = solve_radial_dirichlet(f, p, grid)
        rep = hardy_check(h, p, fam + [solution_theta(h)])
        worst = rep.max_ratio
        excess.append(abs(rep.ratios[-1] - 1.0))
    order = np.polyfit(np.log2([65, 129, 257, 513]), np.log2(excess), 1)[0]
    return worst, -order


def test_3_hardy_suite(report):
    lines, ok = [], True
    for p in (2.0, 3.0):
        cases = [(constant_density(1.0, 1.0, 3), "uniform")]
        cases += [(power_density(s, 1.0, 3), "log") for s in (0.5, 1.0, p - 0.5)]
        for f, spacing in cases:
            worst, order = _hardy_case(f, p, spacing)
            ok &= worst <= 1 + 5e-3 and order >= 0.9
            lines.append(f"p={p:g} {f.label}: max {worst:.5f}, order {order:.2f}")
    report(3, ok, "; ".join(lines))


# 4 ------------------------------------------------------------------------

def test_4_radial_dirichlet(report):
    err = 0.0
    for N in (3, 4):
        for p in (2.0, 3.0):
            grid = RadialGrid(1.0, 101)
            sol = solve_radial_dirichlet(constant_density(1.0, 1.0, N), p, grid)
            exact = (p - 1) / p * N ** (-1 / (p - 1)) * (1 - grid.nodes ** (p / (p - 1)))
            err = max(err, float(np.max(np.abs(sol.u - exact))) / exact[0])
    ratios = []
    for p in (2.0, 3.0):
        family = [constant_density(1.0, 0.5, 3), constant_density(7.0, 0.5, 3)]
        family += [power_density(s, 0.5, 3) for s in (0.5, 1.0, 1.5, p - 0.1, p - 0.01)]
        family += [log_power_density(1.0, 1.0, 0.5, 3), log_power_density(p, 1.5 * p, 0.5, 3),
                   log_power_density(p, p, 0.5, 3)]
        for f in family:
            ratios.append(verify_sup_bound(f, p, RadialGrid(0.5, 129, "log", 1e-9)).ratio)
    spread = max(ratios) / min(ratios)
    report(4, err <= 1e-8 and spread <= 10,
           f"f=1 error {err:.1e} (tol 1e-8); sup-bound ratios in [{min(ratios):.3f}, {max(ratios):.3f}], "
           f"spread {spread:.2f} (tol 10)")


# 5 ------------------------------------------------------------------------

def _fourier(n, dt, theta):
    g = SpaceTimeGrid(IntervalGrid(0, 1, n), 0, 0.1, dt, theta)
    s = solve_ivbp(ParabolicProblem(VectorFieldSpec(p=2.0), g, lambda x: np.sin(np.pi * x)))
    return float(np.max(np.abs(s.u[-1] - np.exp(-np.pi ** 2 * 0.1) * np.sin(np.pi * s.x))))


def _barenblatt(k):
    B = Barenblatt(3.0, 1)
    g = SpaceTimeGrid(RadialGrid(5.0, 64 * 2 ** k + 1), 1.0, 2.0, 0.02 / 4 ** k, 1.0, dim=1)
    s = solve_ivbp(ParabolicProblem(regularize(VectorFieldSpec(p=3.0), 1e-8), g, lambda x: B(x, 1.0)))
    return float(np.max(np.abs(s.u - B(s.x[None, :], s.t[:, None]))))


def _weak(p, eps, k):
    g = SpaceTimeGrid(IntervalGrid(0, 1, 16 * 2 ** k + 1), 0, 0.5, 0.05 / 2 ** k, 1.0)
    spec = VectorFieldSpec(p=p) if eps == 0 else regularize(VectorFieldSpec(p=p), eps)
    prob = ParabolicProblem(spec, g, lambda x: np.sin(np.pi * x), source=lambda x, t, u, z: 1 + 0.5 * np.abs(z))
    return weak_residual(solve_ivbp(prob), sine_tests(0, 1))


@pytest.mark.slow
def test_5_solver_validation(report):
    st = slopes([_fourier(1025, 0.1 / 2 ** k, 1.0) for k in range(2, 6)])
    sx = slopes([_fourier(2 ** k + 1, 0.1 * 2.0 ** -k / 4, 0.5) for k in range(4, 8)])
    be = [_barenblatt(k) for k in range(4)]
    sw = np.concatenate([slopes([_weak(2.0, 0.0, k) for k in range(4)]),
                         slopes([_weak(3.0, 1e-6, k) for k in range(4)])])
    ok = (np.all((st >= 0.9) & (st <= 1.1)) and np.all((sx >= 1.9) & (sx <= 2.1))
          and all(b > a for a, b in zip(be[1:], be[:-1])) and np.all(sw >= 0.9))
    report(5, ok, f"time slopes {np.round(st, 3).tolist()}, space slopes {np.round(sx, 3).tolist()}, "
                  f"Barenblatt errors {[f'{e:.2e}' for e in be]}, weak-residual slopes {np.round(sw, 2).tolist()}")


# 6 ------------------------------------------------------------------------

@pytest.mark.slow
def test_6_threshold_scan(report):
    scan = threshold_scan(alphas=(0.5, 1.5), p_values=(2.0, 3.0), levels=(0, 1, 2, 3), q_grid=(4, 8), jobs=4)
    want = {(p, a): lab for p in (2.0, 3.0) for a, lab in
            ((1.5, "Lipschitz-consistent"), (0.5, "sup-divergent, L^q-stable"))}
    ok = all(scan.labels[k] == v for k, v in want.items())
    report(6, ok, "; ".join(f"p={p:g} alpha={a:g}: {scan.labels[(p, a)]}" for p, a in sorted(want)))


# 7 ------------------------------------------------------------------------

def test_7_scaling_commutation(report):
    lam = 2.0
    g = SpaceTimeGrid(IntervalGrid(0, 1, 129), 0, 0.2, 0.005, 1.0)
    prob = ParabolicProblem(VectorFieldSpec(p=2.0), g, lambda x: np.sin(np.pi * x) + 0.5 * np.sin(3 * np.pi * x),
                            source=lambda x, t, u, z: 1.0 + np.sin(u) + 0.2 * z)
    v_after = scaling_transform(solve_ivbp(prob), lam)
    v_before = solve_ivbp(scaling_transform(prob, lam))
    gap = float(np.max(np.abs(v_after.u - v_before.u)) / np.max(np.abs(v_after.u)))

    exact = True
    for p in (2.0, 3.0, 2.5):
        c = StructureCoefficients(p=p, **{k: constant_density(1.0, 1.0, 3) for k in ("f", "g", "f1", "g1", "f2", "g2")})
        s = scale_coefficients(c, 3.0)
        want = {"f": 3.0 ** (1 - p), "f1": 3.0 ** (2 - p), "f2": 3.0 ** (1 - p), "g": 1.0, "g1": 1.0, "g2": 1.0}
        for k, w in want.items():
            exact &= math.isclose(getattr(s, k).profile(np.array([0.3]))[0], w, rel_tol=1e-15)
    report(7, gap <= 1e-8 and exact, f"commutation gap {gap:.1e} (tol 1e-8), coefficient powers exact: {exact}")


# 8 ------------------------------------------------------------------------

EMBEDDING_CASES = [  # alpha, beta, p, q, kappa, s
    (1, 1, 2, 2, Fraction(3, 2), 1),  # strict
    (1, 1, 3, 2, Fraction(3, 2), 1),  # critical, kappa = beta p / (alpha q)
    (1, Fraction(2, 3), 3, Fraction(3, 2), Fraction(4, 3), 1),  # critical
    (1, 1, 2, 2, Fraction(3, 2), Fraction(3, 2)),  # strict
]


def test_8_embedding_exponents(report):
    exps_ok, spread = True, 0.0
    for a, b, p, q, k, s in EMBEDDING_CASES:
        lhs, rhs = embedding_exponents(a, b, p, q, k, s)
        exps_ok &= isinstance(lhs, Fraction) and lhs == rhs
        f = power_density(float(s), 1e4, 3)
        r = [class_embedding_check(f, *map(float, (a, b, p, q, k)), [0, 0, 0], R).ratio for R in np.geomspace(0.01, 1, 5)]
        spread = max(spread, max(r) / min(r) - 1)
    report(8, exps_ok and spread <= 1e-6, f"exponents equal exactly: {exps_ok}; ratio spread {spread:.1e} (tol 1e-6)")
