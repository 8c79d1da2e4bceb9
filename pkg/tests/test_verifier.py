import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wolffkit.density import constant_density, log_power_density, power_density, unit_ball_volume
from wolffkit.parabolic import (
    IntervalGrid, ParabolicProblem, ParabolicSolution, SpaceTimeGrid, StructureCoefficients, VectorFieldSpec,
    regularize, solve_ivbp,
)
from wolffkit.verifier import (
    CylinderRegion, ScanRow, ScanSetup, classify, inverse_scaling, norms, scale_coefficients, scan_problem,
    scaling_transform, threshold_scan, wolff_condition_report,
)


def linear_solution(slope=2.0):
    g = SpaceTimeGrid(IntervalGrid(0, 1, 65), 0, 1.0, 0.25)
    prob = ParabolicProblem(VectorFieldSpec(p=2.0), g, lambda x: slope * x, boundary=lambda x, t: slope * x)
    t = np.linspace(0, 1, 5)
    x = g.x
    u = np.tile(slope * x, (t.size, 1))
    return ParabolicSolution(prob, x, t, u, np.full_like(u, slope), 0.0, [])


def test_norms_of_constant_gradient():
    sol = linear_solution(2.0)
    rep = norms(sol, CylinderRegion(0.25, 0.5, 1.0, center=0.5), q_grid=(2, 4))
    # |Q'| = 0.5 * 0.5
    assert rep.measure == pytest.approx(0.25)
    assert rep.lq[2] == pytest.approx(2.0 * 0.25 ** 0.5)
    assert rep.lq[4] == pytest.approx(2.0 * 0.25 ** 0.25)
    assert rep.esssup[4] == pytest.approx(0.5 * 2.0 ** 4)  # exponent q - p + 2 = q at p = 2
    assert rep.sup == 2.0


def test_norms_mirror_doubles_measure():
    sol = linear_solution(1.0)
    plain = norms(sol, CylinderRegion(0.25, 0.5, 1.0, 0.5))
    mirrored = norms(sol, CylinderRegion(0.5, 0.5, 1.0), mirror=True)
    assert mirrored.measure == pytest.approx(0.5) and plain.measure == pytest.approx(0.25)


def test_norms_need_interior_cylinder():
    sol = linear_solution()
    with pytest.raises(ValueError):
        norms(sol, CylinderRegion(0.6, 0.5, 1.0, center=0.5))
    with pytest.raises(ValueError):
        norms(sol, CylinderRegion(0.2, 0.0, 1.0, center=0.5))
    with pytest.raises(ValueError):
        CylinderRegion(0.2, 1.0, 0.5)


# classification -------------------------------------------------------------

def rows(sups, lqs):
    return [ScanRow(2.0, 0.5, i, "ok", s, {4: l, 8: l}) for i, (s, l) in enumerate(zip(sups, lqs))]


def test_classify_labels():
    assert classify(rows([1.0, 1.3, 1.305, 1.306], [1, 1, 1, 1]), (4, 8)) == "Lipschitz-consistent"
    assert classify(rows([1.0, 1.2, 1.4, 1.6], [1, 1.001, 1.001, 1.001]), (4, 8)) == "sup-divergent, L^q-stable"
    assert classify(rows([1.0, 1.2, 1.4, 1.6], [1, 1.2, 1.4, 1.6]), (4, 8)) == "inconclusive"
    assert classify(rows([1.0, 1.2], [1, 1]), (4, 8)) == "inconclusive"
    bad = rows([1, 1, 1], [1, 1, 1])
    bad[1] = ScanRow(2.0, 0.5, 1, "failed: x")
    assert classify(bad, (4, 8)) == "failed"


def test_scan_problem_levels_are_nested_and_graded():
    s = ScanSetup()
    x0, x1 = (scan_problem(2.0, 0.5, lv, s).grid.x for lv in (0, 1))
    assert np.all(np.isin(x0, x1)) and x1[1] < x0[1] * 1e-10
    rad = scan_problem(3.0, 1.5, 0, ScanSetup(model="radial"))
    assert rad.grid.geometry == "radial" and rad.spec.eps == 1e-6
    with pytest.raises(ValueError):
        ScanSetup(model="cube")


def test_small_threshold_scan_is_deterministic():
    setup = ScanSetup(T=0.5, dt=0.05, depth0=20, depth_step=20, region=CylinderRegion(0.5, 0.25, 0.5))
    a = threshold_scan(alphas=(1.5, None), p_values=(2.0,), levels=(0, 1, 2), setup=setup)
    b = threshold_scan(alphas=(1.5, None), p_values=(2.0,), levels=(0, 1, 2), setup=setup, jobs=2)
    assert a.labels == b.labels
    assert a.labels[(2.0, None)] == "Lipschitz-consistent"
    assert [r["value"] for r in a.csv_rows()] == [r["value"] for r in b.csv_rows()]
    assert {r["quantity"] for r in a.csv_rows()} == {"sup", "Lq"}


# condition report ------------------------------------------------------------

def test_condition_report_constant_coefficients():
    c = constant_density(1.0, 1.0, 3)
    coeffs = StructureCoefficients(p=2.0, f=c, g=c)
    R = [0.1, 0.01]
    rep = wolff_condition_report(coeffs, [[0, 0, 0]], R)
    om = unit_ball_volume(3)
    # W_{2/3,3}^{1}(0, R) = om^(1/2) R for each square
    one = om ** 0.5 * 0.01
    assert rep.composite[0.01] == pytest.approx(2 * one, rel=1e-9)
    # W_{2/3,3} of f^2 + g^2 = 2: scales by 2^(1/2)
    assert rep.composite_of_sum[0.01] == pytest.approx(2 ** 0.5 * one, rel=1e-9)
    assert rep.main_first[0.01] == pytest.approx(0.5 * om * 1e-4)
    assert rep.aposteriori[0.01] == pytest.approx(om * 1e-4)
    assert rep.main_holds and rep.aposteriori_holds


def test_condition_report_detects_divergence():
    g = log_power_density(3.0, 1.5, 0.5, 3)  # g^2 ~ |x|^-6 log^-3: not even integrable
    rep = wolff_condition_report(StructureCoefficients(p=2.0, g=g), [[0, 0, 0]], [0.1])
    assert math.isinf(rep.main_first[0.1]) and not rep.main_holds
    empty = wolff_condition_report(StructureCoefficients(), [[0, 0, 0]], [0.1])
    assert empty.composite[0.1] == 0.0 and empty.main_holds


# scaling -----------------------------------------------------------------------

def test_scaled_constant_coefficient_p3():
    c = StructureCoefficients(p=3.0, f=constant_density(5.0, 1.0, 3), g=constant_density(2.0, 1.0, 3))
    s = scale_coefficients(c, 2.0)
    assert s.f.profile(np.array([0.2]))[0] == pytest.approx(5.0 / 4)
    assert s.g is c.g


@settings(max_examples=20, deadline=None)
@given(st.floats(1.1, 10.0), st.floats(2.0, 4.0))
def test_coefficient_scaling_round_trip(lam, p):
    dens = {k: power_density(1.0, 1.0, 3, c=1.7) for k in ("f", "g", "f1", "g1", "f2", "g2")}
    c = StructureCoefficients(p=p, **dens)
    back = inverse_scaling(scaling_transform(c, lam), lam)
    r = np.array([0.3])
    for k in dens:
        assert getattr(back, k).profile(r)[0] == pytest.approx(getattr(c, k).profile(r)[0], rel=1e-12)


def test_scaling_rejects_bad_lambda_and_regularized_p3():
    c = StructureCoefficients()
    with pytest.raises(ValueError):
        scaling_transform(c, 1.0)
    g = SpaceTimeGrid(IntervalGrid(0, 1, 17), 0, 0.1, 0.01)
    with pytest.raises(ValueError):
        scaling_transform(ParabolicProblem(regularize(VectorFieldSpec(p=3.0), 1e-6), g, lambda x: 0 * x), 2.0)
    with pytest.raises(TypeError):
        scaling_transform("problem", 2.0)


def test_p3_problem_transform_maps_data_and_time():
    g = SpaceTimeGrid(IntervalGrid(0, 1, 17), 0, 0.1, 0.01)
    prob = ParabolicProblem(VectorFieldSpec(p=3.0), g, lambda x: np.sin(np.pi * x),
                            source=lambda x, t, u, z: u * z + t)
    lam = 2.0
    sp = scaling_transform(prob, lam)
    assert sp.grid.t1 == pytest.approx(lam * 0.1) and sp.grid.dt == pytest.approx(lam * 0.01)
    x = np.linspace(0, 1, 5)
    np.testing.assert_allclose(sp.u0(x), np.sin(np.pi * x) / lam)
    v, z, tau = 0.3, -0.7, 0.05
    want = lam ** -2 * (lam * v * lam * z + tau / lam)
    assert sp.source(x, tau, v, z) == pytest.approx(want)


def test_heat_scaling_with_forcing_commutes():
    g = SpaceTimeGrid(IntervalGrid(0, 1, 65), 0, 0.1, 0.01)
    prob = ParabolicProblem(VectorFieldSpec(p=2.0), g, lambda x: np.sin(np.pi * x),
                            forcing=constant_density(3.0, 1.0, 1))
    a = scaling_transform(solve_ivbp(prob), 3.0)
    b = solve_ivbp(scaling_transform(prob, 3.0))
    np.testing.assert_allclose(a.u, b.u, atol=1e-13)
    np.testing.assert_allclose(a.t, b.t)
