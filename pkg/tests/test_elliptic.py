import math

import numpy as np
import pytest

from wolffkit.density import constant_density, power_density, unit_ball_volume
from wolffkit.elliptic import (
    RadialGrid, cutoff_theta, hardy_check, radial_residual, solution_theta, solve_radial_dirichlet,
    verify_sup_bound, weighted_poincare_check,
)
from wolffkit.testfunctions import FAMILY_VERSION, AxisymmetricQuadrature, radial_bump, theta_family


@pytest.mark.parametrize("N,p", [(2, 2.0), (3, 2.5), (4, 3.0)])
def test_constant_forcing_closed_form(N, p):
    g = RadialGrid(2.0, 65)
    sol = solve_radial_dirichlet(constant_density(3.0, 2.0, N), p, g)
    e = p / (p - 1)
    exact = (p - 1) / p * (3.0 / N) ** (1 / (p - 1)) * (2.0 ** e - g.nodes ** e)
    np.testing.assert_allclose(sol.u, exact, rtol=1e-12, atol=1e-14)
    assert sol.u0 == pytest.approx(exact[0])
    assert sol.flux_identity_error() < 1e-12
    np.testing.assert_allclose(sol.at([0.3, 1.7]), (p - 1) / p * (3.0 / N) ** (1 / (p - 1))
                               * (2.0 ** e - np.array([0.3, 1.7]) ** e), rtol=1e-12)


@pytest.mark.parametrize("s,p", [(0.5, 2.0), (1.0, 3.0), (1.5, 2.5)])
def test_power_forcing_closed_form(s, p):
    N = 3
    g = RadialGrid(1.0, 129, "log", 1e-8)
    sol = solve_radial_dirichlet(power_density(s, 1.0, N), p, g)
    k = (p - s) / (p - 1)
    exact = (N - s) ** (-1 / (p - 1)) / k * (1.0 - g.nodes ** k)
    np.testing.assert_allclose(sol.u, exact, rtol=1e-10, atol=1e-14)
    assert sol.u0 == pytest.approx((N - s) ** (-1 / (p - 1)) / k, rel=1e-9)


def test_unbounded_solution_reports_infinite_center():
    sol = solve_radial_dirichlet(power_density(2.5, 1.0, 3), 2.0, RadialGrid(1.0, 65, "log", 1e-6))
    assert math.isinf(sol.u0)
    assert np.all(np.diff(sol.u) < 0)


def test_finite_volume_residual_is_second_order():
    f = constant_density(1.0, 1.0, 3)
    res = []
    for n in (65, 129, 257):
        sol = solve_radial_dirichlet(f, 3.0, RadialGrid(1.0, n))
        band = (sol.r[1:-1] > 0.25) & (sol.r[1:-1] < 0.75)
        res.append(np.max(radial_residual(sol)[band]))
    assert res[1] < res[0] / 3 and res[2] < res[1] / 3


def test_solver_rejects_bad_input():
    with pytest.raises(ValueError):
        solve_radial_dirichlet(constant_density(1, 1, 3, center=(0.1, 0, 0)), 2.0, RadialGrid(1.0, 64))
    with pytest.raises(ValueError):
        RadialGrid(1.0, 10)


def test_sup_bound_zero_and_constant():
    z = verify_sup_bound(constant_density(0.0, 1.0, 3), 2.0, RadialGrid(1.0, 64))
    assert z.ratio == 1.0 and z.consistent
    b = verify_sup_bound(constant_density(1.0, 1.0, 3), 2.0, RadialGrid(1.0, 64))
    # u(0) = 1/6 and W(0, 2) = om/2 + om/2
    assert b.ratio == pytest.approx(1 / (6 * unit_ball_volume(3)), rel=1e-9)


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_hardy_family_below_one_and_h_extremal(p):
    f = power_density(1.0, 1.0, 3)
    h = solve_radial_dirichlet(f, p, RadialGrid(1.0, 513, "log", 1e-12))
    fam = theta_family(1.0, 3, 20, seed=0)
    rep = hardy_check(h, p, fam + [solution_theta(h)])
    assert np.all(rep.ratios[:-1] < 1.0)
    assert rep.ratios[-1] == pytest.approx(1.0, abs=5e-3)
    assert rep.max_bounded_ratio <= rep.max_ratio * (1 + 1e-12)


def test_poincare_constants_finite():
    rep = weighted_poincare_check(constant_density(1.0, 2.0, 3), 2.0, 0.5, theta_family(0.5, 3, 6), 1.0)
    assert np.isfinite(rep.gamma_hardy) and np.isfinite(rep.gamma_pk)
    assert rep.names[-1] == "cutoff" and not rep.inconsistent
    with pytest.raises(ValueError):
        weighted_poincare_check(constant_density(1.0, 2.0, 3), 2.0, 0.5, [], 0.4)


def test_cutoff_gradient_bound():
    xi = cutoff_theta(0.5, 1.0)
    r = np.linspace(0, 1.2, 200)
    v, dr, dz = xi(r, 0 * r)
    assert v[0] == 1.0 and v[-1] == pytest.approx(0.0, abs=1e-15)
    assert np.max(np.hypot(dr, dz)) <= 2 / 0.5


# test functions and quadrature ----------------------------------------------

@pytest.mark.parametrize("dim", [2, 3, 4])
def test_axisymmetric_quadrature_moments(dim):
    q = AxisymmetricQuadrature.on_ball(dim, 1.5, r_min_ratio=1e-12)
    rho, z = q.points
    om = unit_ball_volume(dim)
    assert q.integrate(np.ones_like(z)) == pytest.approx(om * 1.5 ** dim, rel=1e-10)
    assert q.integrate(z ** 2) == pytest.approx(om * 1.5 ** (dim + 2) / (dim + 2), rel=1e-10)


def test_bump_gradient_matches_finite_difference():
    b = radial_bump(0.8, k=3, z0=0.1)
    rho, z, h = np.array([0.2, 0.4]), np.array([0.3, -0.2]), 1e-6
    v, dr, dz = b(rho, z)
    np.testing.assert_allclose(dr, (b(rho + h, z)[0] - b(rho - h, z)[0]) / (2 * h), rtol=1e-6)
    np.testing.assert_allclose(dz, (b(rho, z + h)[0] - b(rho, z - h)[0]) / (2 * h), rtol=1e-6)


def test_theta_family_is_deterministic_and_supported():
    a, b = theta_family(1.0, 3, 20, seed=7), theta_family(1.0, 3, 20, seed=7)
    assert len(a) == 20 and [t.name for t in a] == [t.name for t in b] and FAMILY_VERSION
    ang = np.linspace(0, np.pi, 9)
    for t in a:
        v, _, _ = t(1.0 * np.sin(ang), 1.0 * np.cos(ang))
        np.testing.assert_allclose(v, 0.0, atol=1e-12)
