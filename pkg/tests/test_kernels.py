import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import betainc

from wolffkit import kernels

needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


@needs_numba
@pytest.mark.parametrize("dim", [1, 2, 3, 4, 5, 6])
def test_cap_fraction_matches_betainc(dim):
    for x in np.concatenate([np.geomspace(1e-14, 0.49, 40), np.linspace(0.5, 0.999, 40)]):
        got = kernels._cap_fraction_scalar(x, dim)
        want = betainc(0.5 * (dim + 1), 0.5, x)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("dim", [2, 3, 4])
def test_lens_volume_limits(dim):
    om = kernels.unit_ball_volume(dim)
    # nested and disjoint balls
    assert kernels.lens_volume_numpy(0.1, 1.0, 0.5, dim) == pytest.approx(om * 0.5 ** dim)
    assert kernels.lens_volume_numpy(2.0, 1.0, 0.5, dim) == 0.0
    # two unit balls at distance 1 in R^3: 5 pi / 12
    if dim == 3:
        assert kernels.lens_volume_numpy(1.0, 1.0, 1.0, 3) == pytest.approx(5 * math.pi / 12, rel=1e-13)


@pytest.mark.parametrize("dim", [2, 3, 4])
def test_lens_volume_near_tangency(dim):
    # overlap depth delta: volume ~ delta^((N+1)/2) without cancellation
    delta = np.geomspace(1e-12, 1e-3, 10)
    v = kernels.lens_volume_numpy(1.5 - delta, 1.0, 0.5, dim)
    slope = np.diff(np.log(v)) / np.diff(np.log(delta))
    np.testing.assert_allclose(slope, 0.5 * (dim + 1), rtol=1e-3)


@st.composite
def bump_case(draw):
    dim = draw(st.integers(2, 4))
    nb = draw(st.integers(1, 6))
    seed = draw(st.integers(0, 10 ** 6))
    rng = np.random.default_rng(seed)
    return (rng.uniform(-1, 1, (nb, dim)), rng.uniform(0.01, 0.6, nb), rng.uniform(0.1, 3, nb),
            rng.uniform(-1, 1, dim), np.sort(rng.uniform(1e-3, 3, 7)))


@needs_numba
@settings(max_examples=40, deadline=None)
@given(bump_case())
def test_bump_mass_backends_agree(case):
    a = kernels.bump_ball_mass_numba(*case)
    b = kernels.bump_ball_mass_numpy(*case)
    np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(bump_case())
def test_bump_mass_monotone_and_bounded(case):
    centers, radii, heights, x, r = case
    m = kernels.bump_ball_mass_numpy(centers, radii, heights, x, r)
    total = float(heights @ (kernels.unit_ball_volume(centers.shape[1]) * radii ** centers.shape[1]))
    assert np.all(np.diff(m) >= -1e-12 * total)
    assert np.all(m <= total * (1 + 1e-12))


@needs_numba
@pytest.mark.parametrize("p,eps", [(2.0, 0.0), (3.0, 1e-3), (2.5, 0.0), (4.0, 1e-6)])
def test_flux_divergence_backends_agree(p, eps):
    rng = np.random.default_rng(1)
    x = np.sort(rng.uniform(0, 1, 50))
    u = rng.standard_normal(50)
    w = rng.uniform(0.5, 2, 49)
    a = rng.uniform(0.5, 2, 49)
    for A, B in zip(kernels.flux_divergence_numba(x, u, w, a, p, eps), kernels.flux_divergence_numpy(x, u, w, a, p, eps)):
        np.testing.assert_allclose(A, B, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("p,eps", [(2.0, 0.0), (3.0, 1e-2)])
def test_flux_jacobian_matches_finite_differences(p, eps):
    rng = np.random.default_rng(2)
    x = np.linspace(0, 1, 12)
    u = rng.standard_normal(12)
    w = np.ones(11)
    div, lo, di, up = kernels.flux_divergence_numpy(x, u, w, w, p, eps)
    J = np.diag(di) + np.diag(lo[1:], -1) + np.diag(up[:-1], 1)
    h = 1e-6
    for j in range(12):
        e = np.zeros(12)
        e[j] = h
        fd = (kernels.flux_divergence_numpy(x, u + e, w, w, p, eps)[0]
              - kernels.flux_divergence_numpy(x, u - e, w, w, p, eps)[0]) / (2 * h)
        np.testing.assert_allclose(J[:, j], fd, rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("solver", ["thomas_numpy", "thomas_numba"])
def test_thomas_solves_tridiagonal(solver):
    if solver.endswith("numba") and not kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    rng = np.random.default_rng(3)
    n = 30
    lo, up = rng.uniform(-1, 0, n), rng.uniform(-1, 0, n)
    di = 3 + rng.uniform(0, 1, n)
    rhs = rng.standard_normal(n)
    A = np.diag(di) + np.diag(lo[1:], -1) + np.diag(up[:-1], 1)
    np.testing.assert_allclose(getattr(kernels, solver)(lo, di, up, rhs), np.linalg.solve(A, rhs), rtol=1e-12)


def test_backend_env_selects_numpy():
    env = dict(os.environ, WOLFFKIT_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", "from wolffkit import kernels; print(kernels.BACKEND, "
                          "kernels.thomas is kernels.thomas_numpy)"], env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.split() == ["numpy", "True"]
