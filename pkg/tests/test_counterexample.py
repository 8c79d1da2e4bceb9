import math
from fractions import Fraction

import numpy as np
import pytest

from wolffkit.counterexample import (
    AppendixConstants, CounterexampleSpec, PackingError, build, check_packing, lattice_points, place_centers,
    verify_global_upper, verify_local_lower,
)
from wolffkit.density import BumpSum, unit_ball_volume


def test_constants_are_exact_rationals():
    k = AppendixConstants(3, 2.0)
    assert (k.a_coef, k.c_coef, k.b_coef) == (Fraction(1, 2), Fraction(1), Fraction(3, 2))
    assert k.a_p == pytest.approx(0.5 * unit_ball_volume(3))
    k4 = AppendixConstants(5, 3.0)
    assert k4.b_coef == k4.a_coef + k4.c_coef == Fraction(2, 3) + Fraction(2, 2)
    assert k4.unit == pytest.approx(unit_ball_volume(5) ** 0.5)


def test_spec_radii_and_series():
    s = CounterexampleSpec()
    assert s.e == 0.5 and s.radii[0] == pytest.approx(1 / 16)
    assert s.series(1) == pytest.approx(sum(s.rho(n) ** 0.5 for n in range(1, 200)))
    assert s.series(13) == pytest.approx(s.series(1) - np.sum(s.radii ** 0.5))
    assert s.lattice_spacing == pytest.approx(1.0)
    with pytest.raises(ValueError):
        CounterexampleSpec(N=3, p=3.0)
    with pytest.raises(ValueError):
        CounterexampleSpec(q0=1.5)


def test_lattice_order():
    pts = lattice_points(2, 1.0, 1.0)
    assert len(pts) == 9 and np.all(pts[0] == 0)
    d = np.linalg.norm(pts, axis=1)
    assert np.all(np.diff(d) >= -1e-12)


def test_packing_respects_distances():
    s = CounterexampleSpec()
    c = place_centers(s)
    for i in range(len(c)):
        for j in range(i + 1, len(c)):
            assert np.linalg.norm(c[i] - c[j]) >= 4 * s.radii[i] ** s.e - 1e-12


def test_packing_capacity():
    with pytest.raises(PackingError) as info:
        build(CounterexampleSpec(n_terms=40))
    assert info.value.max_feasible == 27
    s = CounterexampleSpec(n_terms=2)
    bad = BumpSum([[0, 0, 0], [0.5, 0, 0]], s.radii, s.radii ** -2)
    with pytest.raises(PackingError):
        check_packing(s, bad)


def test_local_lower_equals_a_p_for_every_bump():
    s = CounterexampleSpec(n_terms=5)
    f = build(s)
    loc = verify_local_lower(s, f)
    assert loc.max_rel_error < 1e-10
    assert np.all(loc.full_values >= loc.values * (1 - 1e-12))


def test_global_bound_grows_with_truncation():
    bounds, maxima = [], []
    for n in (2, 4, 6):
        s = CounterexampleSpec(n_terms=n)
        up = verify_global_upper(s, build(s))
        assert up.ok, up.violations
        bounds.append(up.bound)
        maxima.append(up.computed_max)
    assert bounds[0] == bounds[-1]  # the bound uses the full series
    assert maxima[0] <= maxima[1] * (1 + 1e-12) <= maxima[2] * (1 + 1e-12)


def test_global_check_flags_violation_with_custom_points():
    s = CounterexampleSpec(n_terms=3)
    f = build(s)
    up = verify_global_upper(s, f, x_sample=[f.centers[0]])
    assert up.argmax.tolist() == f.centers[0].tolist() and math.isfinite(up.margin)
