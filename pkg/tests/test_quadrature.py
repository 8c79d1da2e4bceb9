import math

import numpy as np
import pytest

from wolffkit.quadrature import (
    DivergentIntegral, adaptive_log_integral, geometric_pieces, log_nodes, shell_integral,
)


def test_log_nodes_integrate_powers_exactly():
    r, w = log_nodes(0.5, 2.0, 8)
    assert np.sum(w * r ** 2) == pytest.approx((8 - 0.125) / 3, rel=1e-14)


def test_geometric_pieces_ratio():
    pts = geometric_pieces(1e-3, 1.0)
    assert pts[0] == pytest.approx(1e-3) and pts[-1] == pytest.approx(1.0)
    assert np.max(pts[1:] / pts[:-1]) <= 2.0 + 1e-12


@pytest.mark.parametrize("a", [0.05, 0.5, 1.0, 3.0])
def test_shell_integral_power(a):
    res = shell_integral(lambda r: r ** (a - 1), 1.0)
    assert res.total == pytest.approx(1 / a, rel=1e-9)


def test_shell_integral_algebraic_tail():
    # ∫_0^{1/2} dr / (r log(1/r)^2) = 1 / log 2, decaying like k^-2 per shell
    res = shell_integral(lambda r: 1.0 / (r * np.log(1 / r) ** 2), 0.5)
    assert res.tail_model == "algebraic"
    assert res.total == pytest.approx(1 / math.log(2), rel=1e-8)


@pytest.mark.parametrize("g", [lambda r: 1.0 / r, lambda r: r ** -1.5, lambda r: 1.0 / (r * np.log(1 / r))])
def test_shell_integral_detects_divergence(g):
    with pytest.raises(DivergentIntegral):
        shell_integral(g, 0.5)


def test_adaptive_log_integral_kink():
    g = lambda r: np.abs(np.asarray(r) - 0.3)  # noqa: E731
    assert adaptive_log_integral(g, 0.1, 1.0) == pytest.approx(0.5 * 0.2 ** 2 + 0.5 * 0.7 ** 2, rel=1e-10)


def test_adaptive_log_integral_stops_on_noise():
    rng = np.random.default_rng(0)
    noisy = lambda r: 1.0 + 1e-9 * rng.standard_normal(np.shape(r))  # noqa: E731
    assert adaptive_log_integral(noisy, 1.0, 2.0, max_intervals=50) == pytest.approx(1.0, rel=1e-8)
