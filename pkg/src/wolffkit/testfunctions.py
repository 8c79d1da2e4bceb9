"""Seeded families of axisymmetric test functions and a matching quadrature.

A test function is written in cylindrical coordinates ``(rho, z)`` about
the ``z`` axis, ``rho = |x'|`` with ``x = (x', z)``, and returns its value
together with ``d/d rho`` and ``d/dz``.  Integrals over a centered ball use
spherical coordinates ``(r, mu = z / r)`` with Gauss-Jacobi nodes in ``mu``
for the weight ``(1 - mu^2)^((N-3)/2)``.

Families are deterministic functions of ``(R, dim, size, seed)`` and carry
``FAMILY_VERSION`` so recorded inequality margins stay reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi

from .density import sphere_area

FAMILY_VERSION = "v1"


@dataclass(frozen=True)
class TestFunction:
    name: str
    fn: Callable  # (rho, z) -> (value, d_rho, d_z)
    scale: float  # diameter of the support

    def __call__(self, rho, z):
        return self.fn(rho, z)

    def grad_norm(self, rho, z):
        _, dr, dz = self.fn(rho, z)
        return np.hypot(dr, dz)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AxisymmetricQuadrature:
    dim: int
    r: np.ndarray
    wr: np.ndarray  # includes r^(N-1)
    mu: np.ndarray
    wmu: np.ndarray  # includes (1-mu^2)^((N-3)/2) and |S^(N-2)|

    @classmethod
    def build(cls, dim, r_nodes, r_weights, n_mu=32):
        if dim < 2:
            raise ValueError("axisymmetric quadrature needs dim >= 2")
        a = 0.5 * (dim - 3)
        mu, wmu = roots_jacobi(n_mu, a, a)
        r = np.asarray(r_nodes, float)
        wr = np.asarray(r_weights, float) * r ** (dim - 1)
        return cls(dim, r, wr, mu, wmu * sphere_area(dim - 1))

    @classmethod
    def on_ball(cls, dim, R, n_shells=40, n_per=8, n_mu=32, r_min_ratio=1e-6):
        """Composite log-Gauss in ``r`` on ``[r_min, R]`` plus Gauss-Legendre near the top."""
        from .quadrature import log_nodes

        edges = np.geomspace(R * r_min_ratio, R, n_shells + 1)
        r, w = log_nodes(edges[:-1], edges[1:], n_per)
        return cls.build(dim, r.ravel(), w.ravel(), n_mu)

    @property
    def points(self):
        rho = self.r[:, None] * np.sqrt(1.0 - self.mu[None, :] ** 2)
        z = self.r[:, None] * self.mu[None, :]
        return rho, z

    def weights(self):
        return self.wr[:, None] * self.wmu[None, :]

    def integrate(self, values):
        return float(np.sum(values * self.weights()))

    def radial(self, g):
        """Values of a radial function ``g(r)`` broadcast over the (r, mu) grid."""
        return np.broadcast_to(np.asarray(g(self.r), float)[:, None], (self.r.size, self.mu.size))

    def forms(self, theta: TestFunction, p=2.0):
        """``(∫|theta|^p, ∫|grad theta|^p)`` over the ball."""
        rho, z = self.points
        v, dr, dz = theta(rho, z)
        return self.integrate(np.abs(v) ** p), self.integrate(np.hypot(dr, dz) ** p)


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def _bump_profile(a, k):
    def phi(s):
        t = np.clip(1.0 - (s / a) ** 2, 0.0, None)
        return t ** k, -2.0 * k * s / a ** 2 * t ** (k - 1)
    return phi


def _radial_about(phi, z0=0.0):
    def fn(rho, z):
        zz = z - z0
        s = np.hypot(rho, zz)
        v, d = phi(s)
        with np.errstate(invalid="ignore", divide="ignore"):
            ds = np.where(s > 0, d / np.where(s > 0, s, 1.0), 0.0)
        return v, ds * rho, ds * zz
    return fn


def radial_bump(a, k=3, z0=0.0, name=None):
    """``(1 - |x - z0 e_z|^2/a^2)_+^k``."""
    return TestFunction(name or f"bump(a={a:.4g},z0={z0:.4g},k={k})", _radial_about(_bump_profile(a, k), z0), 2 * a)


def tensor_bump(a, c, z0=0.0, k=3):
    """``b(rho/a) b((z - z0)/c)`` with ``b(t) = (1 - t^2)_+^k``."""
    pa, pc = _bump_profile(a, k), _bump_profile(c, k)

    def fn(rho, z):
        va, da = pa(np.abs(rho))
        vc, dc = pc(z - z0)
        return va * vc, da * vc, va * dc
    return TestFunction(f"tensor(a={a:.4g},c={c:.4g},z0={z0:.4g})", fn, 2 * max(a, c))


def oscillatory(R, m, k=2):
    """``sin(m pi r / R + pi/4) (1 - r^2/R^2)^k`` -- sign changing, vanishes on the sphere."""
    base = _bump_profile(R, k)

    def phi(s):
        b, db = base(s)
        w = m * math.pi / R
        return np.sin(w * s + math.pi / 4) * b, w * np.cos(w * s + math.pi / 4) * b + np.sin(w * s + math.pi / 4) * db
    return TestFunction(f"osc(m={m})", _radial_about(phi), 2 * R)


def angular(R, ell, dim, k=3):
    """Bump times the harmonic polynomial ``z`` (l=1) or ``(N-1) z^2 - rho^2`` (l=2), rescaled."""
    base = _bump_profile(R, k)

    def fn(rho, z):
        s = np.hypot(rho, z)
        b, db = base(s)
        with np.errstate(invalid="ignore", divide="ignore"):
            ds = np.where(s > 0, db / np.where(s > 0, s, 1.0), 0.0)
        if ell == 1:
            y, yr, yz = z / R, 0.0 * z, np.full_like(z, 1.0 / R)
        else:
            y = ((dim - 1) * z ** 2 - rho ** 2) / R ** 2
            yr, yz = -2.0 * rho / R ** 2, 2.0 * (dim - 1) * z / R ** 2
        return b * y, yr * b + y * ds * rho, yz * b + y * ds * z
    return TestFunction(f"angular(l={ell})", fn, 2 * R)


def power_profile(R, sigma, eps, k=2):
    """``(r^2 + eps^2)^(-sigma/2) (1 - r^2/R^2)^k``: near-extremal for Hardy's inequality."""
    cut = _bump_profile(R, k)

    def phi(s):
        c, dc = cut(s)
        q = (s ** 2 + eps ** 2) ** (-0.5 * sigma)
        dq = -sigma * s * (s ** 2 + eps ** 2) ** (-0.5 * sigma - 1.0)
        return q * c, dq * c + q * dc
    return TestFunction(f"power(sigma={sigma:.4g},eps={eps:.3g})", _radial_about(phi), 2 * eps)


def combination(parts, coeffs, name):
    def fn(rho, z):
        v = dr = dz = 0.0
        for c, t in zip(coeffs, parts):
            a, b, d = t(rho, z)
            v, dr, dz = v + c * a, dr + c * b, dz + c * d
        return v, dr, dz
    return TestFunction(name, fn, max(t.scale for t in parts))


def from_radial_samples(r, u, du, name="from-solution"):
    """Piecewise-cubic Hermite interpolant of radial samples ``u(r)``, ``u'(r)``."""
    from scipy.interpolate import CubicHermiteSpline

    spline = CubicHermiteSpline(r, u, du, extrapolate=False)
    d1 = spline.derivative()
    top = float(r[-1])

    def phi(s):
        s = np.clip(s, r[0], None)
        v = np.nan_to_num(spline(np.minimum(s, top)), nan=0.0)
        d = np.nan_to_num(d1(np.minimum(s, top)), nan=0.0)
        return np.where(s < top, v, 0.0), np.where(s < top, d, 0.0)
    return TestFunction(name, _radial_about(phi), 2 * top)


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

def theta_family(R, dim, size=20, seed=0, kinds=("bump", "offcenter", "osc", "angular", "tensor", "random")):
    """A deterministic list of ``size`` test functions supported in ``B_R``.

    Members cycle through ``kinds``; parameters are drawn from
    ``numpy.random.default_rng(seed)``.
    """
    rng = np.random.default_rng(seed)
    out = []
    i = 0
    while len(out) < size:
        kind = kinds[i % len(kinds)]
        i += 1
        if kind == "bump":
            out.append(radial_bump(R * rng.uniform(0.3, 1.0), k=int(rng.integers(2, 5))))
        elif kind == "offcenter":
            a = R * rng.uniform(0.15, 0.5)
            out.append(radial_bump(a, k=3, z0=rng.choice([-1.0, 1.0]) * rng.uniform(0.0, R - a)))
        elif kind == "osc":
            out.append(oscillatory(R, int(rng.integers(1, 6))))
        elif kind == "angular":
            out.append(angular(R, int(rng.integers(1, 3)), dim))
        elif kind == "tensor":
            a, c = R * rng.uniform(0.2, 0.6, size=2)
            zmax = math.sqrt(max(R ** 2 - a ** 2, 0.0)) - c
            out.append(tensor_bump(a, c, z0=rng.uniform(-1, 1) * max(zmax, 0.0)))
        elif kind == "random":
            parts = [radial_bump(R * rng.uniform(0.2, 1.0), k=3,
                                 z0=0.0) for _ in range(3)]
            coeffs = rng.normal(size=3)
            out.append(combination(parts, coeffs, f"random#{len(out)}"))
        else:
            raise ValueError(f"unknown test-function kind {kind!r}")
    return out


def concentrating_family(R, dim, scales, seed=0, size_per_scale=6):
    """Test functions grouped by support scale ``s`` in ``scales`` (largest first).

    Returns a list of ``(scale, [TestFunction, ...])``; the power profiles
    at each scale use sigma near the Hardy-critical ``(N-2)/2``.
    """
    rng = np.random.default_rng(seed)
    tiers = []
    for s in scales:
        members = [radial_bump(s, k=2), radial_bump(s, k=4), oscillatory(s, 1), angular(s, 1, dim)]
        crit = 0.5 * (dim - 2)
        for _ in range(max(size_per_scale - len(members), 0)):
            sigma = crit * rng.uniform(0.5, 0.98)
            members.append(power_profile(min(R, 1e3 * s), sigma, s))
        tiers.append((s, members))
    return tiers
