"""Nonnegative compactly supported densities and their ball masses.

Three concrete kinds are provided:

* :class:`RadialProfile` -- ``f(y) = profile(|y - center|)`` on a ball,
* :class:`BumpSum` -- ``sum_n h_n 1_{B(x_n, rho_n)}``,
* :class:`GridSamples` -- nonnegative samples on a uniform grid.

Every density answers ``ball_mass(x, r)`` for an array of radii, which is
the only thing the Wolff potential needs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import betainc

from . import kernels
from .quadrature import DivergentIntegral, gauss_legendre, geometric_pieces, log_nodes, shell_integral


def unit_ball_volume(dim: int) -> float:
    """Volume of the unit ball in ``R^dim``, ``pi^(N/2) / Gamma(N/2 + 1)``."""
    return kernels.unit_ball_volume(dim)


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere ``S^(dim-1)``."""
    return dim * unit_ball_volume(dim)


class Density:
    dim: int

    def ball_mass(self, x, r) -> np.ndarray:
        raise NotImplementedError

    def breakpoints(self, x) -> np.ndarray:
        """Radii at which ``r -> ball_mass(x, r)`` is not smooth."""
        return np.empty(0)

    def outer_radius(self, x) -> float:
        """Smallest radius beyond which ``B_r(x)`` contains the whole support."""
        raise NotImplementedError

    def total_mass(self) -> float:
        raise NotImplementedError

    def evaluate(self, points) -> np.ndarray:
        raise NotImplementedError

    def singular_points(self) -> list:
        """Points where the density concentrates (used to seed sup searches)."""
        return []

    def power(self, k: float) -> "Density":
        raise NotImplementedError

    def scale(self, c: float) -> "Density":
        raise NotImplementedError

    def dilate(self, lam: float) -> "Density":
        """The density ``y -> f(y / lam)``."""
        raise NotImplementedError

    def interval_mass(self, a, b):
        """1D only: ``∫_a^b f``, for arrays of interval ends."""
        a = np.atleast_1d(np.asarray(a, float))
        b = np.atleast_1d(np.asarray(b, float))
        out = np.empty(a.shape)
        for i, (lo, hi) in enumerate(zip(a, b)):
            out[i] = self.ball_mass(np.array([0.5 * (lo + hi)]), np.array([0.5 * (hi - lo)]))[0]
        return out

    def is_zero(self) -> bool:
        return self.total_mass() == 0.0


@dataclass(frozen=True)
class ZeroDensity(Density):
    dim: int

    def ball_mass(self, x, r):
        return np.zeros(np.shape(np.atleast_1d(r)))

    def outer_radius(self, x):
        return 0.0

    def total_mass(self):
        return 0.0

    def evaluate(self, points):
        return np.zeros(np.shape(points)[:-1])

    def power(self, k):
        return self

    def scale(self, c):
        return self

    def dilate(self, lam):
        return self

    def interval_mass(self, a, b):
        return np.zeros(np.shape(np.atleast_1d(a)))


@dataclass(frozen=True)
class RadialProfile(Density):
    """``f(y) = profile(|y - center|)`` for ``|y - center| < support``, else 0.

    ``antiderivative``, when given, is ``H`` with
    ``H'(s) = |S^(N-1)| s^(N-1) profile(s)``; it makes shell masses exact.
    """

    profile: Callable[[np.ndarray], np.ndarray]
    support: float
    dim: int
    center: Optional[tuple] = None
    antiderivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = "radial"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.support <= 0:
            raise ValueError("support radius must be positive")
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def origin(self) -> np.ndarray:
        return np.zeros(self.dim) if self.center is None else np.asarray(self.center, float)

    # -- radial masses -----------------------------------------------------
    def _g(self, s):
        s = np.asarray(s, float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            val = sphere_area(self.dim) * s ** (self.dim - 1) * self.profile(s)
        return np.where(s < self.support, val, 0.0)

    def _h0(self):
        if self.antiderivative is None:
            return None
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            v = float(np.asarray(self.antiderivative(np.array([0.0])))[0])
        return v

    def radial_mass(self, r) -> np.ndarray:
        """``∫_{|y-c|<r} f`` for an array of radii."""
        r = np.minimum(np.atleast_1d(np.asarray(r, float)), self.support)
        if self.antiderivative is not None:
            h0 = self._h0()
            if not np.isfinite(h0):
                raise DivergentIntegral("density is not integrable at its center", rate=0.0)
            out = np.asarray(self.antiderivative(np.maximum(r, 0.0)), float) - h0
            return np.where(r > 0, out, 0.0)
        return self._radial_mass_numeric(r)

    def _radial_mass_numeric(self, r):
        pos = r[r > 0]
        out = np.zeros(r.shape)
        if pos.size == 0:
            return out
        knots = np.unique(pos)
        base = shell_integral(self._g, knots[0]).total
        grid = [knots[0]]
        for a, b in zip(knots[:-1], knots[1:]):
            grid.extend(geometric_pieces(a, b)[1:])
        grid = np.asarray(grid)
        cum = np.array([base])
        if grid.size > 1:
            rr, ww = log_nodes(grid[:-1], grid[1:], 16)
            pieces = np.sum(self._g(rr.ravel()).reshape(rr.shape) * ww, axis=1)
            cum = np.concatenate([[base], base + np.cumsum(pieces)])
        vals = cum[np.searchsorted(grid, knots)]
        out[r > 0] = vals[np.searchsorted(knots, pos)]
        return out

    def _anti(self, v):
        h0 = self._h0()
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            val = np.asarray(self.antiderivative(np.where(v > 0, v, 1.0)), float)
        return np.where(v > 0, val, h0)

    def shell_mass(self, a, b) -> np.ndarray:
        """``∫_{a<|y-c|<b} f`` -- finite even when f is not integrable at c."""
        a = np.minimum(np.atleast_1d(np.asarray(a, float)), self.support)
        b = np.minimum(np.atleast_1d(np.asarray(b, float)), self.support)
        a, b = np.broadcast_arrays(a, b)
        if self.antiderivative is not None:
            out = np.where(b > a, self._anti(b) - self._anti(a), 0.0)
            if not np.all(np.isfinite(out)):
                raise DivergentIntegral("shell reaches a non-integrable center", rate=0.0)
            return out
        out = np.zeros(a.shape)
        for i in np.ndindex(a.shape):
            lo, hi = a[i], b[i]
            if hi <= lo:
                continue
            if lo <= 0:
                out[i] = self._radial_mass_numeric(np.array([hi]))[0]
                continue
            knots = geometric_pieces(lo, hi)
            rr, ww = log_nodes(knots[:-1], knots[1:], 16)
            out[i] = float(np.sum(self._g(rr.ravel()).reshape(rr.shape) * ww))
        return out

    # -- Density interface -------------------------------------------------
    def ball_mass(self, x, r):
        r = np.atleast_1d(np.asarray(r, float))
        x = np.asarray(x, float)
        d = float(np.linalg.norm(x - self.origin))
        if d == 0.0:
            return self.radial_mass(r)
        if self.dim == 1:
            c = self.origin[0]
            return np.where(r > 0, self.interval_mass(c + d - r, c + d + r), 0.0)
        return self._offcenter_mass(d, r)

    def _offcenter_mass(self, d, r, n=64):
        out = np.zeros(r.shape)
        pos = r > 0
        inner = np.maximum(r - d, 0.0)
        full = np.zeros(r.shape)
        has_inner = pos & (inner > 0)
        if np.any(has_inner):
            full[has_inner] = self.radial_mass(inner[has_inner])
        lo = np.abs(r - d)
        hi = np.minimum(r + d, self.support)
        act = pos & (hi > lo)
        if np.any(act):
            x, w = gauss_legendre(n)
            tau = 0.5 * (x + 1.0)
            a = lo[act][:, None]
            b = hi[act][:, None]
            # cosine map clusters nodes at both ends (sqrt-type endpoint behaviour)
            s = 0.5 * (a + b) - 0.5 * (b - a) * np.cos(np.pi * tau)
            ds = 0.5 * (b - a) * np.pi * np.sin(np.pi * tau) * 0.5 * w
            rr = r[act][:, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                c = (s * s + d * d - rr * rr) / (2.0 * s * d)
            c = np.clip(np.nan_to_num(c, nan=1.0), -1.0, 1.0)
            frac = self._sphere_fraction(c)
            part = np.sum(self._g(s) * frac * ds, axis=1)
            out[act] = part
        return full + out

    def _sphere_fraction(self, c):
        """Fraction of the unit sphere ``S^(N-1)`` with ``cos(angle) > c``."""
        half = 0.5 * betainc(0.5 * (self.dim - 1), 0.5, 1.0 - c * c)
        return np.where(c >= 0, half, 1.0 - half)

    def breakpoints(self, x):
        d = float(np.linalg.norm(np.asarray(x, float) - self.origin))
        pts = [self.support] if d == 0 else [d, abs(self.support - d), d + self.support]
        return np.unique([p for p in pts if p > 0])

    def outer_radius(self, x):
        return float(np.linalg.norm(np.asarray(x, float) - self.origin)) + self.support

    def total_mass(self):
        return float(self.radial_mass(np.array([self.support]))[0])

    def evaluate(self, points):
        pts = np.asarray(points, float)
        s = np.linalg.norm(pts - self.origin, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            v = np.asarray(self.profile(s), float)
        return np.where(s < self.support, v, 0.0)

    def singular_points(self):
        return [self.origin]

    def power(self, k):
        prof = self.profile
        return RadialProfile(lambda s: np.asarray(prof(s), float) ** k, self.support, self.dim,
                             self.center, None, f"({self.label})^{k}", dict(self.params, power=k))

    def scale(self, c):
        prof, anti = self.profile, self.antiderivative
        return RadialProfile(lambda s: c * np.asarray(prof(s), float), self.support, self.dim, self.center,
                             None if anti is None else (lambda s: c * np.asarray(anti(s), float)),
                             f"{c}*({self.label})", dict(self.params, scale=c))

    def dilate(self, lam):
        prof, anti, n = self.profile, self.antiderivative, self.dim
        center = None if self.center is None else tuple(lam * np.asarray(self.center, float))
        return RadialProfile(lambda s: prof(np.asarray(s) / lam), lam * self.support, n, center,
                             None if anti is None else (lambda s: lam ** n * np.asarray(anti(np.asarray(s) / lam))),
                             f"dilate({self.label},{lam})", dict(self.params, dilate=lam))

    def interval_mass(self, a, b):
        if self.dim != 1:
            raise ValueError("interval_mass is defined for dim == 1 only")
        a = np.atleast_1d(np.asarray(a, float)) - self.origin[0]
        b = np.atleast_1d(np.asarray(b, float)) - self.origin[0]
        out = np.zeros(a.shape)
        right = a >= 0
        left = b <= 0
        cross = ~(right | left)
        if np.any(right):
            out[right] = 0.5 * self.shell_mass(a[right], b[right])
        if np.any(left):
            out[left] = 0.5 * self.shell_mass(-b[left], -a[left])
        if np.any(cross):
            out[cross] = 0.5 * (self.radial_mass(-a[cross]) + self.radial_mass(b[cross]))
        return out

    def odd_interval_mass(self, a, b):
        """1D: ``∫_a^b sign(y - c) f(|y - c|) dy``; finite for non-integrable f."""
        a = np.atleast_1d(np.asarray(a, float)) - self.origin[0]
        b = np.atleast_1d(np.asarray(b, float)) - self.origin[0]
        out = np.zeros(a.shape)
        right = a >= 0
        left = b <= 0
        cross = ~(right | left)
        if np.any(right):
            out[right] = 0.5 * self.shell_mass(a[right], b[right])
        if np.any(left):
            out[left] = -0.5 * self.shell_mass(-b[left], -a[left])
        if np.any(cross):
            lo = np.minimum(-a[cross], b[cross])
            hi = np.maximum(-a[cross], b[cross])
            sgn = np.where(b[cross] >= -a[cross], 1.0, -1.0)
            out[cross] = sgn * 0.5 * self.shell_mass(lo, hi)
        return out


@dataclass(frozen=True)
class BumpSum(Density):
    """``sum_n h_n 1_{B(x_n, rho_n)}``."""

    centers: np.ndarray
    radii: np.ndarray
    heights: np.ndarray
    label: str = "bumps"

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, float))
        r = np.atleast_1d(np.asarray(self.radii, float))
        h = np.atleast_1d(np.asarray(self.heights, float))
        if not (c.shape[0] == r.shape[0] == h.shape[0]):
            raise ValueError("centers, radii and heights must have the same length")
        if np.any(r <= 0) or np.any(h < 0):
            raise ValueError("radii must be positive and heights nonnegative")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "heights", h)

    @property
    def dim(self):
        return self.centers.shape[1]

    def ball_mass(self, x, r):
        r = np.ascontiguousarray(np.atleast_1d(np.asarray(r, float)))
        x = np.ascontiguousarray(np.asarray(x, float))
        return kernels.bump_ball_mass(self.centers, self.radii, self.heights, x, r)

    def _dist(self, x):
        return np.linalg.norm(self.centers - np.asarray(x, float)[None, :], axis=1)

    def breakpoints(self, x):
        d = self._dist(x)
        pts = np.concatenate([np.abs(d - self.radii), d + self.radii])
        return np.unique(pts[pts > 0])

    def outer_radius(self, x):
        return float(np.max(self._dist(x) + self.radii))

    def total_mass(self):
        return float(np.sum(self.heights * unit_ball_volume(self.dim) * self.radii ** self.dim))

    def evaluate(self, points):
        pts = np.asarray(points, float)
        d = np.linalg.norm(pts[..., None, :] - self.centers, axis=-1)
        return np.sum(np.where(d < self.radii, self.heights, 0.0), axis=-1)

    def singular_points(self):
        return list(self.centers)

    def overlapping(self) -> bool:
        d = np.linalg.norm(self.centers[:, None, :] - self.centers[None, :, :], axis=-1)
        reach = self.radii[:, None] + self.radii[None, :]
        np.fill_diagonal(d, np.inf)
        return bool(np.any(d < reach))

    def power(self, k):
        if self.overlapping():
            raise ValueError("power of a bump sum needs pairwise disjoint bumps")
        return BumpSum(self.centers, self.radii, self.heights ** k, f"({self.label})^{k}")

    def scale(self, c):
        return BumpSum(self.centers, self.radii, self.heights * c, f"{c}*({self.label})")

    def dilate(self, lam):
        return BumpSum(self.centers * lam, self.radii * lam, self.heights, f"dilate({self.label},{lam})")

    def term(self, n) -> "BumpSum":
        return BumpSum(self.centers[n:n + 1], self.radii[n:n + 1], self.heights[n:n + 1], f"{self.label}[{n}]")


@dataclass(frozen=True)
class GridSamples(Density):
    """Samples ``values[i0, i1, ...]`` at cell centers ``origin + (i + 1/2) spacing``.

    Ball masses replace each cell by a ball of equal volume carrying the
    cell's value, which keeps the total mass exact and makes the small-r
    behaviour of the Wolff integrand finite.
    """

    origin: tuple
    spacing: float
    values: np.ndarray
    label: str = "grid"

    def __post_init__(self):
        v = np.asarray(self.values, float)
        if np.any(v < 0):
            raise ValueError("grid samples must be nonnegative")
        if self.spacing <= 0:
            raise ValueError("grid spacing must be positive")
        object.__setattr__(self, "values", v)

    @property
    def dim(self):
        return self.values.ndim

    def _bumps(self) -> BumpSum:
        idx = np.argwhere(self.values > 0)
        centers = np.asarray(self.origin, float) + (idx + 0.5) * self.spacing
        rad = (self.spacing ** self.dim / unit_ball_volume(self.dim)) ** (1.0 / self.dim)
        if idx.shape[0] == 0:
            centers = np.zeros((1, self.dim))
            return BumpSum(centers, [rad], [0.0], self.label)
        return BumpSum(centers, np.full(idx.shape[0], rad), self.values[tuple(idx.T)], self.label)

    def ball_mass(self, x, r):
        return self._bumps().ball_mass(x, r)

    def breakpoints(self, x):
        return self._bumps().breakpoints(x)

    def outer_radius(self, x):
        return self._bumps().outer_radius(x)

    def total_mass(self):
        return float(np.sum(self.values) * self.spacing ** self.dim)

    def evaluate(self, points):
        pts = np.asarray(points, float)
        idx = np.floor((pts - np.asarray(self.origin, float)) / self.spacing).astype(int)
        inside = np.all((idx >= 0) & (idx < np.array(self.values.shape)), axis=-1)
        clipped = np.clip(idx, 0, np.array(self.values.shape) - 1)
        return np.where(inside, self.values[tuple(np.moveaxis(clipped, -1, 0))], 0.0)

    def singular_points(self):
        if not np.any(self.values > 0):
            return []
        i = np.unravel_index(np.argmax(self.values), self.values.shape)
        return [np.asarray(self.origin, float) + (np.asarray(i) + 0.5) * self.spacing]

    def power(self, k):
        return GridSamples(self.origin, self.spacing, self.values ** k, f"({self.label})^{k}")

    def scale(self, c):
        return GridSamples(self.origin, self.spacing, self.values * c, f"{c}*({self.label})")

    def dilate(self, lam):
        return GridSamples(tuple(lam * np.asarray(self.origin, float)), lam * self.spacing, self.values,
                           f"dilate({self.label},{lam})")


# ---------------------------------------------------------------------------
# named radial families
# ---------------------------------------------------------------------------

def constant_density(c: float, support: float, dim: int, center=None) -> RadialProfile:
    """``c`` on the ball of radius ``support``."""
    if c < 0:
        raise ValueError("density must be nonnegative")
    omega = unit_ball_volume(dim)
    return RadialProfile(lambda s: np.full(np.shape(s), float(c)), support, dim, center,
                         lambda s: c * omega * np.asarray(s, float) ** dim, f"const({c})",
                         {"kind": "constant", "c": c})


def power_density(s0: float, support: float, dim: int, c: float = 1.0, center=None) -> RadialProfile:
    """``c |y|^-s0`` on the ball of radius ``support``."""
    area = sphere_area(dim)
    anti = None
    if s0 < dim:
        anti = lambda s: c * area * np.asarray(s, float) ** (dim - s0) / (dim - s0)  # noqa: E731
    return RadialProfile(lambda s: c * np.asarray(s, float) ** (-s0), support, dim, center, anti,
                         f"|y|^-{s0}", {"kind": "power", "s": s0, "c": c})


def log_power_density(s0: float, alpha: float, support: float, dim: int, c: float = 1.0,
                      center=None) -> RadialProfile:
    """``c |y|^-s0 (log 1/|y|)^-alpha`` on the ball of radius ``support < 1``."""
    if not 0 < support < 1:
        raise ValueError("log-power densities need support radius in (0, 1)")
    area = sphere_area(dim)

    def prof(s):
        s = np.asarray(s, float)
        return c * s ** (-s0) * np.log(1.0 / s) ** (-alpha)

    anti = None
    if s0 == dim:
        if alpha == 1.0:
            def anti(s):
                s = np.asarray(s, float)
                with np.errstate(divide="ignore"):
                    return -c * area * np.log(np.log(1.0 / s))
        else:
            def anti(s):
                s = np.asarray(s, float)
                with np.errstate(divide="ignore"):
                    return c * area * np.log(1.0 / s) ** (1.0 - alpha) / (alpha - 1.0)
    return RadialProfile(prof, support, dim, center, anti, f"|y|^-{s0} log^-{alpha}",
                         {"kind": "log_power", "s": s0, "alpha": alpha, "c": c})


def zero_density(dim: int) -> ZeroDensity:
    return ZeroDensity(dim)


def ball_mass(f: Density, x, r):
    """``∫_{B_r(x)} f`` for scalar or array ``r``; scalar in, scalar out."""
    scalar = np.ndim(r) == 0
    out = f.ball_mass(np.asarray(x, float), np.atleast_1d(np.asarray(r, float)))
    return float(out[0]) if scalar else out


__all__ = [
    "Density", "RadialProfile", "BumpSum", "GridSamples", "ZeroDensity",
    "constant_density", "power_density", "log_power_density", "zero_density",
    "ball_mass", "unit_ball_volume", "sphere_area", "DivergentIntegral",
]
