"""A density with finite global Wolff potential whose small-radius supremum does not vanish.

``f = sum_n rho_n^-p 1_{B(x_n, rho_n)}`` with centers packed so that
``|x_n - x_m| >= 4 rho_min(n,m)^e``, ``e = (N - p)/(N - 1)``.  Each bump
alone gives ``W_p^{f_n}(x_n, rho_n) = a_p`` at every scale, while the sum
stays bounded by ``b_p + c_p sum rho_n^e`` everywhere.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .density import BumpSum, unit_ball_volume
from .potential import wolff


class PackingError(ValueError):
    def __init__(self, message, max_feasible):
        super().__init__(message)
        self.max_feasible = max_feasible

    def __reduce__(self):
        return (type(self), (self.args[0], self.max_feasible))


@dataclass(frozen=True)
class CounterexampleSpec:
    """``rho_n = rho0 * q0**n`` for ``n = 1..n_terms``, centers on a lattice in ``[-half_width, half_width]^N``.

    ``spacing`` defaults to ``4 rho_1^e``, the largest packing distance.
    """

    N: int = 3
    p: float = 2.0
    rho0: float = 0.25
    q0: float = 0.25
    n_terms: int = 12
    half_width: float = 1.0
    spacing: float | None = None

    def __post_init__(self):
        if not 2 <= self.p < self.N:
            raise ValueError("need 2 <= p < N")
        if not (0 < self.q0 < 1 and 0 < self.rho0 * self.q0 < 1):
            raise ValueError("rho_n must be strictly decreasing in (0, 1)")
        if self.n_terms < 1:
            raise ValueError("n_terms must be positive")

    @property
    def e(self) -> float:
        return (self.N - self.p) / (self.N - 1)

    def rho(self, n):
        return self.rho0 * self.q0 ** np.asarray(n, float)

    @property
    def radii(self) -> np.ndarray:
        return self.rho(np.arange(1, self.n_terms + 1))

    def series(self, start=1) -> float:
        """``sum_{n >= start} rho_n^e`` in closed form."""
        r = self.q0 ** self.e
        return float(self.rho0 ** self.e * r ** start / (1 - r))

    @property
    def lattice_spacing(self) -> float:
        return self.spacing if self.spacing is not None else 4.0 * float(self.rho(1)) ** self.e


@dataclass(frozen=True)
class AppendixConstants:
    """``a_p, b_p, c_p`` as rational multiples of ``omega_N^(1/(p-1))``."""

    N: int
    p: float

    @property
    def _pf(self) -> Fraction:
        return Fraction(self.p).limit_denominator(10 ** 9)

    @property
    def a_coef(self) -> Fraction:
        return (self._pf - 1) / self._pf

    @property
    def c_coef(self) -> Fraction:
        return (self._pf - 1) / (self.N - self._pf)

    @property
    def b_coef(self) -> Fraction:
        return self.a_coef + self.c_coef

    @property
    def unit(self) -> float:
        return unit_ball_volume(self.N) ** (1.0 / (self.p - 1.0))

    @property
    def a_p(self) -> float:
        return float(self.a_coef) * self.unit

    @property
    def b_p(self) -> float:
        return float(self.b_coef) * self.unit

    @property
    def c_p(self) -> float:
        return float(self.c_coef) * self.unit


def lattice_points(dim: int, spacing: float, half_width: float) -> np.ndarray:
    """Lattice ``spacing * Z^N`` inside the box, sorted by distance to 0 and then lexicographically."""
    k = int(math.floor(half_width / spacing + 1e-12))
    pts = [tuple(spacing * np.asarray(i, float)) for i in itertools.product(range(-k, k + 1), repeat=dim)]
    pts.sort(key=lambda v: (round(float(np.dot(v, v)), 12), v))
    return np.asarray(pts)


def place_centers(spec: CounterexampleSpec) -> np.ndarray:
    """Greedy placement: bump ``n`` takes the first lattice point compatible with all earlier centers."""
    cand = lattice_points(spec.N, spec.lattice_spacing, spec.half_width)
    req = 4.0 * spec.radii ** spec.e  # requirement for a pair is set by the larger bump
    taken = []
    used = np.zeros(len(cand), bool)
    for n in range(spec.n_terms):
        for j in np.flatnonzero(~used):
            if all(np.linalg.norm(cand[j] - cand[m_j]) >= req[min(n, m)] * (1 - 1e-12)
                   for m, m_j in enumerate(taken)):
                taken.append(j)
                used[j] = True
                break
        else:
            raise PackingError(f"only {n} bumps fit in the box with the packing constraint", n)
    return cand[taken]


def build(spec: CounterexampleSpec) -> BumpSum:
    centers = place_centers(spec)
    r = spec.radii
    f = BumpSum(centers, r, r ** (-spec.p), "counterexample")
    check_packing(spec, f)
    return f


def check_packing(spec: CounterexampleSpec, f: BumpSum) -> None:
    e = spec.e
    for i, j in itertools.combinations(range(len(f.radii)), 2):
        need = 4.0 * max(f.radii[i], f.radii[j]) ** e
        if np.linalg.norm(f.centers[i] - f.centers[j]) < need * (1 - 1e-12):
            raise PackingError(f"bumps {i + 1} and {j + 1} violate the packing constraint", min(i, j) + 1)


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LocalLower:
    values: np.ndarray  # W_p^{f_n}(x_n, rho_n)
    full_values: np.ndarray  # W_p^f(x_n, rho_n)
    a_p: float

    @property
    def max_rel_error(self) -> float:
        return float(np.max(np.abs(self.values / self.a_p - 1.0)))


def verify_local_lower(spec: CounterexampleSpec, density: BumpSum) -> LocalLower:
    p = spec.p
    vals, full = [], []
    for n in range(len(density.radii)):
        x, r = density.centers[n], float(density.radii[n])
        vals.append(wolff(density.term(n), x, r, 1.0, p))
        full.append(wolff(density, x, r, 1.0, p))
    return LocalLower(np.asarray(vals), np.asarray(full), AppendixConstants(spec.N, p).a_p)


def sample_points(spec: CounterexampleSpec, density: BumpSum, lattice_step: float | None = None,
                  far: float = 4.0) -> np.ndarray:
    """Centers, pairwise midpoints, a coarse box lattice and far-field points on the axes."""
    c = density.centers
    mids = [(c[i] + c[j]) / 2 for i, j in itertools.combinations(range(len(c)), 2)]
    step = lattice_step or spec.lattice_spacing / 2
    box = lattice_points(spec.N, step, spec.half_width + step)
    axes = np.vstack([s * far * np.eye(spec.N)[k] for k in range(spec.N) for s in (-1.0, 1.0)])
    pts = np.vstack([c] + ([np.asarray(mids)] if mids else []) + [box, axes])
    return np.unique(np.round(pts, 14), axis=0)


@dataclass
class GlobalUpper:
    computed_max: float
    argmax: np.ndarray
    tail: float
    bound: float
    violations: list  # (check, x, n, value, limit)
    values: np.ndarray
    points: np.ndarray

    @property
    def lhs(self) -> float:
        return self.computed_max + self.tail

    @property
    def margin(self) -> float:
        return self.bound - self.lhs

    @property
    def ok(self) -> bool:
        return self.margin >= 0 and not self.violations


def verify_global_upper(spec: CounterexampleSpec, density: BumpSum, x_sample=None, tol: float = 1e-8) -> GlobalUpper:
    """``max_x W_p^f(x, inf)`` over the sample against ``b_p + c_p sum_n rho_n^e``.

    Also checks, at every sample point, subadditivity ``W^f <= sum_n W^{f_n}``,
    the near bound ``W^{f_n} <= b_p``, the far bound ``W^{f_n} <= c_p rho_n^e``,
    and that at most one bump is near.
    """
    p, e = spec.p, spec.e
    k = AppendixConstants(spec.N, p)
    pts = sample_points(spec, density) if x_sample is None else np.atleast_2d(np.asarray(x_sample, float))
    radii = density.radii
    reach = radii + radii ** e
    vals = np.empty(len(pts))
    violations = []
    for i, x in enumerate(pts):
        w = wolff(density, x, math.inf, 1.0, p)
        vals[i] = w
        d = np.linalg.norm(density.centers - x, axis=1)
        near = d < reach
        if np.count_nonzero(near) > 1:
            violations.append(("disjointness", x, np.flatnonzero(near) + 1, int(np.count_nonzero(near)), 1))
        parts = np.empty(len(radii))
        for n in range(len(radii)):
            parts[n] = wolff(density.term(n), x, math.inf, 1.0, p)
            limit = k.b_p if near[n] else k.c_p * radii[n] ** e
            if parts[n] > limit * (1 + tol):
                violations.append(("near" if near[n] else "far", x, n + 1, parts[n], limit))
        if w > parts.sum() * (1 + tol):
            violations.append(("subadditivity", x, None, w, parts.sum()))
    j = int(np.argmax(vals))
    tail = k.c_p * spec.series(spec.n_terms + 1)
    bound = k.b_p + k.c_p * spec.series(1)
    return GlobalUpper(float(vals[j]), pts[j], tail, bound, violations, vals, pts)
