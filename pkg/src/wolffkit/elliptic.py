"""Radial Dirichlet problems for the p-Laplacian and Hardy-type checks.

For a radial ``f >= 0`` on ``B_R`` the solution of ``-Δ_p u = f``, ``u = 0`` on
the sphere, is explicit:

    u(r) = ∫_r^R (ρ^(1-N) m(ρ))^(1/(p-1)) dρ,    m(ρ) = ∫_0^ρ s^(N-1) f(s) ds,

so the solver is a cumulative quadrature of exact ball masses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .density import Density, RadialProfile, sphere_area
from .potential import DivergentPotential, QuadratureSpec, WolffQuery, wolff_eval
from .quadrature import DivergentIntegral, gauss_legendre, log_nodes, shell_integral
from .testfunctions import AxisymmetricQuadrature, TestFunction


@dataclass(frozen=True)
class RadialGrid:
    R: float
    n_nodes: int = 256
    spacing: str = "uniform"
    r_min: float | None = None

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("R must be positive")
        if self.n_nodes < 64:
            raise ValueError("RadialGrid needs at least 64 nodes")
        if self.spacing not in ("uniform", "log"):
            raise ValueError("spacing must be 'uniform' or 'log'")

    @property
    def nodes(self) -> np.ndarray:
        if self.spacing == "uniform":
            return np.linspace(0.0, self.R, self.n_nodes)
        r_min = self.r_min if self.r_min is not None else self.R * 1e-6
        if not 0 < r_min < self.R:
            raise ValueError("log grid needs 0 < r_min < R")
        return np.geomspace(r_min, self.R, self.n_nodes)

    def refined(self, factor=2):
        return RadialGrid(self.R, (self.n_nodes - 1) * factor + 1, self.spacing, self.r_min)


def _phi(f: RadialProfile, p):
    """``ρ -> (ρ^(1-N) m(ρ))^(1/(p-1))`` with ``m`` the mass per unit solid angle."""
    area = sphere_area(f.dim)

    def phi(rho):
        rho = np.asarray(rho, float)
        m = f.radial_mass(rho.ravel()).reshape(rho.shape) / area
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = (np.maximum(m, 0.0) * rho ** (1.0 - f.dim)) ** (1.0 / (p - 1.0))
        return np.where(rho > 0, out, 0.0)
    return phi


def _cell_integrals(phi, a, b, n=16):
    r, w = log_nodes(a, b, n)
    return np.sum(phi(r) * w, axis=-1)


@dataclass
class RadialSolution:
    grid: RadialGrid
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    f: RadialProfile
    p: float
    u0: float  # u at the center; inf when -Δ_p u = f has an unbounded solution

    def _phi(self):
        return _phi(self.f, self.p)

    def at(self, r) -> np.ndarray:
        """Exact ``u`` at arbitrary radii (same cumulative quadrature as the nodes)."""
        r = np.atleast_1d(np.asarray(r, float))
        out = np.empty(r.shape)
        j = np.clip(np.searchsorted(self.r, r, side="right"), 0, self.r.size - 1)
        top = self.r[j]
        zero = r <= 0
        out[zero] = self.u0
        below = (r > 0) & (r < self.r[0])
        inside = ~(zero | below) & (r < self.grid.R)
        outside = r >= self.grid.R
        out[outside] = 0.0
        phi = self._phi()
        if np.any(inside):
            out[inside] = self.u[j[inside]] + _cell_integrals(phi, r[inside], top[inside])
        if np.any(below):
            out[below] = self.u[0] + _cell_integrals(phi, r[below], np.full(np.sum(below), self.r[0]))
        return out

    def du_at(self, r) -> np.ndarray:
        r = np.asarray(r, float)
        return np.where(r < self.grid.R, -self._phi()(r), 0.0)

    def flux_identity_error(self) -> float:
        """max relative error of ``r^(N-1)|u'|^(p-2)u' = -m(r)`` at nodes."""
        n = self.f.dim
        r = self.r[self.r > 0]
        du = self.du[self.r > 0]
        m = self.f.radial_mass(r) / sphere_area(n)
        lhs = r ** (n - 1) * np.abs(du) ** (self.p - 2) * du
        scale = np.maximum(np.abs(m), 1e-300)
        ok = m > 0
        return float(np.max(np.abs(lhs[ok] + m[ok]) / scale[ok])) if np.any(ok) else float(np.max(np.abs(lhs)))


def solve_radial_dirichlet(f: RadialProfile, p: float, grid: RadialGrid) -> RadialSolution:
    """Exact radial solution sampled on ``grid``; raises DivergentIntegral if ``f`` is not integrable."""
    if not isinstance(f, RadialProfile):
        raise TypeError("solve_radial_dirichlet needs a RadialProfile")
    if f.center is not None and np.any(np.asarray(f.center) != 0):
        raise ValueError("the profile must be centered at the origin")
    if p <= 1:
        raise ValueError("p must exceed 1")
    r = grid.nodes
    f.radial_mass(np.array([grid.R]))  # integrability check
    phi = _phi(f, p)
    pos = r > 0
    cells = np.zeros(r.size - 1)
    a, b = r[:-1], r[1:]
    inner = a > 0
    cells[inner] = _cell_integrals(phi, a[inner], b[inner])
    if not np.all(inner):
        cells[~inner] = shell_integral(phi, b[0]).total
    u = np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]])
    du = np.zeros(r.size)
    du[pos] = -phi(r[pos])
    if r[0] == 0:
        u0 = float(u[0])
    else:
        try:
            u0 = float(u[0] + shell_integral(phi, r[0]).total)
        except DivergentIntegral:
            u0 = math.inf
    return RadialSolution(grid, r, u, du, f, p, u0)


def radial_residual(sol: RadialSolution) -> np.ndarray:
    """Finite-volume residual of ``-Δ_p u = f`` at interior nodes, relative to the cell mass."""
    r, u, n, p = sol.r, sol.u, sol.f.dim, sol.p
    h = np.diff(r)
    z = np.diff(u) / h
    mid = 0.5 * (r[:-1] + r[1:])
    flux = mid ** (n - 1) * np.abs(z) ** (p - 2) * z
    area = sphere_area(n)
    m = sol.f.radial_mass(mid) / area
    cell = np.diff(m)
    res = (flux[1:] - flux[:-1]) + cell
    return np.abs(res) / np.maximum(np.abs(cell), 1e-300)


# ---------------------------------------------------------------------------
# sup bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SupBound:
    sup_u: float
    sup_wolff: float
    ratio: float
    consistent: bool


def verify_sup_bound(f: RadialProfile, p: float, grid: RadialGrid, n_sample: int = 9,
                     spec: QuadratureSpec = QuadratureSpec()) -> SupBound:
    """``sup u`` against ``sup_{|x|<R} W_p^f(x, 2R)``; ratio 1 for ``0/0``."""
    sol = solve_radial_dirichlet(f, p, grid)
    R = grid.R
    sup_w = 0.0
    consistent = True
    for t in np.linspace(0.0, 1.0, n_sample, endpoint=False):
        x = np.zeros(f.dim)
        x[0] = t * R
        try:
            w = wolff_eval(f, WolffQuery(1.0, p, tuple(x), 2.0 * R), spec)
        except DivergentPotential:
            w = math.inf
        sup_w = max(sup_w, w)
    sup_u = sol.u0
    if sup_u == 0.0 and sup_w == 0.0:
        ratio = 1.0
    elif math.isinf(sup_w):
        ratio = 0.0 if math.isfinite(sup_u) else math.nan
        consistent = not math.isfinite(sup_u)
    else:
        ratio = sup_u / sup_w
    return SupBound(sup_u, sup_w, ratio, consistent)


# ---------------------------------------------------------------------------
# Hardy inequalities
# ---------------------------------------------------------------------------

def solution_theta(sol: RadialSolution, name="h") -> TestFunction:
    """``theta = h`` itself, with exact values and gradient."""

    def fn(rho, z):
        s = np.hypot(rho, z)
        v = sol.at(s.ravel()).reshape(s.shape)
        d = sol.du_at(s)
        with np.errstate(invalid="ignore", divide="ignore"):
            ds = np.where(s > 0, d / np.where(s > 0, s, 1.0), 0.0)
        return v, ds * rho, ds * z
    return TestFunction(name, fn, 2 * sol.grid.R)


def _grid_quadrature(sol: RadialSolution, n_mu):
    """Midpoint rule on the solution's grid cells: in ``r`` for uniform grids,
    in ``log r`` for log-refined ones (plus the cell at the center)."""
    r = sol.r
    if sol.grid.spacing == "log":
        mid = np.sqrt(r[:-1] * r[1:])
        w = mid * np.diff(np.log(r))
        mid = np.concatenate([[0.5 * r[0]], mid])
        w = np.concatenate([[r[0]], w])
        return AxisymmetricQuadrature.build(sol.f.dim, mid, w, n_mu)
    edges = r if r[0] == 0 else np.concatenate([[0.0], r])
    mid = 0.5 * (edges[:-1] + edges[1:])
    return AxisymmetricQuadrature.build(sol.f.dim, mid, np.diff(edges), n_mu)


@dataclass
class HardyReport:
    names: list
    ratios: np.ndarray
    bounded_ratios: np.ndarray

    @property
    def max_ratio(self):
        return float(np.max(self.ratios))

    @property
    def max_bounded_ratio(self):
        return float(np.max(self.bounded_ratios))


def hardy_check(h: RadialSolution, p: float, theta_family, n_mu: int = 24) -> HardyReport:
    """Ratios ``∫ f/h^(p-1) |θ|^p / ∫|∇θ|^p`` and ``∫ f|θ|^p / (‖h‖∞^(p-1) ∫|∇θ|^p)``.

    ``f = -Δ_p h`` is the density ``h`` was solved for; nothing is
    differentiated numerically.  Integrals use the midpoint rule on the
    cells of ``h.grid`` so the excess over 1 reflects the grid.
    """
    if np.any(h.u[:-1] <= 0):
        raise ValueError("h must be positive in the open ball")
    if not math.isfinite(h.u0):
        raise ValueError("h is unbounded; use the unweighted check only with bounded h")
    quad = _grid_quadrature(h, n_mu)
    hr = h.at(quad.r)
    fr = h.f.evaluate(np.column_stack([quad.r, np.zeros((quad.r.size, h.f.dim - 1))]))
    weight = quad.radial(lambda _: fr / hr ** (p - 1))
    plain = quad.radial(lambda _: fr)
    rho, z = quad.points
    names, ratios, bounded = [], [], []
    hinf = h.u0 ** (p - 1)
    for theta in theta_family:
        v, dr, dz = theta(rho, z)
        vp = np.abs(v) ** p
        den = quad.integrate(np.hypot(dr, dz) ** p)
        names.append(theta.name)
        ratios.append(quad.integrate(weight * vp) / den)
        bounded.append(quad.integrate(plain * vp) / (hinf * den))
    return HardyReport(names, np.asarray(ratios), np.asarray(bounded))


# ---------------------------------------------------------------------------
# weighted Poincaré-type corollaries
# ---------------------------------------------------------------------------

def cutoff_theta(R, rho, name="cutoff"):
    """``ξ = 1`` on ``B_R``, ``cos^2`` ramp to 0 at ``rho``; ``|∇ξ| <= π/(2(rho-R)) <= 2/(rho-R)``."""
    w = rho - R

    def phi(s):
        t = np.clip((s - R) / w, 0.0, 1.0)
        v = np.cos(0.5 * np.pi * t) ** 2
        d = np.where((s > R) & (s < rho), -np.pi / (2 * w) * np.sin(np.pi * t), 0.0)
        return v, d

    def fn(rr, z):
        s = np.hypot(rr, z)
        v, d = phi(s)
        with np.errstate(invalid="ignore", divide="ignore"):
            ds = np.where(s > 0, d / np.where(s > 0, s, 1.0), 0.0)
        return v, ds * rr, ds * z
    return TestFunction(name, fn, 2 * rho)


@dataclass
class PoincareReport:
    gamma_hardy: float
    gamma_pk: float
    ratios_hardy: np.ndarray
    ratios_pk: np.ndarray
    names: list
    sup_w_R: float
    sup_w_rho: float
    inconsistent: bool = False
    notes: list = field(default_factory=list)


def _sup_wolff(f, p, radius, n_sample, spec):
    best = 0.0
    for t in np.linspace(0.0, 1.0, n_sample):
        x = np.zeros(f.dim)
        x[0] = t * radius
        best = max(best, wolff_eval(f, WolffQuery(1.0, p, tuple(x), radius), spec))
    return best


def weighted_poincare_check(f: Density, p: float, R: float, theta_family, rho: float, n_mu: int = 24,
                            n_sample: int = 9, spec: QuadratureSpec = QuadratureSpec()) -> PoincareReport:
    """Empirical constants of the two weighted Poincaré-type corollaries.

    First: ``∫_{B_R} f|θ|^p / (sup_{B_2R} W_p^f(·,2R)^(p-1) ∫|∇θ|^p)`` for θ
    vanishing on ``∂B_R``.  Second: the same numerator over
    ``sup_{B_2ρ} W_p^f(·,2ρ)^(p-1) (∫_{B_ρ}|∇θ|^p + (ρ-R)^-p ∫_{B_ρ}|θ|^p)``
    with the cutoff ``ξ`` appended to the family.  ``f`` is sampled on
    ``(rho, 0, ..., z)`` and should be axisymmetric about the last axis.
    """
    if rho <= R:
        raise ValueError("rho must exceed R")
    sw_R = _sup_wolff(f, p, 2 * R, n_sample, spec)
    sw_rho = _sup_wolff(f, p, 2 * rho, n_sample, spec)
    e1 = np.geomspace(R * 1e-8, R, 49)
    e2 = np.linspace(R, rho, 17)
    r1, w1 = log_nodes(e1[:-1], e1[1:], 8)
    x, w = gauss_legendre(8)
    r2 = 0.5 * (e2[:-1, None] + e2[1:, None]) + 0.5 * np.diff(e2)[:, None] * x
    w2 = 0.5 * np.diff(e2)[:, None] * w
    quad = AxisymmetricQuadrature.build(f.dim, np.concatenate([r1.ravel(), r2.ravel()]),
                                        np.concatenate([w1.ravel(), w2.ravel()]), n_mu)
    rr, z = quad.points
    pts = np.zeros(rr.shape + (f.dim,))
    pts[..., 0] = rr
    pts[..., -1] = z
    fv = f.evaluate(pts) * (quad.r[:, None] < R)
    inball = np.broadcast_to((quad.r < R)[:, None], rr.shape)
    family = list(theta_family) + [cutoff_theta(R, rho)]
    ratios1, ratios2, names = [], [], []
    inconsistent = False
    for k, theta in enumerate(family):
        v, dr, dz = theta(rr, z)
        num = quad.integrate(fv * np.abs(v) ** p)
        g_ball = quad.integrate(np.where(inball, np.hypot(dr, dz) ** p, 0.0))
        g_all = quad.integrate(np.hypot(dr, dz) ** p)
        m_all = quad.integrate(np.abs(v) ** p)
        names.append(theta.name)
        if k < len(family) - 1:
            d1 = sw_R ** (p - 1) * g_ball
            ratios1.append(_safe_ratio(num, d1))
        d2 = sw_rho ** (p - 1) * (g_all + m_all / (rho - R) ** p)
        ratios2.append(_safe_ratio(num, d2))
        if num > 0 and (sw_R == 0 or sw_rho == 0):
            inconsistent = True
    r1a, r2a = np.asarray(ratios1), np.asarray(ratios2)
    return PoincareReport(float(np.max(r1a)) if r1a.size else 0.0, float(np.max(r2a)), r1a, r2a, names,
                          sw_R, sw_rho, inconsistent)


def _safe_ratio(num, den):
    if num == 0.0:
        return 0.0
    if den == 0.0:
        return math.inf
    return num / den
