"""Gradient norms on interior cylinders, the refinement threshold scan,
the Wolff-type hypothesis report and the parabolic scaling map.

Everything here is refinement-stability evidence: a classification such as
"Lipschitz-consistent" says the discrete sup of ``|∇u|`` stopped moving
under nested refinement, not that the continuous gradient is bounded.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .density import Density, ZeroDensity, log_power_density
from .elliptic import RadialGrid
from .parabolic import (
    IntervalGrid, ParabolicProblem, ParabolicSolution, SolverFailure, SpaceTimeGrid,
    StructureCoefficients, VectorFieldSpec, _mesh, dyadic_graded_nodes, regularize, solve_ivbp,
)
from .potential import DivergentPotential, wolff
from .quadrature import DivergentIntegral

STABILITY_TOL = 0.02


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CylinderRegion:
    """``B' x (t_lo, t_hi)`` with ``B' = (center - radius, center + radius)`` or the radial ball of that radius."""

    radius: float
    t_lo: float
    t_hi: float
    center: float = 0.0

    def __post_init__(self):
        if self.radius <= 0 or self.t_hi <= self.t_lo:
            raise ValueError("empty cylinder")

    def margin(self, sol: ParabolicSolution, mirror: bool = False) -> float:
        x, t0 = sol.x, sol.t[0]
        if sol.grid.geometry == "radial" or mirror:
            space = x[-1] - (abs(self.center) + self.radius)
        else:
            space = min(self.center - self.radius - x[0], x[-1] - self.center - self.radius)
        if self.t_hi > sol.t[-1] * (1 + 1e-12) + 1e-300:
            return -math.inf
        return min(space, self.t_lo - t0)


@dataclass(frozen=True)
class NormReport:
    q_grid: tuple
    lq: dict  # q -> ||∇u||_{L^q(Q')}
    esssup: dict  # q -> max_t ∫_{B'} |∇u|^{q-p+2}
    sup: float
    level: object = None
    measure: float = 0.0


def _space_weights(sol, region, mirror):
    """Control-volume weights clipped to ``B'``; ``mirror`` doubles a half-domain that stands for ``(-b, b)``."""
    m = _mesh(sol.problem)
    lo, hi = m.cv_lo, m.cv_hi
    if sol.grid.geometry == "radial":
        a, b = 0.0, region.radius
    elif mirror:
        a, b = 0.0, region.radius
    else:
        a, b = region.center - region.radius, region.center + region.radius
    clo, chi = np.maximum(lo, a), np.minimum(hi, b)
    frac = np.where(hi > lo, np.clip(chi - clo, 0.0, None) / np.where(hi > lo, hi - lo, 1.0), 0.0)
    w = m.volume * frac
    inside = (sol.x >= a) & (sol.x <= b)
    return (2.0 * w if mirror else w), inside


def _time_weights(t, region):
    lo = np.maximum(t[:-1], region.t_lo)
    hi = np.minimum(t[1:], region.t_hi)
    w = np.zeros(t.size)
    w[1:] = np.clip(hi - lo, 0.0, None)
    inside = (t >= region.t_lo) & (t <= region.t_hi)
    return w, inside


def norms(sol: ParabolicSolution, region: CylinderRegion, q_grid=(2, 4, 8), mirror: bool = False,
          level=None) -> NormReport:
    """Midpoint-rule ``L^q`` norms of ``|∇u|`` over the cylinder, the ess-sup-in-time energy and the nodal sup."""
    if region.margin(sol, mirror) <= 0:
        raise ValueError("cylinder must stay away from the parabolic boundary")
    ws, xin = _space_weights(sol, region, mirror)
    wt, tin = _time_weights(sol.t, region)
    g = np.abs(sol.grad)
    p = sol.problem.spec.p
    lq, ess = {}, {}
    for q in q_grid:
        lq[q] = float(np.sum(wt[:, None] * ws[None, :] * g ** q)) ** (1.0 / q)
        ess[q] = float(np.max(np.sum(ws[None, :] * g[tin] ** (q - p + 2), axis=1)))
    sup = float(np.max(g[np.ix_(tin, xin)]))
    return NormReport(tuple(q_grid), lq, ess, sup, level, float(np.sum(ws) * np.sum(wt)))


# ---------------------------------------------------------------------------
# threshold scan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanSetup:
    """Model and discretization for :func:`threshold_scan`.

    ``model="odd"``: the interval ``(-1, 1)`` with forcing
    ``sign(x) f_alpha(|x|)``, solved on ``[0, 1]`` with ``u(0) = 0`` and
    refined by nested dyadic grading toward 0 (``depth0 + depth_step * level``
    octaves).  ``model="radial"``: the ball of dimension ``dim`` with
    ``f_alpha(|x|)``, uniform nested refinement ``n_base * 2**level + 1``.
    """

    model: str = "odd"
    T: float = 1.0
    dt: float = 0.02
    eps: float = 1e-6
    depth0: int = 140
    depth_step: int = 40
    n_base: int = 32
    dim: int = 3
    region: CylinderRegion = field(default_factory=lambda: CylinderRegion(0.5, 0.5, 1.0))

    def __post_init__(self):
        if self.model not in ("odd", "radial"):
            raise ValueError("model must be 'odd' or 'radial'")


def scan_problem(p, alpha, level, setup: ScanSetup) -> ParabolicProblem:
    """Zero data on the unit domain, forcing ``|x|^-1 log(1/|x|)^-alpha 1_{|x|<1/2}`` (``alpha=None``: no forcing)."""
    spec = VectorFieldSpec(p=p)
    spec = regularize(spec, setup.eps) if p != 2 else spec
    if setup.model == "odd":
        space = IntervalGrid(custom=tuple(dyadic_graded_nodes(1.0, setup.depth0 + setup.depth_step * level,
                                                              setup.n_base)))
        dim = 1
    else:
        space = RadialGrid(1.0, setup.n_base * 2 ** (level + 1) + 1)
        dim = setup.dim
    grid = SpaceTimeGrid(space, 0.0, setup.T, setup.dt, 1.0, dim=dim)
    forcing = ZeroDensity(dim) if alpha is None else log_power_density(1.0, alpha, 0.5, dim)
    return ParabolicProblem(spec, grid, _zero, forcing=forcing)


def _zero(x):
    return np.zeros_like(np.asarray(x, float))


@dataclass(frozen=True)
class ScanRow:
    p: float
    alpha: object
    level: int
    status: str
    sup: float = math.nan
    lq: dict = field(default_factory=dict)
    n_nodes: int = 0
    h_min: float = math.nan


def _scan_cell(args):
    p, alpha, level, setup, q_grid = args
    prob = scan_problem(p, alpha, level, setup)
    x = prob.grid.x
    h_min = float(np.min(np.diff(x)))
    try:
        sol = solve_ivbp(prob)
    except SolverFailure as exc:
        return ScanRow(p, alpha, level, f"failed: {exc}", n_nodes=x.size, h_min=h_min)
    rep = norms(sol, setup.region, q_grid, mirror=setup.model == "odd", level=level)
    return ScanRow(p, alpha, level, "ok", rep.sup, rep.lq, x.size, h_min)


def _rel_changes(v):
    v = np.asarray(v, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.abs(np.diff(v)) / np.abs(v[:-1])
    return np.where(np.abs(np.diff(v)) == 0, 0.0, c)


def classify(rows, q_grid, tol=STABILITY_TOL) -> str:
    """Label one (p, alpha) refinement sequence from its last two successive changes."""
    if any(r.status != "ok" for r in rows):
        return "failed"
    if len(rows) < 3:
        return "inconclusive"
    sups = [r.sup for r in rows]
    sup_last = _rel_changes(sups)[-2:]
    if np.all(sup_last < tol):
        return "Lipschitz-consistent"
    growing = np.all(np.diff(sups) > 0)
    lq_stable = all(np.all(_rel_changes([r.lq[q] for r in rows])[-2:] < tol) for q in q_grid)
    if growing and np.all(sup_last >= tol) and lq_stable:
        return "sup-divergent, L^q-stable"
    return "inconclusive"


@dataclass
class ThresholdScan:
    rows: list
    labels: dict  # (p, alpha) -> label
    q_grid: tuple
    setup: ScanSetup

    def csv_rows(self):
        """Long format: one row per (p, alpha, level, quantity)."""
        out = []
        for r in self.rows:
            base = {"p": r.p, "alpha": "none" if r.alpha is None else r.alpha, "level": r.level,
                    "n_nodes": r.n_nodes, "h_min": r.h_min, "status": r.status}
            out.append(dict(base, quantity="sup", q="inf", value=r.sup))
            for q in self.q_grid:
                out.append(dict(base, quantity="Lq", q=q, value=r.lq.get(q, math.nan)))
        return out


def threshold_scan(alphas=(0.5, 1.5), p_values=(2.0, 3.0), levels=(0, 1, 2, 3), q_grid=(4, 8),
                   setup: ScanSetup | None = None, jobs: int = 1, tol: float = STABILITY_TOL) -> ThresholdScan:
    """Solve every (p, alpha, level) cell and classify each (p, alpha).

    Cells run in a process pool when ``jobs > 1``; the table is assembled
    in key order so the output does not depend on completion order.
    """
    setup = setup or ScanSetup()
    keys = [(p, a, lv) for p in p_values for a in alphas for lv in levels]
    args = [(p, a, lv, setup, tuple(q_grid)) for p, a, lv in keys]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_scan_cell, args))
    else:
        rows = [_scan_cell(a) for a in args]
    labels = {}
    for p in p_values:
        for a in alphas:
            seq = [r for r in rows if r.p == p and r.alpha == a]
            labels[(p, a)] = classify(seq, q_grid, tol)
    return ThresholdScan(rows, labels, tuple(q_grid), setup)


# ---------------------------------------------------------------------------
# hypothesis report
# ---------------------------------------------------------------------------

@dataclass
class ConditionReport:
    rows: list  # dicts: condition, term, R, value (sup over the sample)
    composite: dict  # R -> value, the six-term W_{2/3,3} sum
    composite_of_sum: dict  # R -> W_{2/3,3} of f^2 + ... + g2^2
    main_first: dict  # R -> W_p^{g^p} + W_p^{g1^p}
    aposteriori: dict  # R -> the four-term W_p sum
    nu_main: float
    nu_aposteriori: float

    @staticmethod
    def _last(curve):
        return curve[min(curve)]

    @property
    def main_holds(self) -> bool:
        return self._last(self.composite) < self.nu_main and self._last(self.main_first) < self.nu_main

    @property
    def aposteriori_holds(self) -> bool:
        return self._last(self.aposteriori) < self.nu_aposteriori


def _sup_potential(f: Density, points, R, beta, p):
    if isinstance(f, ZeroDensity):
        return 0.0
    best = 0.0
    for x in points:
        try:
            best = max(best, wolff(f, x, R, beta, p))
        except (DivergentPotential, DivergentIntegral):
            return math.inf
    return best


class _SumDensity(Density):
    """Pointwise sum of densities of one dimension (ball masses add)."""

    def __init__(self, parts):
        self.parts = [f for f in parts if not isinstance(f, ZeroDensity)]
        self.dim = parts[0].dim

    def ball_mass(self, x, r):
        out = np.zeros(np.shape(np.atleast_1d(r)))
        for f in self.parts:
            out = out + f.ball_mass(x, r)
        return out

    def breakpoints(self, x):
        bps = [f.breakpoints(x) for f in self.parts]
        return np.unique(np.concatenate(bps)) if bps else np.empty(0)

    def outer_radius(self, x):
        return max((f.outer_radius(x) for f in self.parts), default=0.0)

    def total_mass(self):
        return sum(f.total_mass() for f in self.parts)

    def singular_points(self):
        return [s for f in self.parts for s in f.singular_points()]


def wolff_condition_report(coeffs: StructureCoefficients, domain_sample, R_grid, nu_main: float = 0.1,
                           nu_aposteriori: float = 0.1) -> ConditionReport:
    """Every potential named in the gradient hypotheses, as a sup over ``domain_sample`` for each ``R``.

    Infinite entries mean the potential diverges at some sample point.
    """
    p = coeffs.p
    dens = coeffs.densities()
    if not dens:
        zero = {float(R): 0.0 for R in R_grid}
        return ConditionReport([], zero, dict(zero), dict(zero), dict(zero), nu_main, nu_aposteriori)
    dim = next(iter(dens.values())).dim
    get = lambda k: dens.get(k, ZeroDensity(dim))  # noqa: E731
    points = [np.asarray(x, float) for x in domain_sample]
    squares = {k: get(k).power(2) for k in ("f", "g", "f1", "g1", "f2", "g2")}
    first = {"g^p": get("g").power(p), "g1^p": get("g1").power(p)}
    apost = {"f": get("f"), "f1^(p/(p-1))": get("f1").power(p / (p - 1.0)), **first}
    rows, comp, comp_sum, mfirst, ap = [], {}, {}, {}, {}
    for R in R_grid:
        R = float(R)
        vals = {}
        for k, f in squares.items():
            vals[("main-composite", k + "^2")] = _sup_potential(f, points, R, 2.0 / 3.0, 3.0)
        for k, f in first.items():
            vals[("main-first", k)] = _sup_potential(f, points, R, 1.0, p)
        for k, f in apost.items():
            vals[("aposteriori", k)] = vals.get(("main-first", k), None) if k in first else \
                _sup_potential(f, points, R, 1.0, p)
        for (cond, term), v in vals.items():
            rows.append({"condition": cond, "term": term, "R": R, "value": v})
        comp[R] = sum(v for (c, _), v in vals.items() if c == "main-composite")
        mfirst[R] = sum(v for (c, _), v in vals.items() if c == "main-first")
        ap[R] = sum(v for (c, _), v in vals.items() if c == "aposteriori")
        total = _SumDensity(list(squares.values()))
        comp_sum[R] = _sup_potential(total, points, R, 2.0 / 3.0, 3.0) if total.parts else 0.0
        rows.append({"condition": "main-composite", "term": "sum-of-squares", "R": R, "value": comp_sum[R]})
    return ConditionReport(rows, comp, comp_sum, mfirst, ap, nu_main, nu_aposteriori)


# ---------------------------------------------------------------------------
# scaling
# ---------------------------------------------------------------------------

def scale_coefficients(coeffs: StructureCoefficients, lam: float) -> StructureCoefficients:
    """``f -> lam^(1-p) f``, ``f1 -> lam^(2-p) f1``, ``f2 -> lam^(1-p) f2``; the g's are unchanged."""
    p = coeffs.p
    powers = {"f": 1.0 - p, "f1": 2.0 - p, "f2": 1.0 - p}
    new = {k: (getattr(coeffs, k).scale(lam ** e) if getattr(coeffs, k) is not None else None)
           for k, e in powers.items()}
    return replace(coeffs, **new)


def _scale_problem(prob: ParabolicProblem, lam: float) -> ParabolicProblem:
    p = prob.spec.p
    if prob.spec.eps > 0 and p != 2:
        raise ValueError("the regularized field is not scale invariant for p != 2")
    g = prob.grid
    s = lam ** (p - 2.0)  # tau = s t
    grid = replace(g, t0=s * g.t0, t1=s * g.t1, dt=s * g.dt, dt_min=s * g.dt_min)
    u0, bnd = prob.u0, prob.boundary
    src, su, sz = prob.source, prob.source_du, prob.source_dz
    kw = {}
    if src is not None:
        kw["source"] = lambda x, tau, v, z: lam ** (1 - p) * np.asarray(src(x, tau / s, lam * v, lam * z))
        kw["source_du"] = None if su is None else (
            lambda x, tau, v, z: lam ** (2 - p) * np.asarray(su(x, tau / s, lam * v, lam * z)))
        kw["source_dz"] = None if sz is None else (
            lambda x, tau, v, z: lam ** (2 - p) * np.asarray(sz(x, tau / s, lam * v, lam * z)))
    return replace(
        prob, grid=grid,
        u0=lambda x: np.asarray(u0(x)) / lam,
        boundary=lambda x, tau: np.asarray(bnd(x, tau / s)) / lam,
        coeffs=None if prob.coeffs is None else scale_coefficients(prob.coeffs, lam),
        forcing_scale=prob.forcing_scale * lam ** (1.0 - p), **kw)


def _apply(obj, lam):
    if isinstance(obj, StructureCoefficients):
        return scale_coefficients(obj, lam)
    if isinstance(obj, ParabolicProblem):
        return _scale_problem(obj, lam)
    if isinstance(obj, ParabolicSolution):
        s = lam ** (obj.problem.spec.p - 2.0)
        return ParabolicSolution(_scale_problem(obj.problem, lam), obj.x.copy(), s * obj.t, obj.u / lam,
                                 obj.grad / lam, obj.eps, list(obj.newton_stats))
    raise TypeError(f"cannot rescale {type(obj).__name__}")


def scaling_transform(obj, lam: float):
    """``v(x, tau) = u(x, t) / lam`` with ``tau = lam^(p-2) t``, for coefficients, problems or solutions."""
    if not lam > 1:
        raise ValueError("lambda must exceed 1")
    return _apply(obj, lam)


def inverse_scaling(obj, lam: float):
    """Undo :func:`scaling_transform` with the same ``lam``."""
    if not lam > 1:
        raise ValueError("lambda must exceed 1")
    return _apply(obj, 1.0 / lam)
