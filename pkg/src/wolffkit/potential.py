"""Wolff potentials, Kato-type scans and class embeddings.

The Wolff potential of a density ``f`` is

    W_{beta,p}^f(x, R) = ∫_0^R (r^(beta p - N) ∫_{B_r(x)} f)^(1/(p-1)) dr / r.

It is evaluated in the variable ``t = log r``: below the first radius where
the ball mass stops being smooth the integral is summed over dyadic shells
``[2^-k-1 r, 2^-k r]`` (closed with a fitted tail), between breakpoints an
adaptive Gauss rule is used, and beyond the support the integrand is an
exact power of ``r``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .density import Density
from .quadrature import DivergentIntegral, adaptive_log_integral, geometric_pieces, log_nodes, shell_integral


class InvalidQuery(ValueError):
    pass


class DivergentPotential(DivergentIntegral):
    """The Wolff potential is infinite; ``rate`` is the fitted decay exponent."""

    def __init__(self, message, rate, kind="geometric", center=None):
        super().__init__(message, rate, kind)
        self.center = center

    def __reduce__(self):
        return (type(self), (self.args[0], self.rate, self.kind, self.center))


@dataclass(frozen=True)
class WolffQuery:
    beta: float
    p: float
    center: tuple
    radius: float = math.inf

    def validate(self, dim: int):
        if self.beta <= 0:
            raise InvalidQuery("beta must be positive")
        if self.p <= 1:
            raise InvalidQuery("p must exceed 1")
        if not self.radius > 0:
            raise InvalidQuery("radius must be positive")
        if dim - self.beta * self.p <= 0 and math.isinf(self.radius):
            # finite radii stay well defined; only the tail beyond the support diverges
            raise InvalidQuery(f"N - beta*p = {dim - self.beta * self.p:g} must be positive for R = inf")
        if len(self.center) != dim:
            raise InvalidQuery("center has the wrong dimension")


@dataclass(frozen=True)
class QuadratureSpec:
    radial_nodes: int = 16
    dyadic_depth: int = 120
    abs_tol: float = 1e-14
    rel_tol: float = 1e-10

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.dyadic_depth < 8:
            raise ValueError("dyadic_depth must be at least 8")
        if self.radial_nodes < 2:
            raise ValueError("need at least two nodes per shell")


DEFAULT_SPEC = QuadratureSpec()


def _integrand(f: Density, x, bp, dim, expo):
    def g(r):
        r = np.asarray(r, float)
        m = f.ball_mass(x, r.ravel()).reshape(r.shape)
        if np.any(m < 0):
            m = np.maximum(m, 0.0)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return (r ** (bp - dim) * m) ** expo / r
    return g


def wolff_eval(f: Density, q: WolffQuery, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """``W_{beta,p}^f(center, radius)``; ``radius`` may be ``math.inf``.

    Raises :class:`DivergentPotential` when the integral diverges at ``r -> 0``
    and :class:`InvalidQuery` for an inadmissible query.
    """
    dim = f.dim
    q.validate(dim)
    x = np.asarray(q.center, float)
    bp = q.beta * q.p
    expo = 1.0 / (q.p - 1.0)
    gamma = (bp - dim) * expo
    g = _integrand(f, x, bp, dim, expo)

    r_out = f.outer_radius(x)
    if r_out <= 0 or f.total_mass() == 0.0:
        return 0.0
    r_eff = min(q.radius, r_out)
    bps = np.asarray(f.breakpoints(x), float)
    bps = bps[(bps > 0) & (bps < r_eff * (1 - 1e-14))]
    knots = np.concatenate([bps, [r_eff]])

    try:
        inner = shell_integral(g, knots[0], depth=spec.dyadic_depth, n=spec.radial_nodes,
                               rtol=spec.rel_tol, atol=spec.abs_tol).total
    except DivergentIntegral as exc:
        raise DivergentPotential(f"Wolff potential diverges at x={tuple(x)}: {exc}", exc.rate, exc.kind,
                                 tuple(x)) from exc
    total = inner
    for lo, hi in zip(knots[:-1], knots[1:]):
        for a, b in zip(*(lambda k: (k[:-1], k[1:]))(geometric_pieces(lo, hi))):
            total += adaptive_log_integral(g, a, b, n=max(spec.radial_nodes, 16),
                                           rtol=spec.rel_tol * 1e-2, atol=spec.abs_tol * 1e-2)
    if q.radius > r_out:
        if gamma == 0.0:
            total += f.total_mass() ** expo * math.log(q.radius / r_out)
            return float(total)
        mass = f.total_mass()
        far = 0.0 if math.isinf(q.radius) else q.radius ** gamma
        total += mass ** expo * (r_out ** gamma - far) / (-gamma)
    return float(total)


def wolff(f: Density, x, R=math.inf, beta=1.0, p=2.0, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Convenience wrapper around :func:`wolff_eval`."""
    return wolff_eval(f, WolffQuery(beta, p, tuple(np.asarray(x, float)), R), spec)


def dyadic_sums(f: Density, q: WolffQuery, n_shells: int = 200):
    """Shell sums bracketing the potential.

    Returns ``(lower_sum, upper_sum, c, C)`` with
    ``c * lower_sum <= W <= C * upper_sum``; the constants follow from
    monotonicity of the ball mass on each dyadic shell.
    """
    dim = f.dim
    q.validate(dim)
    if math.isinf(q.radius):
        raise InvalidQuery("dyadic sums need a finite radius")
    bp = q.beta * q.p
    expo = 1.0 / (q.p - 1.0)
    rk = q.radius * 2.0 ** (-np.arange(n_shells + 1))
    m = f.ball_mass(np.asarray(q.center, float), rk)
    terms = (rk ** (bp - dim) * m) ** expo
    c_lo = math.log(2.0) * 2.0 ** ((bp - dim) * expo)
    c_hi = math.log(2.0) * 2.0 ** ((dim - bp) * expo)
    return float(np.sum(terms[1:])), float(np.sum(terms)), c_lo, c_hi


# ---------------------------------------------------------------------------
# Kato-type scans
# ---------------------------------------------------------------------------

@dataclass
class KatoScan:
    beta: float
    p: float
    radii: np.ndarray
    sup_values: np.ndarray
    rows: list
    threshold: float
    classification: str
    argmax: list = field(default_factory=list)

    def csv_rows(self):
        return [{"x": " ".join(f"{v:.17g}" for v in x), "R": R, "value": val, "status": st}
                for x, R, val, st in self.rows]


def _sample_points(f: Density, domain_sample):
    pts = [np.zeros(f.dim)] + [np.asarray(c, float) for c in f.singular_points()]
    pts += [np.asarray(s, float) for s in domain_sample]
    uniq = []
    for pt in pts:
        if not any(np.array_equal(pt, u) for u in uniq):
            uniq.append(pt)
    return uniq


def kato_limit_scan(f: Density, beta: float, p: float, domain_sample, radii, threshold: float = 0.1,
                    spec: QuadratureSpec = DEFAULT_SPEC) -> KatoScan:
    """Empirical ``R -> sup_x W_{beta,p}^f(x, R)`` over a finite sample.

    The sample is extended by the origin and ``f.singular_points()``.  The
    curve is classified ``"consistent"`` when it is nonincreasing and ends
    below ``threshold``, else ``"inconsistent"``.  This is a diagnostic only.
    """
    radii = np.asarray(radii, float)
    if radii.ndim != 1 or radii.size < 2 or np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be a strictly decreasing list")
    pts = _sample_points(f, domain_sample)
    rows, sups, argmax = [], [], []
    divergent = False
    for R in radii:
        best, best_x = 0.0, pts[0]
        for x in pts:
            try:
                val, status = wolff_eval(f, WolffQuery(beta, p, tuple(x), float(R)), spec), "ok"
            except DivergentPotential:
                val, status = math.inf, "divergent"
                divergent = True
            rows.append((tuple(x), float(R), val, status))
            if val > best:
                best, best_x = val, x
        sups.append(best)
        argmax.append(tuple(best_x))
    sups = np.asarray(sups)
    decreasing = (not divergent) and bool(np.all(np.diff(sups) <= 1e-12 * np.maximum(sups[:-1], 1e-300)))
    ok = (not divergent) and decreasing and sups[-1] < threshold
    return KatoScan(beta, p, radii, sups, rows, threshold,
                    "consistent" if ok else "inconsistent", argmax)


# ---------------------------------------------------------------------------
# embedding between classes
# ---------------------------------------------------------------------------

class EmbeddingHypothesisError(ValueError):
    pass


def embedding_branch(alpha, beta, p, q, kappa, tol=1e-12) -> str:
    """Which hypothesis of the embedding holds; raises if neither does."""
    ratio = beta * p / (alpha * q)
    if kappa > max(ratio, 1.0) + tol:
        return "strict"
    if abs(kappa - ratio) <= tol * max(1.0, ratio) and 1.0 - tol <= kappa <= (p - 1) / (q - 1) + tol:
        return "critical"
    reasons = []
    if not kappa > max(ratio, 1.0):
        reasons.append(f"strict branch needs kappa > max(beta p/(alpha q), 1) = {max(ratio, 1.0):g}")
    if abs(kappa - ratio) > tol * max(1.0, ratio):
        reasons.append(f"critical branch needs kappa = beta p/(alpha q) = {ratio:g}")
    elif not 1.0 <= kappa <= (p - 1) / (q - 1):
        reasons.append(f"critical branch needs 1 <= kappa <= (p-1)/(q-1) = {(p - 1) / (q - 1):g}")
    raise EmbeddingHypothesisError("; ".join(reasons))


def embedding_exponents(alpha, beta, p, q, kappa, s):
    """R-exponents of both sides for ``f = |y|^-s``, in exact rational arithmetic.

    lhs ~ R^((alpha q - s/kappa)/(q-1));
    rhs ~ R^((kappa alpha q - beta p)/(kappa (q-1))) * R^((beta p - s)/(p-1) * (p-1)/(kappa (q-1))).
    """
    a, b, P, Q, k, s = (Fraction(v).limit_denominator(10 ** 9) for v in (alpha, beta, p, q, kappa, s))
    lhs = (a * Q - s / k) / (Q - 1)
    rhs = (k * a * Q - b * P) / (k * (Q - 1)) + (b * P - s) / (P - 1) * (P - 1) / (k * (Q - 1))
    return lhs, rhs


@dataclass(frozen=True)
class EmbeddingCheck:
    lhs: float
    rhs: float
    ratio: float
    branch: str


def class_embedding_check(f: Density, alpha, beta, p, q, kappa, x, R, c: float = 1.0,
                          spec: QuadratureSpec = DEFAULT_SPEC) -> EmbeddingCheck:
    """Both sides of the embedding ``W_{alpha,q}^{f^(1/kappa)}(x,R) <= c R^e W_{beta,p}^f(x,2R)^m``."""
    branch = embedding_branch(alpha, beta, p, q, kappa)
    x = tuple(np.asarray(x, float))
    lhs = wolff_eval(f.power(1.0 / kappa), WolffQuery(alpha, q, x, R), spec)
    w = wolff_eval(f, WolffQuery(beta, p, x, 2.0 * R), spec)
    e = (kappa * alpha * q - beta * p) / (kappa * (q - 1))
    m = (p - 1) / (kappa * (q - 1))
    rhs = c * R ** e * w ** m
    if rhs == 0.0:
        ratio = 1.0 if lhs == 0.0 else math.inf
    else:
        ratio = lhs / rhs
    return EmbeddingCheck(lhs, rhs, ratio, branch)


def calibrate_embedding(family, alpha, beta, p, q, kappa, points_and_radii, spec: QuadratureSpec = DEFAULT_SPEC):
    """Empirical constant ``c`` = sup of lhs/rhs over densities and (x, R)."""
    ratios = []
    for f in family:
        for x, R in points_and_radii:
            ratios.append(class_embedding_check(f, alpha, beta, p, q, kappa, x, R, spec=spec).ratio)
    ratios = np.asarray(ratios)
    return float(np.max(ratios)), ratios


# ---------------------------------------------------------------------------
# form boundedness
# ---------------------------------------------------------------------------

@dataclass
class FormBoundEstimate:
    """Empirical ``(beta_hat, C_hat)`` with ``∫Fθ² <= beta_hat ∫|∇θ|² + C_hat ∫θ²`` on the family.

    ``beta_hat`` is a lower estimate of the true form bound: a larger
    family can only increase it.
    """

    beta_hat: float
    C_hat: float
    tiers: list  # (scale, max over the tier of ∫Fθ²/∫|∇θ|²)
    n_functions: int


def pk_form_bound_estimate(F: Density, domain=(None, 1.0), test_family_size: int = 24, n_tiers: int = 4,
                           seed: int = 0, n_mu: int = 32, min_scale_ratio: float = 1e-4) -> FormBoundEstimate:
    """Estimate the form bound of ``F`` relative to the Laplacian on a ball.

    ``domain`` is ``(center, radius)``.  Test functions come in tiers of
    shrinking support scale; ``beta_hat`` is the largest ratio
    ``∫Fθ²/∫|∇θ|²`` within the finest tier and ``C_hat`` the smallest
    constant making the inequality hold for every member with that
    ``beta_hat``.  ``F`` is sampled on the axis-symmetric points
    ``center + (rho, 0, ..., z)``.
    """
    from .testfunctions import AxisymmetricQuadrature, concentrating_family

    center, R = domain
    dim = F.dim
    center = np.zeros(dim) if center is None else np.asarray(center, float)
    n_shells = 60
    quad = AxisymmetricQuadrature.on_ball(dim, R, n_shells=n_shells, n_per=8, n_mu=n_mu, r_min_ratio=1e-12)
    rho, z = quad.points
    pts = np.zeros(rho.shape + (dim,))
    pts[..., 0] = rho
    pts[..., -1] = z
    pts += center
    fv = np.asarray(F.evaluate(pts), float)
    if not np.all(np.isfinite(fv)):
        raise DivergentIntegral("F is not finite at the quadrature nodes", rate=np.nan)
    scales = np.geomspace(R, R * min_scale_ratio, n_tiers)
    per = max(4, int(math.ceil(test_family_size / n_tiers)))
    tiers = concentrating_family(R, dim, scales, seed=seed, size_per_scale=per)
    w = quad.weights()
    records = []
    tier_max = []
    for scale, members in tiers:
        best = 0.0
        for theta in members:
            v, dr, dzz = theta(rho, z)
            dens = fv * v ** 2 * w
            per_shell = dens.reshape(n_shells, -1).sum(axis=1)
            a = float(per_shell.sum())
            if per_shell[0] >= 0.9 * max(per_shell[1], 1e-300) and per_shell[0] > 1e-12 * abs(a):
                raise DivergentIntegral(f"∫F θ² does not converge at the center for {theta.name}", rate=0.0)
            g = float(np.sum((dr ** 2 + dzz ** 2) * w))
            m = float(np.sum(v ** 2 * w))
            records.append((a, g, m))
            best = max(best, a / g)
        tier_max.append((float(scale), best))
    beta_hat = tier_max[-1][1]
    c_hat = max(max(a - beta_hat * g, 0.0) / m for a, g, m in records)
    return FormBoundEstimate(beta_hat, c_hat, tier_max, len(records))
