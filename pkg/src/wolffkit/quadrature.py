"""Gauss rules in the logarithmic variable and dyadic shell sums near r = 0."""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import least_squares


class DivergentIntegral(ArithmeticError):
    """An integral over (0, r] does not converge at the lower limit.

    ``rate`` is the fitted exponent of the shell contributions: shells behave
    like ``2**(-rate*k)`` (geometric) or ``k**(-rate)`` (algebraic, when
    ``kind == "algebraic"``).  A non-positive geometric rate, or an algebraic
    rate <= 1, means divergence.
    """

    def __init__(self, message, rate, kind="geometric"):
        super().__init__(message)
        self.rate = rate
        self.kind = kind

    def __reduce__(self):
        return (type(self), (self.args[0], self.rate, self.kind))


@lru_cache(maxsize=None)
def gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def log_nodes(a, b, n):
    """Nodes and weights for ``∫_a^b g(r) dr`` after substituting ``t = log r``.

    ``a`` and ``b`` may be arrays of equal shape; the result then has shape
    ``a.shape + (n,)``.  Weights already include the Jacobian ``r``.
    """
    x, w = gauss_legendre(n)
    ta = np.log(np.asarray(a, float))[..., None]
    tb = np.log(np.asarray(b, float))[..., None]
    half = 0.5 * (tb - ta)
    r = np.exp(half * x + 0.5 * (tb + ta))
    return r, half * w * r


def linear_nodes(a, b, n):
    x, w = gauss_legendre(n)
    a = np.asarray(a, float)[..., None]
    b = np.asarray(b, float)[..., None]
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


def geometric_pieces(a, b, max_ratio=2.0):
    """Split [a, b] (0 < a < b) into pieces whose end ratio is <= max_ratio."""
    k = max(1, int(np.ceil(np.log(b / a) / np.log(max_ratio) - 1e-12)))
    return np.geomspace(a, b, k + 1)


@dataclass(frozen=True)
class ShellSum:
    total: float
    shells: np.ndarray
    tail: float
    tail_model: str


def shell_integral(g, r_top, depth=120, n=16, rtol=1e-10, atol=0.0, min_shells=8):
    """``∫_0^{r_top} g(r) dr`` summed over dyadic shells ``[2^-k-1 r, 2^-k r]``.

    ``g`` must accept a flat array of radii.  All ``depth`` shells are
    evaluated in one vectorised call; the remainder below the last shell is
    closed with a geometric or algebraic tail fitted to the last shells.
    Raises :class:`DivergentIntegral` when the fit says the sum diverges.
    """
    k = np.arange(depth)
    hi = r_top * 2.0 ** (-k)
    lo = hi * 0.5
    r, w = log_nodes(lo, hi, n)
    vals = np.asarray(g(r.ravel()), float).reshape(r.shape)
    shells = np.sum(vals * w, axis=1)
    if not np.all(np.isfinite(shells)):
        raise DivergentIntegral("integrand not finite near r = 0", rate=-np.inf)
    total = float(np.sum(shells))
    if total == 0.0:
        return ShellSum(0.0, shells, 0.0, "zero")
    last = shells[-1]
    tol = max(atol, rtol * abs(total))
    if abs(last) <= 1e-3 * tol and depth >= min_shells:
        # converged well before the end; tail is negligible
        q = _geometric_ratio(shells)
        tail = last * q / (1.0 - q) if q is not None and q < 1 else 0.0
        return ShellSum(total + tail, shells, tail, "geometric")
    q = _geometric_ratio(shells)
    if q is not None:
        if q >= 1.0:
            raise DivergentIntegral("shell contributions do not decay", rate=-np.log2(q))
        if q < 0.97 or _ratio_spread(shells) < 1e-6:
            tail = last * q / (1.0 - q)
            return ShellSum(total + tail, shells, tail, "geometric")
    # slow (logarithmic-type) decay: shells = F(k) - F(k+1), F(k) = C (k + k0)^-nu
    nu, k0, c = _algebraic_fit(shells)
    if not np.isfinite(nu):
        raise DivergentIntegral("shell contributions change sign near r = 0", rate=np.nan)
    if nu <= 1e-3:
        raise DivergentIntegral("shell contributions decay too slowly", rate=1.0 + nu, kind="algebraic")
    tail = c * (depth + k0) ** (-nu)
    return ShellSum(total + tail, shells, tail, "algebraic")


def _algebraic_fit(shells):
    """Least-squares fit of ``shells[k] = C ((k+k0)^-nu - (k+1+k0)^-nu)`` on the late shells.

    Parametrised by ``A = C nu`` so the fit stays well conditioned as ``nu -> 0``.
    Returns ``(nu, k0, C)``.
    """
    kk = len(shells) - 1
    k = np.arange(kk // 2, kk + 1, dtype=float)
    s = shells[kk // 2:]
    if np.any(s <= 0):
        return np.nan, 0.0, 0.0
    logs = np.log(s)
    if logs[-1] >= logs[0]:
        return 0.0, 0.0, 0.0

    def resid(prm):
        la, k0, nu = prm
        x = k + k0
        # log of ((x)^-nu - (x+1)^-nu) / nu, computed stably
        diff = -np.expm1(-nu * np.log1p(1.0 / x)) / nu
        with np.errstate(all="ignore"):
            r = la - nu * np.log(x) + np.log(diff) - logs
        return np.where(np.isfinite(r), r, 1e3)

    best = None
    for k0 in (0.0, 0.1 * kk, kk, 10.0 * kk):
        for nu in (1e-2, 0.5, 2.0):
            x = k[-1] + k0
            la = logs[-1] + nu * np.log(x) - np.log(-np.expm1(-nu * np.log1p(1.0 / x)) / nu)
            fit = least_squares(resid, [la, k0, nu], bounds=([-np.inf, -k[0] + 1e-3, 1e-9], [np.inf, 1e6, 50.0]),
                                xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
            if best is None or fit.cost < best.cost:
                best = fit
    la, k0, nu = best.x
    return float(nu), float(k0), float(np.exp(la) / nu)


def _ratio_spread(shells, window=6):
    tail = shells[-window:]
    if np.any(tail <= 0):
        return np.inf
    lr = np.log(tail[1:] / tail[:-1])
    return float((np.max(lr) - np.min(lr)) / max(abs(np.mean(lr)), 1e-300))


def _geometric_ratio(shells, window=6):
    tail = shells[-window:]
    if np.any(tail <= 0):
        if np.all(tail == 0):
            return 0.0
        return None
    ratios = tail[1:] / tail[:-1]
    q = float(np.exp(np.mean(np.log(ratios))))
    spread = float(np.max(np.abs(np.log(ratios) - np.log(q))))
    if spread > 0.05 * max(1.0, abs(np.log(q))):
        return None
    return q


def adaptive_log_integral(g, a, b, n=24, rtol=1e-12, atol=1e-300, max_level=40, max_intervals=2000):
    """Adaptive Gauss in ``log r`` on [a, b], bisecting in log space.

    After ``max_intervals`` evaluations (integrand noise at round-off level)
    the remaining pieces are accepted at their refined value.
    """
    total = 0.0
    stack = [(a, b, 0)]
    count = 0
    while stack:
        lo, hi, level = stack.pop()
        count += 1
        r, w = log_nodes(lo, hi, n)
        coarse = float(np.sum(np.asarray(g(r), float) * w))
        mid = np.sqrt(lo * hi)
        r2, w2 = log_nodes(np.array([lo, mid]), np.array([mid, hi]), n)
        fine = float(np.sum(np.asarray(g(r2.ravel()), float).reshape(r2.shape) * w2))
        if (abs(fine - coarse) <= max(atol, rtol * abs(fine)) or level >= max_level
                or count >= max_intervals):
            total += fine
        else:
            stack.append((lo, mid, level + 1))
            stack.append((mid, hi, level + 1))
    return total
