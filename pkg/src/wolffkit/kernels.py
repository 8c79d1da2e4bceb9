"""Hot numeric kernels.

Every kernel exists twice: a numba ``@njit`` loop version and a vectorised
numpy version.  The numba path is used when numba imports and the
environment variable ``WOLFFKIT_BACKEND`` is not set to ``numpy``.
Both paths are importable directly (``*_numba`` / ``*_numpy``) so tests and
the benchmark can compare them.
"""
import math
import os

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import betainc

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA and os.environ.get("WOLFFKIT_BACKEND", "numba") != "numpy" else "numpy"


def _njit(fn):
    if HAVE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


# ---------------------------------------------------------------------------
# spherical caps and lenses
# ---------------------------------------------------------------------------

def unit_ball_volume(dim):
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)


@_njit
def _cap_fraction_scalar(x, dim):
    # regularized incomplete beta I_x((dim+1)/2, 1/2): series for small x, upward recurrence otherwise
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    b = 0.5
    if x < 0.5:
        # x^a / (a B(a, b)) * 2F1(a, 1 - b; a + 1; x): no cancellation for small x
        a = 0.5 * (dim + 1)
        term = 1.0
        acc = 1.0
        k = 0
        while abs(term) > 1e-17 * abs(acc):
            term *= (a + k) * (1.0 - b + k) / ((a + 1.0 + k) * (k + 1.0)) * x
            acc += term
            k += 1
        logb = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
        return math.exp(a * math.log(x) - math.log(a) - logb) * acc
    if dim % 2 == 1:
        a = 1.0
        val = 1.0 - math.sqrt(1.0 - x)
    else:
        a = 0.5
        val = 2.0 / math.pi * math.asin(math.sqrt(x))
    target = 0.5 * (dim + 1)
    while a < target - 0.25:
        logb = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
        val -= math.exp(a * math.log(x) + b * math.log1p(-x) - math.log(a) - logb)
        a += 1.0
    return val


@_njit
def _cap_volume_scalar(radius, height, dim, omega):
    if height <= 0.0:
        return 0.0
    if height >= 2.0 * radius:
        return omega * radius ** dim
    if height <= radius:
        arg = height * (2.0 * radius - height) / (radius * radius)
        return 0.5 * omega * radius ** dim * _cap_fraction_scalar(arg, dim)
    return omega * radius ** dim - _cap_volume_scalar(radius, 2.0 * radius - height, dim, omega)


@_njit
def _lens_volume_scalar(d, r, rho, dim, omega):
    if r <= 0.0 or rho <= 0.0 or d >= r + rho:
        return 0.0
    if d <= abs(r - rho):
        m = min(r, rho)
        return omega * m ** dim
    # cap heights in factored form; r - d is exact when r and d are close
    s = r - d
    h_r = (rho + s) * (rho - s) / (2.0 * d)
    h_rho = (s + rho) * (r + d - rho) / (2.0 * d)
    return _cap_volume_scalar(r, h_r, dim, omega) + _cap_volume_scalar(rho, h_rho, dim, omega)


@_njit
def bump_ball_mass_numba(centers, radii, heights, x, r):
    """Mass of ``sum_n h_n 1_{B(c_n, rho_n)}`` inside ``B(x, r_j)`` for each j."""
    dim = centers.shape[1]
    omega = math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0)
    nb = centers.shape[0]
    dist = np.empty(nb)
    for n in range(nb):
        s = 0.0
        for k in range(dim):
            t = centers[n, k] - x[k]
            s += t * t
        dist[n] = math.sqrt(s)
    out = np.zeros(r.shape[0])
    for j in range(r.shape[0]):
        acc = 0.0
        for n in range(nb):
            if heights[n] != 0.0:
                acc += heights[n] * _lens_volume_scalar(dist[n], r[j], radii[n], dim, omega)
        out[j] = acc
    return out


def _cap_volume_numpy(radius, height, dim):
    omega = unit_ball_volume(dim)
    radius, height = np.broadcast_arrays(np.asarray(radius, float), np.asarray(height, float))
    full = omega * radius ** dim
    h = np.clip(height, 0.0, 2.0 * radius)
    small = np.minimum(h, 2.0 * radius - h)
    with np.errstate(invalid="ignore", divide="ignore"):
        arg = np.where(radius > 0, small * (2.0 * radius - small) / np.where(radius > 0, radius, 1.0) ** 2, 0.0)
    cap = 0.5 * full * betainc(0.5 * (dim + 1), 0.5, np.clip(arg, 0.0, 1.0))
    return np.where(h <= radius, cap, full - cap)


def lens_volume_numpy(d, r, rho, dim):
    """Volume of ``B(0, r) ∩ B(d e_1, rho)`` in ``R^dim`` (broadcasting)."""
    omega = unit_ball_volume(dim)
    d, r, rho = np.broadcast_arrays(*(np.asarray(v, float) for v in (d, r, rho)))
    inside = d <= np.abs(r - rho)
    disjoint = (d >= r + rho) | (r <= 0) | (rho <= 0)
    safe_d = np.where(d > 0, d, 1.0)
    s = r - d
    h_r = (rho + s) * (rho - s) / (2.0 * safe_d)
    h_rho = (s + rho) * (r + d - rho) / (2.0 * safe_d)
    vol = _cap_volume_numpy(r, h_r, dim) + _cap_volume_numpy(rho, h_rho, dim)
    vol = np.where(inside, omega * np.minimum(r, rho) ** dim, vol)
    return np.where(disjoint, 0.0, vol)


def bump_ball_mass_numpy(centers, radii, heights, x, r):
    dist = np.linalg.norm(centers - x[None, :], axis=1)
    vol = lens_volume_numpy(dist[:, None], r[None, :], radii[:, None], centers.shape[1])
    return heights @ vol


# ---------------------------------------------------------------------------
# p-Laplacian flux on a 1D / radial finite-volume grid
# ---------------------------------------------------------------------------

@_njit
def flux_divergence_numba(x, u, wface, aface, p, eps):
    """Discrete ``q_{i+1/2} - q_{i-1/2}`` and its tridiagonal Jacobian.

    ``q = w a phi(z)`` with ``phi(z) = (z^2+eps^2)^((p-2)/2) z + eps z``.
    Returns (div, lower, diag, upper) where lower[i] = d div_i / d u_{i-1}
    and upper[i] = d div_i / d u_{i+1}.
    """
    n = u.shape[0]
    div = np.zeros(n)
    lower = np.zeros(n)
    diag = np.zeros(n)
    upper = np.zeros(n)
    for i in range(n - 1):
        h = x[i + 1] - x[i]
        z = (u[i + 1] - u[i]) / h
        if eps > 0.0:
            s = z * z + eps * eps
            phi = s ** (0.5 * (p - 2.0)) * z + eps * z
            dphi = s ** (0.5 * (p - 4.0)) * ((p - 1.0) * z * z + eps * eps) + eps
        else:
            az = abs(z)
            phi = az ** (p - 2.0) * z if az > 0.0 else 0.0
            dphi = (p - 1.0) * az ** (p - 2.0) if (az > 0.0 or p == 2.0) else 0.0
        c = wface[i] * aface[i]
        q = c * phi
        dq = c * dphi / h
        div[i] += q
        div[i + 1] -= q
        # q depends on u[i+1] (+dq) and u[i] (-dq)
        upper[i] += dq
        diag[i] -= dq
        diag[i + 1] -= dq
        lower[i + 1] += dq
    return div, lower, diag, upper


def flux_divergence_numpy(x, u, wface, aface, p, eps):
    h = np.diff(x)
    z = np.diff(u) / h
    if eps > 0.0:
        s = z * z + eps * eps
        phi = s ** (0.5 * (p - 2.0)) * z + eps * z
        dphi = s ** (0.5 * (p - 4.0)) * ((p - 1.0) * z * z + eps * eps) + eps
    else:
        az = np.abs(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(az > 0, az ** (p - 2.0) * z, 0.0)
            dphi = np.where((az > 0) | (p == 2.0), (p - 1.0) * az ** (p - 2.0), 0.0)
    c = wface * aface
    q = c * phi
    dq = c * dphi / h
    n = u.shape[0]
    div = np.zeros(n)
    div[:-1] += q
    div[1:] -= q
    lower = np.zeros(n)
    upper = np.zeros(n)
    diag = np.zeros(n)
    upper[:-1] = dq
    lower[1:] = dq
    diag[:-1] -= dq
    diag[1:] -= dq
    return div, lower, diag, upper


@_njit
def thomas_numba(lower, diag, upper, rhs):
    n = diag.shape[0]
    c = np.empty(n)
    d = np.empty(n)
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - lower[i] * c[i - 1]
        c[i] = upper[i] / m
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m
    out = np.empty(n)
    out[n - 1] = d[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = d[i] - c[i] * out[i + 1]
    return out


def thomas_numpy(lower, diag, upper, rhs):
    ab = np.zeros((3, diag.shape[0]))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, rhs)


if BACKEND == "numba":
    bump_ball_mass = bump_ball_mass_numba
    flux_divergence = flux_divergence_numba
    thomas = thomas_numba
else:
    bump_ball_mass = bump_ball_mass_numpy
    flux_divergence = flux_divergence_numpy
    thomas = thomas_numpy
