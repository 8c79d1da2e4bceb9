"""Implicit finite-volume solver for ``u_t - div A_eps(x, ∇u) = b_eps`` in 1D and radial geometry.

Vertex-centred finite volumes: node ``i`` owns ``[x_{i-1/2}, x_{i+1/2}]``
(clipped to the domain), face fluxes are ``w(x_face) a(x_face) phi(z)``
with ``z`` the difference quotient across the face and ``w = 1`` on an
interval, ``w = |S^(N-1)| r^(N-1)`` in radial geometry.  Each time step is
a theta-scheme solved by damped Newton on the tridiagonal Jacobian, with a
Picard (frozen-coefficient) fallback.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import kernels
from .density import Density, ZeroDensity, sphere_area
from .elliptic import RadialGrid


class SolverFailure(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


# ---------------------------------------------------------------------------
# coefficients and vector fields
# ---------------------------------------------------------------------------

_COEFF_NAMES = ("f", "g", "f1", "g1", "f2", "g2")


@dataclass(frozen=True)
class StructureCoefficients:
    """Exponent, ellipticity constants and the six coefficient densities."""

    p: float = 2.0
    c0: float = 1.0
    c1: float = 1.0
    f: Optional[Density] = None
    g: Optional[Density] = None
    f1: Optional[Density] = None
    g1: Optional[Density] = None
    f2: Optional[Density] = None
    g2: Optional[Density] = None

    def __post_init__(self):
        if self.c0 <= 0 or self.c1 < self.c0:
            raise ValueError("need c0 > 0 and c1 >= c0")
        if self.p < 2:
            raise ValueError("structure conditions need p >= 2")

    def densities(self) -> dict:
        return {k: getattr(self, k) for k in _COEFF_NAMES if getattr(self, k) is not None}


@dataclass(frozen=True)
class VectorFieldSpec:
    """``A(x, z) = a(x) phi_eps(z)`` with ``phi_0(z) = |z|^(p-2) z``.

    ``kind`` is ``"pure"`` (a = 1), ``"weighted"`` (``weight`` callable) or
    ``"tabulated"`` (``table = (x_nodes, a_values)``, linearly interpolated).
    """

    kind: str = "pure"
    p: float = 2.0
    weight: Optional[Callable] = None
    table: Optional[tuple] = None
    eps: float = 0.0
    smoothing: Optional[float] = None  # kernel width applied to a tabulated a(x)

    def __post_init__(self):
        if self.kind not in ("pure", "weighted", "tabulated"):
            raise ValueError(f"unknown vector field kind {self.kind!r}")
        if self.kind == "weighted" and self.weight is None:
            raise ValueError("weighted field needs a weight function")
        if self.kind == "tabulated" and self.table is None:
            raise ValueError("tabulated field needs a table")
        if self.p <= 1:
            raise ValueError("p must exceed 1")

    def coefficient(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        if self.kind == "pure":
            return np.ones_like(x)
        if self.kind == "weighted":
            return np.asarray(self.weight(x), float) * np.ones_like(x)
        xt, at = (np.asarray(v, float) for v in self.table)
        if self.smoothing:
            at = _mollify_table(xt, at, self.smoothing)
        return np.interp(x, xt, at)

    def phi(self, z):
        z = np.asarray(z, float)
        e = self.eps
        if e > 0:
            return (z * z + e * e) ** (0.5 * (self.p - 2.0)) * z + e * z
        return np.abs(z) ** (self.p - 2.0) * z

    def dphi(self, z):
        z = np.asarray(z, float)
        e, p = self.eps, self.p
        if e > 0:
            return (z * z + e * e) ** (0.5 * (p - 4.0)) * ((p - 1.0) * z * z + e * e) + e
        with np.errstate(divide="ignore"):
            return (p - 1.0) * np.abs(z) ** (p - 2.0)

    def flux(self, x, z):
        return self.coefficient(x) * self.phi(z)

    def monotonicity_margin(self, c0, x_probe, z_probe, mu_probe=(1.0, -0.5, 2.0)) -> float:
        """``min <∂_z A mu, mu> / (|z|^(p-2) |mu|^2) - c0`` over the probe set (1D: mu scalar)."""
        x = np.asarray(x_probe, float)[:, None]
        z = np.asarray(z_probe, float)[None, :]
        a = self.coefficient(x)
        worst = math.inf
        for mu in mu_probe:
            lhs = a * self.dphi(z) * mu * mu
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = lhs / (np.abs(z) ** (self.p - 2.0) * mu * mu)
            ratio = ratio[np.isfinite(ratio)]
            if ratio.size:
                worst = min(worst, float(np.min(ratio)))
        return worst - c0


def _mollify_table(x, a, width):
    if width <= 0:
        return a
    d = x[:, None] - x[None, :]
    k = np.exp(-0.5 * (d / width) ** 2)
    return (k @ a) / k.sum(axis=1)


def regularize(spec: VectorFieldSpec, eps: float) -> VectorFieldSpec:
    """The regularized field: ``(|z|^2+eps^2)^((p-2)/2) z + eps z``; tabulated ``a`` smoothed at width ``eps``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return replace(spec, eps=eps, smoothing=eps if spec.kind == "tabulated" else spec.smoothing)


def clamp_source(value, eps: float):
    """``b_eps = max(min(b, 1/eps), -1/eps)``."""
    if eps <= 0:
        return np.asarray(value, float)
    return np.clip(value, -1.0 / eps, 1.0 / eps)


# ---------------------------------------------------------------------------
# grids and problems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntervalGrid:
    a: float = 0.0
    b: float = 1.0
    n_nodes: int = 65
    custom: Optional[tuple] = None  # explicit node coordinates (graded grids)

    @property
    def nodes(self) -> np.ndarray:
        if self.custom is not None:
            x = np.asarray(self.custom, float)
            if np.any(np.diff(x) <= 0):
                raise ValueError("nodes must be strictly increasing")
            return x
        return np.linspace(self.a, self.b, self.n_nodes)


def dyadic_graded_nodes(length: float, depth: int, n_base: int = 32, per_octave: int = 2) -> np.ndarray:
    """Uniform nodes on ``[0, length]`` with the first cell split into ``depth`` dyadic octaves toward 0.

    Grids with increasing ``depth`` are nested; the smallest cell is
    ``length / n_base * 2**-depth / per_octave``-ish, geometric within each octave.
    """
    h = length / n_base
    inner = [np.geomspace(h * 2.0 ** -(j + 1), h * 2.0 ** -j, per_octave + 1)[:-1] for j in range(depth)]
    parts = [np.zeros(1), np.linspace(0.0, length, n_base + 1)] + inner
    return np.unique(np.concatenate(parts))


@dataclass(frozen=True)
class SpaceTimeGrid:
    spatial: object  # RadialGrid or IntervalGrid
    t0: float = 0.0
    t1: float = 1.0
    dt: float = 0.01
    theta_scheme: float = 1.0
    dim: int = 1  # ambient dimension for radial geometry
    dt_min: float = 1e-12

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0.5 <= self.theta_scheme <= 1.0:
            raise ValueError("theta_scheme must lie in [1/2, 1]")
        if self.t1 <= self.t0:
            raise ValueError("need t1 > t0")

    @property
    def geometry(self) -> str:
        return "radial" if isinstance(self.spatial, RadialGrid) else "interval"

    @property
    def x(self) -> np.ndarray:
        return self.spatial.nodes


@dataclass(frozen=True)
class ParabolicProblem:
    """Everything needed for one solve.

    ``source(x, t, u, z)`` is the (unclamped) right-hand side ``b``;
    ``forcing`` is a Density added through exact cell integrals, ``even``
    (plain) or ``odd`` (``sign(x) f(|x|)``, interval geometry).  Boundary
    data ``boundary(x, t)`` is imposed at Dirichlet nodes: both ends of an
    interval, the outer radius in radial geometry.
    """

    spec: VectorFieldSpec
    grid: SpaceTimeGrid
    u0: Callable
    boundary: Callable = field(default=lambda x, t: np.zeros_like(np.asarray(x, float)))
    coeffs: Optional[StructureCoefficients] = None
    source: Optional[Callable] = None
    source_du: Optional[Callable] = None
    source_dz: Optional[Callable] = None
    forcing: Optional[Density] = None
    forcing_parity: str = "even"
    forcing_scale: float = 1.0
    clamp: bool = True
    tol: float = 1e-10
    max_newton: int = 30

    @property
    def eps(self):
        return self.spec.eps


@dataclass
class ParabolicSolution:
    problem: ParabolicProblem
    x: np.ndarray
    t: np.ndarray
    u: np.ndarray  # (n_times, n_nodes)
    grad: np.ndarray
    eps: float
    newton_stats: list

    @property
    def grid(self):
        return self.problem.grid

    def slice_at(self, t):
        k = int(np.argmin(np.abs(self.t - t)))
        return self.u[k]


# ---------------------------------------------------------------------------
# discretization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Mesh:
    x: np.ndarray
    volume: np.ndarray
    wface: np.ndarray
    aface: np.ndarray
    xface: np.ndarray
    dirichlet: np.ndarray  # boolean mask
    cv_lo: np.ndarray
    cv_hi: np.ndarray
    c_m: np.ndarray  # centred-difference weights for u_{i-1}, u_i, u_{i+1}
    c_0: np.ndarray
    c_p: np.ndarray


def _mesh(problem: ParabolicProblem) -> _Mesh:
    g = problem.grid
    x = g.x
    xf = 0.5 * (x[:-1] + x[1:])
    lo = np.concatenate([[x[0]], xf])
    hi = np.concatenate([xf, [x[-1]]])
    if g.geometry == "radial":
        n = g.dim
        area = sphere_area(n)
        vol = area * (hi ** n - lo ** n) / n
        wface = area * xf ** (n - 1)
        dirichlet = np.zeros(x.size, bool)
        dirichlet[-1] = True
    else:
        vol = hi - lo
        wface = np.ones_like(xf)
        dirichlet = np.zeros(x.size, bool)
        dirichlet[[0, -1]] = True
    aface = problem.spec.coefficient(xf)
    c_m, c_0, c_p = _centered_weights(x, radial=g.geometry == "radial")
    return _Mesh(x, vol, wface, aface, xf, dirichlet, lo, hi, c_m, c_0, c_p)


def _centered_weights(x, radial=False):
    """Second-order three-point derivative weights; one-sided at the ends, zero at a radial center."""
    n = x.size
    cm, c0, cp = np.zeros(n), np.zeros(n), np.zeros(n)
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    cm[1:-1] = -hp / (hm * (hm + hp))
    c0[1:-1] = (hp - hm) / (hm * hp)
    cp[1:-1] = hm / (hp * (hm + hp))
    if not radial:
        h1, h2 = x[1] - x[0], x[2] - x[1]
        c0[0] = -(2 * h1 + h2) / (h1 * (h1 + h2))
        cp[0] = (h1 + h2) / (h1 * h2)
        cm[0] = 0.0  # second-order needs u_2: stored separately
    h1, h2 = x[-1] - x[-2], x[-2] - x[-3]
    c0[-1] = (2 * h1 + h2) / (h1 * (h1 + h2))
    cm[-1] = -(h1 + h2) / (h1 * h2)
    return cm, c0, cp


def gradient(x, u, radial=False) -> np.ndarray:
    """Centred differences (second order on graded grids), one-sided at the boundary."""
    u = np.asarray(u, float)
    out = np.empty_like(u)
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    out[..., 1:-1] = (hm ** 2 * u[..., 2:] - hp ** 2 * u[..., :-2] + (hp ** 2 - hm ** 2) * u[..., 1:-1]) / (
        hm * hp * (hm + hp))
    h1, h2 = x[1] - x[0], x[2] - x[1]
    if radial:
        out[..., 0] = 0.0
    else:
        out[..., 0] = (-(2 * h1 + h2) * h2 * u[..., 0] + (h1 + h2) ** 2 * u[..., 1] - h1 ** 2 * u[..., 2]) / (
            h1 * h2 * (h1 + h2))
    h1, h2 = x[-1] - x[-2], x[-2] - x[-3]
    out[..., -1] = ((2 * h1 + h2) * h2 * u[..., -1] - (h1 + h2) ** 2 * u[..., -2] + h1 ** 2 * u[..., -3]) / (
        h1 * h2 * (h1 + h2))
    return out


def _forcing_cells(problem: ParabolicProblem, mesh: _Mesh) -> np.ndarray:
    out = np.zeros(mesh.x.size)
    f = problem.forcing
    if f is None or isinstance(f, ZeroDensity):
        return out
    free = ~mesh.dirichlet
    lo, hi = mesh.cv_lo[free], mesh.cv_hi[free]
    if problem.grid.geometry == "radial":
        if f.dim != problem.grid.dim:
            raise ValueError("forcing dimension does not match the radial grid")
        edges = np.unique(np.concatenate([lo, hi]))
        edges = edges[edges > 0]
        mass = np.concatenate([[0.0], f.ball_mass(np.zeros(f.dim), edges)])
        idx = lambda r: np.where(r > 0, np.searchsorted(edges, r) + 1, 0)  # noqa: E731
        out[free] = mass[idx(hi)] - mass[idx(lo)]
    elif problem.forcing_parity == "odd":
        out[free] = f.odd_interval_mass(lo, hi)
    else:
        out[free] = f.interval_mass(lo, hi)
    return problem.forcing_scale * out


class _Source:
    def __init__(self, problem: ParabolicProblem):
        self.b = problem.source
        self.bu = problem.source_du
        self.bz = problem.source_dz
        self.eps = problem.eps if problem.clamp else 0.0

    def __call__(self, x, t, u, z):
        if self.b is None:
            zero = np.zeros_like(u)
            return zero, zero, zero
        raw = np.asarray(self.b(x, t, u, z), float) * np.ones_like(u)
        if self.bu is not None:
            du = np.asarray(self.bu(x, t, u, z), float) * np.ones_like(u)
        else:
            d = 1e-7 * (1.0 + np.abs(u))
            du = (np.asarray(self.b(x, t, u + d, z)) - np.asarray(self.b(x, t, u - d, z))) / (2 * d)
        if self.bz is not None:
            dz = np.asarray(self.bz(x, t, u, z), float) * np.ones_like(u)
        else:
            d = 1e-7 * (1.0 + np.abs(z))
            dz = (np.asarray(self.b(x, t, u, z + d)) - np.asarray(self.b(x, t, u, z - d))) / (2 * d)
        if self.eps > 0:
            val = clamp_source(raw, self.eps)
            active = np.abs(raw) < 1.0 / self.eps
            return val, np.where(active, du, 0.0), np.where(active, dz, 0.0)
        return raw, du * np.ones_like(u), dz * np.ones_like(u)


def _improves(G0, s0, G1, s1, slack=0.0):
    """Sufficient decrease of the scaled residual, both measured in the larger of the two scales."""
    if not np.all(np.isfinite(G1)):
        return False
    s = np.maximum(s0, s1)
    return np.linalg.norm(G1 / s) <= (1.0 - slack) * np.linalg.norm(G0 / s)


class _Stepper:
    """Holds the mesh, forcing and kernels for one problem."""

    def __init__(self, problem: ParabolicProblem):
        self.problem = problem
        self.mesh = _mesh(problem)
        self.force = _forcing_cells(problem, self.mesh)
        self.src = _Source(problem)
        self.p = problem.spec.p
        self.eps = problem.spec.eps
        self.theta = problem.grid.theta_scheme

    def div(self, u):
        m = self.mesh
        return kernels.flux_divergence(m.x, np.ascontiguousarray(u), m.wface, m.aface, self.p, self.eps)

    def _zc(self, u):
        m = self.mesh
        z = gradient(m.x, u, radial=self.problem.grid.geometry == "radial")
        return z

    def residual(self, u_new, u_old, div_old, src_old, t_new, dt, want_jac=True):
        m = self.mesh
        div, lo, di, up = self.div(u_new)
        z = self._zc(u_new)
        b, bu, bz = self.src(m.x, t_new, u_new, z)
        th = self.theta
        G = m.volume * (u_new - u_old) / dt - th * (div + m.volume * b) - (1 - th) * (div_old + src_old) - self.force
        bc = self.problem.boundary(m.x[m.dirichlet], t_new)
        G[m.dirichlet] = u_new[m.dirichlet] - bc
        # scale: magnitudes of the balanced terms
        qabs = np.zeros(m.x.size)
        q = m.wface * m.aface * np.abs(self.problem.spec.phi(np.diff(u_new) / np.diff(m.x)))
        qabs[:-1] += q
        qabs[1:] += q
        scale = (m.volume / dt * np.maximum(np.abs(u_new), np.abs(u_old)) + qabs + np.abs(self.force)
                 + m.volume * np.abs(b) + np.abs(div_old))
        scale = scale + 1e-10 * np.max(scale) + 1e-300
        scale[m.dirichlet] = 1.0 + np.abs(bc)
        if not want_jac:
            return G, scale, None
        diag = m.volume / dt - th * di - th * m.volume * bu
        lower = -th * lo.copy()
        upper = -th * up.copy()
        if self.src.b is not None:
            # b depends on the centred gradient z_i = c_m u_{i-1} + c_0 u_i + c_p u_{i+1}
            diag -= th * m.volume * bz * m.c_0
            lower -= th * m.volume * bz * m.c_m
            upper -= th * m.volume * bz * m.c_p
        d = m.dirichlet
        diag[d], lower[d], upper[d] = 1.0, 0.0, 0.0
        return G, scale, (lower, diag, upper)

    def explicit_part(self, u, t):
        m = self.mesh
        div, *_ = self.div(u)
        b, _, _ = self.src(m.x, t, u, self._zc(u))
        return div, m.volume * b

    def picard(self, u_it, u_old, div_old, src_old, t_new, dt, k=None):
        """One frozen-coefficient linear solve (``k = phi(z)/z`` on faces unless given)."""
        m = self.mesh
        h = np.diff(m.x)
        if k is None:
            z = np.diff(u_it) / h
            spec = self.problem.spec
            with np.errstate(divide="ignore", invalid="ignore"):
                k = np.where(z != 0, spec.phi(z) / z, spec.dphi(z))
        k = m.wface * m.aface * np.nan_to_num(k) / h
        th = self.theta
        n = m.x.size
        diag = m.volume / dt
        diag = diag.copy()
        lower = np.zeros(n)
        upper = np.zeros(n)
        diag[:-1] += th * k
        diag[1:] += th * k
        upper[:-1] = -th * k
        lower[1:] = -th * k
        b, _, _ = self.src(m.x, t_new, u_it, self._zc(u_it))
        rhs = m.volume * u_old / dt + th * m.volume * b + (1 - th) * (div_old + src_old) + self.force
        d = m.dirichlet
        diag[d], lower[d], upper[d] = 1.0, 0.0, 0.0
        rhs[d] = self.problem.boundary(m.x[d], t_new)
        return kernels.thomas(lower, diag, upper, rhs)

    def _warm_start(self, u, u_old, div_old, src_old, t_new, dt):
        """Guess for a degenerate start: solve with p = 2, then freeze ``k = |z|^((p-2)/(p-1))``."""
        h = np.diff(self.mesh.x)
        lin = self.picard(u, u_old, div_old, src_old, t_new, dt, k=np.ones_like(h))
        z = np.abs(np.diff(lin) / h)
        k = np.maximum(z, self.eps) ** ((self.p - 2.0) / (self.p - 1.0))
        return self.picard(lin, u_old, div_old, src_old, t_new, dt, k=k)

    def step(self, u_old, t, dt):
        """Advance one step; returns (u_new, stats) or raises SolverFailure."""
        prob = self.problem
        t_new = t + dt
        div_old, src_old = self.explicit_part(u_old, t) if self.theta < 1 else (0.0, 0.0)
        u = u_old.copy()
        d = self.mesh.dirichlet
        u[d] = prob.boundary(self.mesh.x[d], t_new)
        history = []
        picard_used = 0
        for it in range(prob.max_newton):
            G, scale, (lo, di, up) = self.residual(u, u_old, div_old, src_old, t_new, dt)
            res = float(np.max(np.abs(G) / scale))
            history.append(res)
            if res <= prob.tol:
                return u, {"iterations": it, "residual": res, "history": history, "picard": picard_used}
            delta = kernels.thomas(lo, di, up, -G)
            lam = 1.0
            accepted = False
            for _ in range(12):
                trial = u + lam * delta
                Gt, s_t, _ = self.residual(trial, u_old, div_old, src_old, t_new, dt, want_jac=False)
                if _improves(G, scale, Gt, s_t, 1e-4 * lam):
                    accepted = True
                    break
                lam *= 0.5
            stagnating = len(history) >= 4 and history[-1] > 0.5 * history[-4]
            if accepted and not stagnating:
                u = trial
                continue
            if it == 0 and self.p != 2.0:
                warm = self._warm_start(u, u_old, div_old, src_old, t_new, dt)
                Gw, sw, _ = self.residual(warm, u_old, div_old, src_old, t_new, dt, want_jac=False)
                if _improves(G, scale, Gw, sw):
                    u = warm
                    picard_used += 1
                    continue
            trial = self.picard(u, u_old, div_old, src_old, t_new, dt)
            Gt, s_t, _ = self.residual(trial, u_old, div_old, src_old, t_new, dt, want_jac=False)
            if _improves(G, scale, Gt, s_t):
                u = trial
                picard_used += 1
            elif accepted:
                u = u + lam * delta
            else:
                break
        raise SolverFailure("nonlinear solve did not converge", {"t": t, "dt": dt, "history": history})


def step(problem: ParabolicProblem, u, t, dt):
    """One implicit step from time ``t``; see :class:`_Stepper`."""
    return _Stepper(problem).step(np.asarray(u, float), t, dt)


def solve_ivbp(problem: ParabolicProblem, dt_grow: float = 1.2, easy_iterations: int = 3) -> ParabolicSolution:
    """March from ``t0`` to ``t1``; rejected steps halve ``dt``, easy steps grow it by 1.2 up to the nominal ``dt``."""
    g = problem.grid
    if problem.spec.p > 2 and problem.spec.eps <= 0:
        raise ValueError("degenerate fields must be regularized (eps > 0) before solving")
    stepper = _Stepper(problem)
    x = stepper.mesh.x
    u = np.asarray(problem.u0(x), float) * np.ones_like(x)
    d = stepper.mesh.dirichlet
    bc0 = problem.boundary(x[d], g.t0)
    if not np.allclose(u[d], bc0, rtol=1e-12, atol=1e-12):
        raise ValueError("initial and boundary data are not compatible at t0")
    times, slices, stats = [g.t0], [u.copy()], []
    t, dt = g.t0, g.dt
    span = g.t1 - g.t0
    while t < g.t1 - 1e-12 * span:
        h = min(dt, g.t1 - t)
        try:
            u_new, st = stepper.step(u, t, h)
        except SolverFailure as exc:
            stats.append({"t": t, "dt": h, "rejected": True, "history": exc.diagnostics.get("history")})
            dt = 0.5 * h
            if dt < g.dt_min:
                raise SolverFailure(f"dt fell below dt_min at t={t:g}", {"stats": stats}) from exc
            continue
        t = g.t1 if g.t1 - (t + h) <= 1e-12 * span else t + h
        u = u_new
        st.update({"t": t, "dt": h, "rejected": False})
        stats.append(st)
        times.append(t)
        slices.append(u.copy())
        if st["iterations"] <= easy_iterations:
            dt = min(h * dt_grow, g.dt) if h < g.dt else g.dt
    U = np.asarray(slices)
    grad = gradient(x, U, radial=g.geometry == "radial")
    return ParabolicSolution(problem, x, np.asarray(times), U, grad, problem.spec.eps, stats)


# ---------------------------------------------------------------------------
# weak residual
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpaceTimeTest:
    """``psi(x, t)`` with its derivatives, vanishing near the lateral boundary."""

    name: str
    psi: Callable
    psi_x: Callable
    psi_t: Callable


def weak_residual(sol: ParabolicSolution, psi_family) -> float:
    """max over the family of ``|∫uψ|_{t0}^{t1} + ∬(-u ψ_t + A(∇u)·∇ψ - bψ)|``.

    Space integrals use the control volumes; the flux term is evaluated on
    faces; time integrals use the right-endpoint rule of the implicit scheme.
    """
    prob = sol.problem
    st = _Stepper(prob)
    m = st.mesh
    spec = prob.spec
    h = np.diff(m.x)
    worst = 0.0
    for test in psi_family:
        t0, t1 = sol.t[0], sol.t[-1]
        total = np.sum(m.volume * sol.u[-1] * test.psi(m.x, t1)) - np.sum(m.volume * sol.u[0] * test.psi(m.x, t0))
        for k in range(1, sol.t.size):
            t, dt = sol.t[k], sol.t[k] - sol.t[k - 1]
            u = sol.u[k]
            z = np.diff(u) / h
            flux = m.wface * m.aface * spec.phi(z)
            b, _, _ = st.src(m.x, t, u, sol.grad[k])
            term = (-np.sum(m.volume * u * test.psi_t(m.x, t))
                    + np.sum(flux * h * test.psi_x(m.xface, t))
                    - np.sum((m.volume * b + st.force) * test.psi(m.x, t)))
            total += dt * term
        worst = max(worst, abs(float(total)))
    return worst


def sine_tests(a, b, modes=(1, 2, 3), radial=False):
    """``sin(k pi (x-a)/(b-a)) (1 + t)`` (interval) or ``cos((k-1/2) pi r / b)(1+t)`` (radial)."""
    out = []
    for k in modes:
        if radial:
            w = (k - 0.5) * math.pi / b
            out.append(SpaceTimeTest(f"cos{k}", lambda x, t, w=w: np.cos(w * x) * (1 + t),
                                     lambda x, t, w=w: -w * np.sin(w * x) * (1 + t),
                                     lambda x, t, w=w: np.cos(w * x)))
        else:
            w = k * math.pi / (b - a)
            out.append(SpaceTimeTest(f"sin{k}", lambda x, t, w=w: np.sin(w * (x - a)) * (1 + t),
                                     lambda x, t, w=w: w * np.cos(w * (x - a)) * (1 + t),
                                     lambda x, t, w=w: np.sin(w * (x - a))))
    return out


# ---------------------------------------------------------------------------
# exact solutions used for validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Barenblatt:
    """Source-type solution of ``u_t = Δ_p u`` in ``R^N`` (p > 2)."""

    p: float
    dim: int
    C: float = 1.0

    @property
    def beta(self):
        return 1.0 / (self.dim * (self.p - 2.0) + self.p)

    @property
    def alpha(self):
        return self.dim * self.beta

    @property
    def gamma(self):
        return (self.p - 2.0) / self.p * self.beta ** (1.0 / (self.p - 1.0))

    def __call__(self, r, t):
        r = np.abs(np.asarray(r, float))
        core = self.C - self.gamma * (r * t ** (-self.beta)) ** (self.p / (self.p - 1.0))
        return t ** (-self.alpha) * np.maximum(core, 0.0) ** ((self.p - 1.0) / (self.p - 2.0))

    def support_radius(self, t):
        return (self.C / self.gamma) ** ((self.p - 1.0) / self.p) * t ** self.beta

    def gradient(self, r, t):
        r = np.abs(np.asarray(r, float))
        p, b = self.p, self.beta
        s = r * t ** (-b)
        core = np.maximum(self.C - self.gamma * s ** (p / (p - 1.0)), 0.0)
        dcore = -self.gamma * p / (p - 1.0) * s ** (1.0 / (p - 1.0)) * t ** (-b)
        return t ** (-self.alpha) * (p - 1.0) / (p - 2.0) * core ** (1.0 / (p - 2.0)) * dcore
