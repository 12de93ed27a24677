"""Independent ground truth for the expansion machinery.

Three oracles, none of which share code paths with the modules under test:

* Bessel-type power series and the exact resolvent kernels they build in
  d = 2 (closed forms for constant-coefficient operators).
* An explicit leapfrog solver for the 1+1D wave equation with potential,
  realizing the retarded Green's operator on a grid, causal by stencil
  construction.
* Comparison harnesses that smear both sides against test functions, so
  kernels are only ever compared in paired form.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CFLError, GridError, RegimeError
from .fields import SmoothField
from .geometry import as_event
from .hadamard import OperatorSpec
from .riesz import riesz_constant
from .testfn import QuadratureSpec

_W_MAX = 30.0


def bessel_series(kind: str, w: float) -> float:
    """I0 or J0 via the defining power series sum_k (+-w^2/4)^k / (k!)^2."""
    if kind not in ("I0", "J0"):
        raise ValueError(f"kind must be 'I0' or 'J0', got {kind!r}")
    w = float(w)
    if w < 0.0:
        raise ValueError("argument must be >= 0")
    if w > _W_MAX:
        raise ValueError(f"argument {w} above supported range {_W_MAX}")
    q = w * w / 4.0
    if kind == "J0":
        q = -q
    total = 0.0
    term = 1.0
    k = 0
    while True:
        total += term
        k += 1
        term *= q / (k * k)
        if abs(term) <= 1e-15 * max(1.0, abs(total)):
            return total + term


def exact_kernel_2d(z, m: int, y, x, sign: int = +1):
    """Kernel of G^m for box - z on flat d=2, by direct series summation.

    sum_k binom(m+k-1, k) z^k c_(2k+2m) Gamma^(k+m-1) on the causal cone,
    zero elsewhere; entire in z Gamma, so truncation is controlled by the
    factorial tail.  For m = 1 this is (1/2) I0(sqrt(z Gamma)).
    """
    if m < 1:
        raise ValueError("power m must be >= 1")
    y, x = as_event(y), as_event(x)
    v = y - x
    gamma = v[0] ** 2 - np.sum(v[1:] ** 2)
    if gamma < 0.0 or sign * v[0] < 0.0:
        return 0.0
    z = complex(z)
    total = 0.0 + 0.0j
    k = 0
    coeff = 1.0 + 0.0j  # binom(m+k-1, k) z^k
    small = 0
    while True:
        order = 2 * k + 2 * m
        p = order // 2 - 1
        power = gamma ** p if gamma > 0.0 else (1.0 if p == 0 else 0.0)
        term = coeff * riesz_constant(order, 2) * power
        total += term
        if abs(term) <= 1e-16 * max(1.0, abs(total)):
            small += 1
            if small >= 2:
                break
        else:
            small = 0
        coeff *= z * (m + k) / (k + 1)
        k += 1
        if k > 500:
            raise RegimeError("kernel series did not converge; |z Gamma| too large")
    total = complex(total)
    return total.real if total.imag == 0.0 else total


@dataclass(frozen=True)
class GridSpec:
    """Uniform space-time grid for the 1+1D solver.

    lam = dt/dx is held at 1 by default: the leapfrog stencil then
    propagates at exactly the continuum light speed, which makes the causal
    support property exact on the grid instead of holding only up to the
    numerical domain of dependence.
    """

    box: np.ndarray  # ((t0, t1), (x0, x1))
    h: float         # spatial step dx
    lam: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "box", np.asarray(self.box, dtype=float))
        if self.box.shape != (2, 2):
            raise ValueError("grid box must be ((t0,t1),(x0,x1))")
        if self.h <= 0.0:
            raise ValueError("spacing must be positive")
        if self.lam > 1.0 + 1e-12:
            raise CFLError(f"lam = dt/dx = {self.lam} violates the CFL bound lam <= 1")
        if self.lam <= 0.0:
            raise ValueError("lam must be positive")

    @property
    def xs(self):
        x0, x1 = self.box[1]
        n = int(round((x1 - x0) / self.h))
        return x0 + self.h * np.arange(n + 1)

    @property
    def ts(self):
        t0, t1 = self.box[0]
        dt = self.lam * self.h
        n = int(round((t1 - t0) / dt))
        return t0 + dt * np.arange(n + 1)


@dataclass
class FDSolution:
    """Grid realization of u = G^(sign m) f."""

    grid: GridSpec
    sign: int
    u: np.ndarray            # shape (nt, nx)
    source_box: np.ndarray   # (2, 2) bounding box of supp f

    def pair(self, phi: SmoothField) -> float:
        """Smeared value <phi, u> by grid summation (O(h^2) like the solver)."""
        ts, xs = self.grid.ts, self.grid.xs
        pts = np.stack(np.meshgrid(ts, xs, indexing="ij"), axis=-1)
        w = np.asarray(phi(pts.reshape(-1, 2))).reshape(len(ts), len(xs))
        dt = self.grid.lam * self.grid.h
        return float(np.real(np.sum(w * self.u))) * dt * self.grid.h

    def causality_residual(self) -> float:
        """Max |u| at grid points outside J_sign(supp f)."""
        ts, xs = self.grid.ts, self.grid.xs
        (ta, tb), (xa, xb) = self.source_box
        tt = ts[:, None]
        xx = xs[None, :]
        if self.sign > 0:
            reach = tt - ta  # time since the earliest source point
        else:
            reach = tb - tt
        outside = (reach < -1e-12) | (np.maximum(xa - xx, 0.0) + np.maximum(xx - xb, 0.0)
                                      > reach + 1e-12)
        if not np.any(outside):
            return 0.0
        return float(np.max(np.abs(self.u[outside])))


def _source_support(f, grid):
    sb = getattr(f, "support_box", None)
    if sb is None:
        raise GridError("finite-difference sources must be compactly supported bumps")
    return np.asarray(sb, dtype=float)


def fd_retarded_solve(op: OperatorSpec, f, grid: GridSpec, sign: int = +1) -> FDSolution:
    """Leapfrog solve of d_t^2 u = d_x^2 u - (b - z) u + f with causal data.

    sign = +1 gives G^+ f (zero data before the source); sign = -1 applies
    the solver to the time-reflected problem and reflects back, realizing
    G^- f.  Raises GridError when the causal shadow of the source reaches
    the spatial boundary, where the Dirichlet condition would contaminate
    the solution.
    """
    if op.model.dim != 2:
        raise RegimeError("the finite-difference oracle is 1+1 dimensional")
    ts, xs = grid.ts, grid.xs
    dt = grid.lam * grid.h
    sb = _source_support(f, grid)
    if isinstance(f, FDSolution):
        raise TypeError("pass grid sources through fd_power_apply")

    # boundary contamination check: the forward cone of the source must
    # stay strictly inside the spatial extent for the whole time range
    (ta, tb), (xa, xb) = sb
    horizon = (ts[-1] - ta) if sign > 0 else (tb - ts[0])
    if horizon > 0.0:
        if xa - horizon <= xs[0] + grid.h or xb + horizon >= xs[-1] - grid.h:
            raise GridError("causal shadow of the source reaches the grid boundary; "
                            "enlarge the spatial box")

    pts = np.stack(np.meshgrid(ts, xs, indexing="ij"), axis=-1).reshape(-1, 2)
    fvals = np.asarray(f(pts), dtype=float).reshape(len(ts), len(xs))
    u = _grid_source_solve(op, fvals, sb, grid, sign)
    return FDSolution(grid, sign, u, sb)


def _leapfrog_march(bz, fvals, dt, h):
    """Forward leapfrog march with zero initial data and Dirichlet sides."""
    nt, nx = fvals.shape
    u = np.zeros((nt, nx))
    c = (dt / h) ** 2
    # first step from rest: u(t0) = 0, u_t(t0) = 0 => u(t1) = dt^2/2 f(t0)
    if nt > 1:
        u[1, 1:-1] = 0.5 * dt * dt * fvals[0, 1:-1]
    for n in range(1, nt - 1):
        lap = u[n, 2:] - 2.0 * u[n, 1:-1] + u[n, :-2]
        u[n + 1, 1:-1] = (2.0 * u[n, 1:-1] - u[n - 1, 1:-1]
                          + c * lap + dt * dt * (fvals[n, 1:-1]
                                                 - bz[n, 1:-1] * u[n, 1:-1]))
    return u


def _grid_source_solve(op, fvals, source_box, grid, sign):
    """One leapfrog pass with a gridded source (shared by both signs and powers).

    The advanced solution is the time reflection of the retarded one with
    source and potential rows reflected alongside.
    """
    ts, xs = grid.ts, grid.xs
    dt = grid.lam * grid.h
    pts = np.stack(np.meshgrid(ts, xs, indexing="ij"), axis=-1).reshape(-1, 2)
    bz = np.real(op.pz_values(pts)).reshape(len(ts), len(xs))
    if sign < 0:
        return _leapfrog_march(bz[::-1], fvals[::-1], dt, grid.h)[::-1].copy()
    return _leapfrog_march(bz, fvals, dt, grid.h)


def fd_power_apply(op: OperatorSpec, m: int, f, grid: GridSpec, sign: int = +1) -> FDSolution:
    """G^(m) f by m-fold application of the solver (previous run as source)."""
    if m < 1:
        raise ValueError("power must be >= 1")
    sol = fd_retarded_solve(op, f, grid, sign)
    sb = sol.source_box
    for _ in range(m - 1):
        # contamination check for the iterated horizon
        ts, xs = grid.ts, grid.xs
        (ta, tb), (xa, xb) = sb
        horizon = (ts[-1] - ta) if sign > 0 else (tb - ts[0])
        if xa - horizon <= xs[0] + grid.h or xb + horizon >= xs[-1] - grid.h:
            raise GridError("iterated causal shadow reaches the grid boundary")
        u = _grid_source_solve(op, sol.u, sb, grid, sign)
        sol = FDSolution(grid, sign, u, sb)
    return sol


def smeared_riesz_power(model, m: int, phi: SmoothField, f: SmoothField,
                        sign: int = +1, n: int = 64):
    """<phi, R(2m) * f> by brute-force tensor quadrature in null coordinates.

    With y = x + ((u+v)/2, (v-u)/2) the retarded cone becomes the quadrant
    u, v >= 0, Gamma = u v, and dy = du dv / 2, so the smeared convolution
    is a 4D integral of a smooth compactly supported function:

        c_{2m}/2 int f(x) phi(x + .) (u v)^(m-1) du dv dx.

    The power factors fold into the 1D weights, which keeps the rule fully
    tensorial -- this is the independent check quadrature, deliberately not
    built on the adaptive pairing machinery.
    """
    if model.dim != 2:
        raise RegimeError("the brute-force convolution oracle is 1+1 dimensional")
    if m < 1:
        raise ValueError("power must be >= 1")
    if sign < 0:
        # R_-(w) = R_+(-w), so <phi, R_- * f> = <f, R_+ * phi>
        return smeared_riesz_power(model, m, f, phi, +1, n)
    pb = np.asarray(phi.support_box, dtype=float)
    fb = np.asarray(f.support_box, dtype=float)
    dt_hi = pb[0, 1] - fb[0, 0]
    dx_lo = pb[1, 0] - fb[1, 1]
    dx_hi = pb[1, 1] - fb[1, 0]
    u_hi = max(0.0, dt_hi - dx_lo)
    v_hi = max(0.0, dt_hi + dx_hi)
    if u_hi == 0.0 or v_hi == 0.0:
        return 0.0
    gl, gw = np.polynomial.legendre.leggauss(n)
    u = 0.5 * u_hi * (gl + 1.0)
    wu = 0.5 * u_hi * gw * u ** (m - 1)
    v = 0.5 * v_hi * (gl + 1.0)
    wv = 0.5 * v_hi * gw * v ** (m - 1)
    xs = [0.5 * fb[i].sum() + 0.5 * (fb[i, 1] - fb[i, 0]) * gl for i in range(2)]
    wxs = [0.5 * (fb[i, 1] - fb[i, 0]) * gw for i in range(2)]
    xmesh = np.stack(np.meshgrid(*xs, indexing="ij"), axis=-1).reshape(-1, 2)
    fw = (np.asarray(f(xmesh))
          * np.prod(np.stack(np.meshgrid(*wxs, indexing="ij"), axis=-1).reshape(-1, 2),
                    axis=1))
    live = np.abs(fw) > 0.0
    xmesh, fw = xmesh[live], fw[live]
    duv = np.stack([0.5 * (u[:, None] + v[None, :]),
                    0.5 * (v[None, :] - u[:, None])], axis=-1).reshape(-1, 2)
    wuv = (wu[:, None] * wv[None, :]).ravel()
    total = 0.0
    step = max(1, 4_000_000 // max(1, len(duv)))
    for a in range(0, xmesh.shape[0], step):
        pts = xmesh[a:a + step, None, :] + duv[None, :, :]
        vals = np.asarray(phi(pts.reshape(-1, 2))).reshape(-1, len(duv))
        total += float((vals @ wuv) @ fw[a:a + step])
    return riesz_constant(2 * m, 2) * 0.5 * total


@lru_cache(maxsize=None)
def _bump_weight_rule(n: int, ref: int = 500):
    """Gauss rule for the weight exp(-1/(1-u^2)) on (-1, 1).

    Stieltjes three-term recurrence on a fine reference discretization,
    then Golub-Welsch.  Absorbing the bump profile into the quadrature
    weight removes its Gevrey support edge from the error entirely; the
    remaining factor of the integrand is smooth, so a handful of nodes
    reaches near machine precision.
    """
    from scipy.linalg import eigh_tridiagonal

    u, w = np.polynomial.legendre.leggauss(ref)
    W = w * np.exp(-1.0 / (1.0 - u * u))
    a = np.zeros(n)
    b = np.zeros(max(n - 1, 0))
    p_prev = np.zeros_like(u)
    p = np.ones_like(u)
    norm_prev = None
    for k in range(n):
        nk = W @ (p * p)
        a[k] = (W @ (u * p * p)) / nk
        if k:
            b[k - 1] = nk / norm_prev
        norm_prev = nk
        p_new = (u - a[k]) * p - (b[k - 1] if k else 0.0) * p_prev
        p_prev, p = p, p_new
    nodes, vecs = eigh_tridiagonal(a, np.sqrt(b))
    return nodes, float(W.sum()) * vecs[0] ** 2


def compare_expansion_fd(op: OperatorSpec, m: int, N: int, probes, grid: GridSpec,
                         x_nodes: int = 10, uv_nodes: int = 64):
    """Smeared truncation error |<phi, G^m psi> - <phi (x) psi, T_N>| per N' <= N.

    The finite-difference side realizes G^m directly.  The expansion side is
    a fully tensorial quadrature: each term V^k R(2k+2m) becomes, in null
    coordinates around the base point (cf. smeared_riesz_power),

        c/2 int psi(x) phi(x + .) V^k(x + ., x) (u v)^(k+m-1) du dv dx,

    with Gauss-Legendre in (u, v) and, over supp psi, a Gauss rule whose
    weight is the bump profile of psi itself -- so no adaptive machinery
    and no support-edge error enters the comparison.  Probes must be bump
    pairs; m >= 1 (function-regime orders only); d = 2 retarded.
    """
    from .expansion import power_expansion
    from .fields import BumpField

    if op.model.dim != 2:
        raise RegimeError("the expansion-vs-FD comparison is 1+1 dimensional")
    if m < 1:
        raise ValueError("power must be >= 1")
    gl, gw = np.polynomial.legendre.leggauss(uv_nodes)
    xg, xw = _bump_weight_rule(x_nodes)
    rows = []
    T = power_expansion(op, m, N)
    coeffs = {t.k: float(np.real(t.coefficient)) * riesz_constant(t.order, 2)
              for t in T.terms}
    for phi, psi in probes:
        if not isinstance(psi, BumpField):
            raise RegimeError("psi must be a tensor bump for the weighted x-rule")
        fd_val = fd_power_apply(op, m, psi, grid).pair(phi)
        pb = np.asarray(phi.support_box, dtype=float)
        # tensor x-rule with psi's own bump factors as the weights
        xs = [psi.center[i] + psi.widths[i] * xg for i in range(2)]
        wxs = [psi.widths[i] * xw for i in range(2)]
        partial = np.zeros(N + 1)
        for i, xt in enumerate(xs[0]):
            for j, xx in enumerate(xs[1]):
                x = np.array([xt, xx])
                u_hi = max(0.0, (pb[0, 1] - xt) - (pb[1, 0] - xx))
                v_hi = max(0.0, (pb[0, 1] - xt) + (pb[1, 1] - xx))
                if u_hi == 0.0 or v_hi == 0.0:
                    continue
                wq = float(np.real(psi.amplitude)) * wxs[0][i] * wxs[1][j]
                u = 0.5 * u_hi * (gl + 1.0)
                v = 0.5 * v_hi * (gl + 1.0)
                base_w = (0.25 * u_hi * v_hi) * (gw[:, None] * gw[None, :])
                ys = x + np.stack([0.5 * (u[:, None] + v[None, :]),
                                   0.5 * (v[None, :] - u[:, None])],
                                  axis=-1).reshape(-1, 2)
                phiv = np.real(np.asarray(phi(ys))).reshape(uv_nodes, uv_nodes)
                uv = u[:, None] * v[None, :]
                for k in range(N + 1):
                    vk = np.real(T.family[k].eval_many(ys, x)).reshape(uv_nodes,
                                                                       uv_nodes)
                    val = float(np.sum(base_w * uv ** (k + m - 1) * phiv * vk))
                    partial[k:] += wq * 0.5 * coeffs[k] * val
        for n in range(N + 1):
            rows.append({"N": n, "fd": fd_val, "expansion": partial[n],
                         "abs_err": abs(fd_val - partial[n])})
    return rows
