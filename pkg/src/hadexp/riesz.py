"""Riesz distributions on flat model domains.

``riesz_eval`` evaluates the function regime (Re alpha >= d).  Pairings with
test functions work for arbitrary complex order by transferring powers of the
wave operator onto the (exactly differentiable) test function until the
integrand is continuous, then integrating adaptively in cone-aligned
coordinates: with u = tau - r and v = tau + r the causal cone becomes the
quadrant {u, v >= 0} and Gamma = u*v, so the power factor is mild and
axis-aligned rather than kinked along the cone.  Resolvent Riesz distributions
(kernels of powers of the Green's operator of box - z) are summed as entire
series in the standard orders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import loggamma

from .errors import QuadratureError, RegimeError
from .fields import DAlembertPowerField, SmoothField
from .geometry import SpacetimeModel, as_event
from .testfn import QuadratureSpec, integrate


def _is_nonpos_int(w) -> bool:
    w = complex(w)
    return w.imag == 0.0 and w.real <= 0.0 and w.real == round(w.real)


def riesz_constant(alpha, d: int):
    """Normalization c_alpha = 2^(1-alpha) pi^((2-d)/2) / (G(alpha/2) G((alpha-d+2)/2)).

    Gamma-function poles give exact zeros.
    """
    alpha = complex(alpha)
    if _is_nonpos_int(alpha / 2) or _is_nonpos_int((alpha - d + 2) / 2):
        return 0.0
    lg = loggamma(alpha / 2) + loggamma((alpha - d + 2) / 2)
    val = 2.0 ** (1.0 - alpha) * np.pi ** ((2.0 - d) / 2.0) * np.exp(-lg)
    val = complex(val)
    return val.real if val.imag == 0.0 else val


@dataclass(frozen=True)
class RieszDistribution:
    sign: int  # +1 retarded (future support), -1 advanced
    alpha: complex
    model: SpacetimeModel

    def __post_init__(self):
        if self.sign not in (+1, -1):
            raise ValueError("sign must be +1 or -1")


def riesz_eval(R: RieszDistribution, y, x):
    """Function-regime value c_alpha Gamma^((alpha-d)/2) on the causal cone, else 0."""
    d = R.model.dim
    alpha = complex(R.alpha)
    if alpha.real < d:
        raise RegimeError(
            f"Re alpha = {alpha.real} < d = {d}: no function regime, use riesz_pair")
    if not R.model.in_causal_cone(y, x, R.sign):
        return 0.0
    gamma = R.model.world_function(y, x)
    p = (alpha - d) / 2.0
    if gamma == 0.0:
        val = riesz_constant(alpha, d) if p == 0.0 else 0.0
    else:
        val = riesz_constant(alpha, d) * np.exp(p * math.log(gamma))
    val = complex(val)
    return val.real if val.imag == 0.0 else val


# -- cone-aligned pairing quadrature ------------------------------------------

def _support_bounds(model, field, x, sign):
    """Offsets (relative to x) covering supp(field) inside the model box.

    Returns (tau_max, lo, hi) with lo/hi the spatial offset bounds, or
    tau_max <= 0 when the future/past of x misses the support entirely.
    """
    box = model.box.copy()
    sb = getattr(field, "support_box", None)
    if sb is not None:
        box[:, 0] = np.maximum(box[:, 0], sb[:, 0])
        box[:, 1] = np.minimum(box[:, 1], sb[:, 1])
        if np.any(box[:, 0] >= box[:, 1]):
            return 0.0, None, None
    if sign > 0:
        tau_max = box[0, 1] - x[0]
    else:
        tau_max = x[0] - box[0, 0]
    if tau_max <= 0.0:
        return 0.0, None, None
    lo = box[1:, 0] - x[1:]
    hi = box[1:, 1] - x[1:]
    return tau_max, lo, hi


def _sphere_nodes(d, n):
    """Spectral quadrature for the unit sphere S^(d-2); returns (omega, weights).

    Trapezoid in the periodic angles, Gauss-Legendre in the d = 4 polar cosine.
    """
    if d == 3:
        theta = 2.0 * np.pi * np.arange(n) / n
        omega = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        w = np.full(n, 2.0 * np.pi / n)
        return omega, w
    nmu = max(8, n // 2)
    mu, wmu = np.polynomial.legendre.leggauss(nmu)
    phi = 2.0 * np.pi * np.arange(n) / n
    wphi = 2.0 * np.pi / n
    sm = np.sqrt(1.0 - mu ** 2)
    omega = np.stack([
        np.outer(sm, np.cos(phi)).ravel(),
        np.outer(sm, np.sin(phi)).ravel(),
        np.outer(mu, np.ones_like(phi)).ravel()], axis=1)
    w = np.outer(wmu, np.full_like(phi, wphi)).ravel()
    return omega, w


_SPHERE_LADDERS = {3: (16, 32, 64, 128, 256, 512, 1024, 2048),
                   4: (16, 32, 64, 128, 256, 512)}  # d=4 node count is ~n^2/2


def _sphere_sum(field, d, centers, radii, rel_tol):
    """Sphere integrals int_{S^(d-2)} field(c + r omega) dOmega.

    Vectorized over (centers, radii); node count doubles per row until the
    row stabilizes over two consecutive doublings, so only rows whose sphere
    crosses a sharp feature pay for high resolution.
    """
    centers = np.asarray(centers, dtype=float)
    radii = np.asarray(radii, dtype=float)
    out = np.zeros(radii.shape)
    idx = np.arange(radii.size)
    sb = getattr(field, "support_box", None)
    if sb is not None:
        # prune spheres that cannot meet the support box
        t_ok = (centers[:, 0] >= sb[0, 0]) & (centers[:, 0] <= sb[0, 1])
        lo_d = np.maximum(sb[1:, 0] - centers[:, 1:], 0.0)
        hi_d = np.maximum(centers[:, 1:] - sb[1:, 1], 0.0)
        near = np.linalg.norm(lo_d + hi_d, axis=1)
        far = np.linalg.norm(np.maximum(np.abs(centers[:, 1:] - sb[1:, 0]),
                                        np.abs(centers[:, 1:] - sb[1:, 1])), axis=1)
        idx = idx[t_ok & (radii >= near) & (radii <= far)]
        if idx.size == 0:
            return out
    prev = None
    for n in _SPHERE_LADDERS[d]:
        omega, wo = _sphere_nodes(d, n)
        sums = np.empty(idx.size)
        l1 = np.empty(idx.size)
        step = max(1, 20_000_000 // (len(wo) * d))  # bound peak memory
        for a in range(0, idx.size, step):
            sel = idx[a:a + step]
            pts = np.empty((sel.size, len(wo), d))
            pts[..., 0] = centers[sel, 0][:, None]
            pts[..., 1:] = centers[sel, 1:][:, None, :] + radii[sel][:, None, None] * omega
            vals = field(pts)
            sums[a:a + step] = vals @ wo
            l1[a:a + step] = np.abs(vals) @ wo
        out[idx] = sums
        if prev is not None:
            # floor scales with each row's absolute mass: rows whose signed
            # sum nearly cancels settle once resolved relative to that mass,
            # not to machine precision
            floor = max(1e-12, 1e-2 * rel_tol) * l1
            settled = np.abs(sums - prev) <= np.maximum(floor,
                                                        rel_tol * np.abs(sums))
            idx = idx[~settled]
            if idx.size == 0:
                return out
            sums = sums[~settled]
        prev = sums
    # ladder exhausted: the finest values stand for the unsettled rows
    return out


def _cone_power(base, p):
    """base^p with base >= 0, continuous limit 0 at base = 0 (Re p >= 1)."""
    base = np.asarray(base, dtype=float)
    if p == 0.0:
        return np.ones_like(base)
    out = np.zeros(base.shape, dtype=complex if p.imag else float)
    pos = base > 0.0
    out[pos] = np.exp(p * np.log(base[pos])) if p.imag else base[pos] ** p.real
    return out


def _cone_quadrature(model, sign, beta, field, x, spec):
    """Integral of c_beta Gamma^((beta-d)/2) * field over the causal cone of x.

    Rewritten in cone-aligned coordinates, where the power factor is smooth
    away from the (now axis-aligned) cone boundary, and handed to the adaptive
    cubature.  For d >= 3 the angular integral is done on a fixed spectral
    sphere grid inside the integrand.
    """
    d = model.dim
    if d not in (2, 3, 4):
        raise RegimeError(f"cone pairing implemented for d in 2..4, got {d}")
    beta = complex(beta)
    p = (beta - d) / 2.0
    cb = riesz_constant(beta, d)
    if cb == 0.0:
        return 0.0
    tau_max, lo, hi = _support_bounds(model, field, x, sign)
    if tau_max <= 0.0:
        return 0.0
    x = np.asarray(x, dtype=float)

    if d == 2:
        # null coordinates u = tau - xi, v = tau + xi; Gamma = u v, dy = du dv / 2.
        # The substitution u = a^2, v = b^2 smooths the power factor along the
        # cone faces, where the integrand is otherwise only C^floor(p).
        umax = tau_max - lo[0]
        vmax = tau_max + hi[0]
        if umax <= 0.0 or vmax <= 0.0:
            return 0.0

        def integrand(ab):
            a, b = ab[..., 0], ab[..., 1]
            u, v = a * a, b * b
            pts = np.empty(u.shape + (2,))
            pts[..., 0] = x[0] + sign * 0.5 * (u + v)
            pts[..., 1] = x[1] + 0.5 * (v - u)
            return 2.0 * _cone_power(a * b, 2.0 * p + 1.0) * field(pts)

        region = np.array([[0.0, math.sqrt(umax)], [0.0, math.sqrt(vmax)]])
    else:
        # u = s v: Gamma = s v^2, r = v (1-s)/2, tau = v (1+s)/2,
        # dy = 2^(1-d) s^p (1-s)^(d-2) v^(2p+d-1) ds dv dOmega.  The sphere
        # integral is evaluated spectrally per node (adaptive resolution);
        # s = sigma^2 smooths the power factor along the otherwise
        # only-C^floor(p) cone face s = 0.
        r_max = math.sqrt(float(np.sum(np.maximum(np.abs(lo), np.abs(hi)) ** 2)))
        vmax = tau_max + r_max
        qexp = 2.0 * p.real + d - 1.0
        ang_tol = max(0.1 * spec.rel_tol, 1e-11)

        def integrand(sv):
            sigma, v = sv[..., 0], sv[..., 1]
            s = sigma * sigma
            tau = v * (1.0 + s) / 2.0
            r = v * (1.0 - s) / 2.0
            centers = np.empty(s.shape + (d,))
            centers[..., 0] = x[0] + sign * tau
            centers[..., 1:] = x[1:]
            ang = _sphere_sum(field, d, centers, r, ang_tol)
            w = 2.0 * _cone_power(sigma, 2.0 * p + 1.0) * (1.0 - s) ** (d - 2) * v ** qexp
            if p.imag:
                w = w * _cone_power(v, 2j * p.imag)
            return 2.0 ** (1 - d) * w * ang

        region = np.array([[0.0, 1.0], [0.0, vmax]])

    # d = 2 needs a fine seed to catch narrow null-coordinate ridges; the
    # d >= 3 (sigma, v) integrand is already sphere-averaged and smooth
    presplit = spec.presplit or ((32, 32) if d == 2 else (8, 8))
    try:
        val = integrate(integrand, region, spec, presplit=presplit)
    except QuadratureError as exc:
        raise QuadratureError(
            f"cone pairing did not reach rel_tol={spec.rel_tol:g} in d={d}: {exc}",
            estimate=_realify(cb * exc.estimate) if exc.estimate is not None else None,
            error_estimate=abs(cb) * exc.error_estimate
            if exc.error_estimate is not None else None) from exc
    return _realify(cb * val)


def _realify(z):
    z = complex(z)
    return z.real if z.imag == 0.0 else z


def pair_field(model, sign, alpha, field: SmoothField, x, spec: QuadratureSpec | None = None):
    """R_sign(alpha)(., x) paired with an arbitrary smooth field.

    Dirac short-circuits at non-positive even integer orders; otherwise the
    order is raised by +2 steps (transferring box onto the field) until the
    integrand is continuous, then integrated in cone-aligned coordinates.
    """
    spec = spec or QuadratureSpec()
    d = model.dim
    x = as_event(x)
    model.check_inside(x)
    alpha = complex(alpha)
    if alpha.imag == 0.0 and alpha.real <= 0.0 and alpha.real / 2 == round(alpha.real / 2):
        j = int(round(-alpha.real / 2))
        return _realify(field.box_power(j, x))
    k = 0
    if alpha.real < d + 2:
        k = math.ceil((d + 2 - alpha.real) / 2)
    beta = alpha + 2 * k
    lifted = DAlembertPowerField(field, k) if k else field
    return _cone_quadrature(model, sign, beta, lifted, x, spec)


def riesz_pair(R: RieszDistribution, phi, x, quad: QuadratureSpec | None = None):
    """Pairing R(alpha)(., x)[phi] for arbitrary complex order."""
    return pair_field(R.model, R.sign, R.alpha, phi, x, quad)


# -- resolvent Riesz distributions --------------------------------------------

@dataclass(frozen=True)
class ResolventRiesz:
    """Kernel of the m-th power of the Green's operator of box - z (order 2m)."""

    sign: int
    z: complex
    order: int  # 2m
    model: SpacetimeModel
    n_series: int = 200
    tail_tol: float = 1e-14

    def __post_init__(self):
        if self.order < 2 or self.order % 2:
            raise ValueError("order must be an even positive integer")

    @property
    def m(self) -> int:
        return self.order // 2


def _series_terms(rr: ResolventRiesz):
    m = rr.m
    for k in range(rr.n_series + 1):
        yield k, math.comb(m + k - 1, k) * complex(rr.z) ** k, 2 * k + 2 * m


def resolvent_riesz_eval(rr: ResolventRiesz, y, x):
    """Entire series sum_k binom(m+k-1,k) z^k R(2k+2m) evaluated pointwise (d=2)."""
    model = rr.model
    if model.dim != 2:
        raise RegimeError("resolvent Riesz function evaluation is d=2 only")
    if not model.in_causal_cone(y, x, rr.sign):
        return 0.0
    gamma = model.world_function(y, x)
    total = 0.0 + 0.0j
    zg4 = abs(rr.z) * gamma / 4.0
    envelope = 1.0
    for k, coeff, order in _series_terms(rr):
        if order >= model.dim:
            c = riesz_constant(order, model.dim)
            power = gamma ** (order // 2 - 1) if gamma > 0.0 else (1.0 if order == 2 else 0.0)
            total += coeff * c * power
        if k >= rr.m:
            envelope = zg4 ** (k + 1) / math.factorial(k + 1) ** 2
            if envelope < rr.tail_tol:
                break
    else:
        raise QuadratureError("resolvent series did not reach its tail bound",
                              estimate=_realify(total), error_estimate=envelope)
    return _realify(total)


def resolvent_riesz_pair(rr: ResolventRiesz, phi, x, quad: QuadratureSpec | None = None):
    """Pairing of the resolvent Riesz distribution, summed term by term."""
    total = 0.0 + 0.0j
    small = 0
    for k, coeff, order in _series_terms(rr):
        if coeff == 0.0:
            continue
        term = coeff * pair_field(rr.model, rr.sign, order, phi, x, quad)
        total += term
        if abs(term) <= 1e-13 * max(1.0, abs(total)):
            small += 1
            if small >= 2 and k >= rr.m:
                return _realify(total)
        else:
            small = 0
    raise QuadratureError("resolvent pairing series did not converge",
                          estimate=_realify(total), error_estimate=None)
