"""Smooth scalar fields with exact partial derivatives.

Everything that gets paired with a Riesz distribution or differentiated by
the wave operator is represented as a :class:`SmoothField`: it evaluates on
batches of points of shape (..., dim) and returns exact partial derivatives
of any requested multi-index (up to a per-type maximum).  Products and sums
stay closed under the algebra via the Leibniz rule, so analytic continuation
(repeated d'Alembertian transfer onto the pairing field) never falls back to
numerical differentiation.

The d'Alembertian convention throughout is box = d_t^2 - sum_i d_i^2.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .errors import UnsupportedOrderError

MAX_BUMP_ORDER = 16


def _as_points(pts, dim):
    arr = np.asarray(pts, dtype=float)
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise ValueError(f"expected {dim} coordinates, got {arr.shape[0]}")
        return arr[None, :], True
    if arr.shape[-1] != dim:
        raise ValueError(f"expected trailing axis {dim}, got {arr.shape[-1]}")
    return arr, False


def _box_compositions(k, dim):
    """Multinomial expansion of (d_t^2 - sum d_i^2)^k.

    Yields (coefficient, exponent-tuple) where the exponent tuple gives the
    per-axis order of differentiation (each entry is 2*j_i).
    """
    for comp in itertools.product(range(k + 1), repeat=dim):
        if sum(comp) != k:
            continue
        coeff = math.factorial(k)
        for j in comp:
            coeff //= math.factorial(j)
        sign = (-1) ** (k - comp[0])
        yield sign * coeff, tuple(2 * j for j in comp)


class SmoothField:
    """Scalar field on R^dim with exact partial derivatives."""

    dim: int

    def deriv(self, mi, pts):
        raise NotImplementedError

    def __call__(self, pts):
        return self.deriv((0,) * self.dim, pts)

    def gradient(self, pts):
        """Coordinate partials, stacked along the last axis."""
        parts = []
        for i in range(self.dim):
            mi = [0] * self.dim
            mi[i] = 1
            parts.append(self.deriv(tuple(mi), pts))
        return np.stack(parts, axis=-1)

    def box(self, pts):
        total = None
        for i in range(self.dim):
            mi = [0] * self.dim
            mi[i] = 2
            term = self.deriv(tuple(mi), pts)
            term = term if i == 0 else -term
            total = term if total is None else total + term
        return total

    def box_power(self, k, pts):
        if k == 0:
            return self(pts)
        total = None
        for coeff, mi in _box_compositions(k, self.dim):
            term = coeff * self.deriv(mi, pts)
            total = term if total is None else total + term
        return total

    def box_power_deriv(self, k, mi, pts):
        """Partial derivative mi of box^k applied to this field."""
        if k == 0:
            return self.deriv(mi, pts)
        total = None
        for coeff, bmi in _box_compositions(k, self.dim):
            full = tuple(a + b for a, b in zip(mi, bmi))
            term = coeff * self.deriv(full, pts)
            total = term if total is None else total + term
        return total

    support_box = None  # (dim, 2) array, or None when not compactly supported

    # algebra ----------------------------------------------------------------

    def __mul__(self, other):
        if isinstance(other, SmoothField):
            return ProductField(self, other)
        return ScaledField(self, other)

    __rmul__ = __mul__

    def __add__(self, other):
        if isinstance(other, SmoothField):
            return SumField([self, other])
        return SumField([self, ConstantField(other, self.dim)])

    def __sub__(self, other):
        if isinstance(other, SmoothField):
            return SumField([self, ScaledField(other, -1.0)])
        return SumField([self, ConstantField(-other, self.dim)])

    def __neg__(self):
        return ScaledField(self, -1.0)


class ConstantField(SmoothField):
    def __init__(self, value, dim):
        self.value = value
        self.dim = dim

    def deriv(self, mi, pts):
        pts, single = _as_points(pts, self.dim)
        dtype = complex if isinstance(self.value, complex) else float
        out = np.zeros(pts.shape[:-1], dtype=dtype)
        if all(m == 0 for m in mi):
            out += self.value
        return out[0] if single else out


class ScaledField(SmoothField):
    def __init__(self, base, scale):
        self.base = base
        self.scale = scale
        self.dim = base.dim
        self.support_box = base.support_box

    def deriv(self, mi, pts):
        return self.scale * self.base.deriv(mi, pts)


class SumField(SmoothField):
    def __init__(self, fields):
        flat = []
        for f in fields:
            if isinstance(f, SumField):
                flat.extend(f.fields)
            else:
                flat.append(f)
        self.fields = flat
        self.dim = flat[0].dim
        boxes = [f.support_box for f in flat]
        if all(b is not None for b in boxes):
            lo = np.min([b[:, 0] for b in boxes], axis=0)
            hi = np.max([b[:, 1] for b in boxes], axis=0)
            self.support_box = np.stack([lo, hi], axis=1)

    def deriv(self, mi, pts):
        total = self.fields[0].deriv(mi, pts)
        for f in self.fields[1:]:
            total = total + f.deriv(mi, pts)
        return total


def _sub_multi_indices(mi):
    return itertools.product(*(range(m + 1) for m in mi))


class ProductField(SmoothField):
    """Pointwise product; derivatives via the general Leibniz rule."""

    def __init__(self, left, right):
        self.left = left
        self.right = right
        self.dim = left.dim
        boxes = [b for b in (left.support_box, right.support_box) if b is not None]
        if boxes:
            # support of a product is contained in the intersection
            lo = np.max([b[:, 0] for b in boxes], axis=0)
            hi = np.min([b[:, 1] for b in boxes], axis=0)
            self.support_box = np.stack([lo, np.maximum(lo, hi)], axis=1)

    def deriv(self, mi, pts):
        total = None
        for sub in _sub_multi_indices(mi):
            coeff = 1
            for m, s in zip(mi, sub):
                coeff *= math.comb(m, s)
            rest = tuple(m - s for m, s in zip(mi, sub))
            term = coeff * self.left.deriv(sub, pts) * self.right.deriv(rest, pts)
            total = term if total is None else total + term
        return total


class DAlembertPowerField(SmoothField):
    """box^k applied to a base field, exposed as a field in its own right."""

    def __init__(self, base, k):
        self.base = base
        self.k = k
        self.dim = base.dim
        self.support_box = base.support_box

    def deriv(self, mi, pts):
        return self.base.box_power_deriv(self.k, mi, pts)

    def box_power_deriv(self, k, mi, pts):
        # collapse nested powers so the base field sees one merged expansion
        return self.base.box_power_deriv(k + self.k, mi, pts)


class MonomialField(SmoothField):
    """Polynomial as a dict {exponent tuple: coefficient}."""

    def __init__(self, terms, dim):
        self.terms = dict(terms)
        self.dim = dim

    def deriv(self, mi, pts):
        pts, single = _as_points(pts, self.dim)
        out = np.zeros(pts.shape[:-1], dtype=complex)
        for expo, coeff in self.terms.items():
            c = coeff
            new = []
            for e, m in zip(expo, mi):
                if m > e:
                    c = 0
                    break
                c *= math.perm(e, m)
                new.append(e - m)
            if c == 0:
                continue
            mono = np.ones(pts.shape[:-1])
            for ax, e in enumerate(new):
                if e:
                    mono = mono * pts[..., ax] ** e
            out = out + c * mono
        if np.all(out.imag == 0):
            out = out.real
        return out[0] if single else out


# -- tensor-product bump fields ----------------------------------------------

@lru_cache(maxsize=None)
def _bump_numerators(max_order):
    """Numerator polynomials P_n with D^n b = P_n(u) / (1-u^2)^(2n) * b(u).

    Recurrence: P_{n+1} = P_n' (1-u^2)^2 + (4 n u (1-u^2) - 2u) P_n.
    """
    from numpy.polynomial import polynomial as P

    one_minus_u2 = np.array([1.0, 0.0, -1.0])
    sq = P.polymul(one_minus_u2, one_minus_u2)
    polys = [np.array([1.0])]
    for n in range(max_order):
        pn = polys[-1]
        term1 = P.polymul(P.polyder(pn), sq)
        lin = P.polyadd(P.polymul(np.array([0.0, 4.0 * n]), one_minus_u2),
                        np.array([0.0, -2.0]))
        term2 = P.polymul(lin, pn)
        polys.append(P.polyadd(term1, term2))
    return polys


def _bump_axis_deriv(u, n):
    """n-th derivative of exp(-1/(1-u^2)) w.r.t. u, vectorized, zero outside (-1, 1)."""
    from numpy.polynomial import polynomial as P

    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    if not np.any(inside):
        return out
    ui = u[inside]
    w = 1.0 - ui * ui
    base = np.exp(-1.0 / w)
    if n == 0:
        out[inside] = base
        return out
    pn = _bump_numerators(MAX_BUMP_ORDER)[n]
    out[inside] = P.polyval(ui, pn) / w ** (2 * n) * base
    return out


def _bump_axis_table(ui, nmax):
    """Derivative orders 0..nmax of exp(-1/(1-u^2)) at points inside (-1, 1).

    The exponential and 1/(1-u^2) are computed once and shared by all
    orders, unlike repeated _bump_axis_deriv calls.
    """
    from numpy.polynomial import polynomial as P

    w = 1.0 - ui * ui
    base = np.exp(-1.0 / w)
    rows = [base]
    if nmax > 0:
        nums = _bump_numerators(MAX_BUMP_ORDER)
        winv2 = 1.0 / (w * w)
        scale = np.ones_like(w)
        for n in range(1, nmax + 1):
            scale = scale * winv2
            rows.append(P.polyval(ui, nums[n]) * scale * base)
    return rows


class BumpField(SmoothField):
    """amplitude * prod_i exp(-1 / (1 - u_i^2)), u_i = (y_i - c_i)/w_i.

    Compactly supported in the open box center +- widths; all derivatives
    exist, vanish at the support boundary, and are evaluated from the exact
    rational-prefactor recurrence (orders up to 16 per request).
    """

    def __init__(self, center, widths, amplitude=1.0):
        self.center = np.asarray(center, dtype=float)
        self.widths = np.asarray(widths, dtype=float)
        if np.any(self.widths <= 0):
            raise ValueError("half-widths must be positive")
        self.amplitude = amplitude
        self.dim = self.center.shape[0]
        self.support_box = np.stack(
            [self.center - self.widths, self.center + self.widths], axis=1)

    def deriv(self, mi, pts):
        if sum(mi) > MAX_BUMP_ORDER:
            raise UnsupportedOrderError(
                f"derivative order {sum(mi)} exceeds supported maximum {MAX_BUMP_ORDER}")
        pts, single = _as_points(pts, self.dim)
        dtype = complex if isinstance(self.amplitude, complex) else float
        out = np.zeros(pts.shape[:-1], dtype=dtype)
        us = (pts - self.center) / self.widths
        inside = np.all(np.abs(us) < 1.0, axis=-1)
        if np.any(inside):
            usi = us[inside]
            acc = np.full(usi.shape[0], self.amplitude, dtype=dtype)
            for ax in range(self.dim):
                acc = acc * (_bump_axis_table(usi[:, ax], mi[ax])[mi[ax]]
                             / self.widths[ax] ** mi[ax])
            out[inside] = acc
        return out[0] if single else out

    def box_power_deriv(self, k, mi, pts):
        """Shared-exponential evaluation of the box^k derivative expansion."""
        if k == 0:
            return self.deriv(mi, pts)
        if sum(mi) + 2 * k > MAX_BUMP_ORDER:
            raise UnsupportedOrderError(
                f"derivative order {sum(mi) + 2 * k} exceeds supported maximum "
                f"{MAX_BUMP_ORDER}")
        pts, single = _as_points(pts, self.dim)
        dtype = complex if isinstance(self.amplitude, complex) else float
        out = np.zeros(pts.shape[:-1], dtype=dtype)
        us = (pts - self.center) / self.widths
        inside = np.all(np.abs(us) < 1.0, axis=-1)
        if np.any(inside):
            usi = us[inside]
            tables = [_bump_axis_table(usi[:, ax], mi[ax] + 2 * k)
                      for ax in range(self.dim)]
            acc = np.zeros(usi.shape[0], dtype=dtype)
            for coeff, bmi in _box_compositions(k, self.dim):
                prod = None
                for ax in range(self.dim):
                    n = mi[ax] + bmi[ax]
                    f = tables[ax][n] / self.widths[ax] ** n
                    prod = f if prod is None else prod * f
                acc += coeff * prod
            out[inside] = self.amplitude * acc
        return out[0] if single else out


@lru_cache(maxsize=None)
def _ellipsoid_profile_polys(max_order):
    """Q_j with d^j/dtau^j exp(-1/(1-tau)) = Q_j(v) exp(-v), v = 1/(1-tau).

    d/dtau = v^2 d/dv on functions of v, so Q_{j+1} = v^2 (Q_j' - Q_j).
    """
    from numpy.polynomial import polynomial as P

    v2 = np.array([0.0, 0.0, 1.0])
    polys = [np.array([1.0])]
    for _ in range(max_order):
        q = polys[-1]
        polys.append(P.polymul(v2, P.polysub(P.polyder(q), q)))
    return polys


class EllipsoidBumpField(SmoothField):
    """amplitude * exp(-1/(1 - tau)), tau = sum ((y_i - c_i)/w_i)^2.

    Supported in an open ellipsoid rather than a box.  Because the profile
    depends on the coordinates only through the single quadratic tau,
    derivatives reduce to profile derivatives times monomials in the scaled
    offsets, and the field is constant on any sphere centered at the
    spatial center with equal spatial widths -- which makes sphere-averaged
    quadratures of such probes settle immediately.
    """

    def __init__(self, center, widths, amplitude=1.0):
        self.center = np.asarray(center, dtype=float)
        self.widths = np.asarray(widths, dtype=float)
        if np.any(self.widths <= 0):
            raise ValueError("half-widths must be positive")
        self.amplitude = amplitude
        self.dim = self.center.shape[0]
        self.support_box = np.stack(
            [self.center - self.widths, self.center + self.widths], axis=1)
        self._terms_cache = {}

    def _terms(self, mi):
        """D^mi as {(j, monomial exponents): coefficient} acting on g^(j)(tau) u^e.

        tau is quadratic in the scaled offsets u_i, so each coordinate
        derivative maps a term to two: d/dy_a [g^(j) u^e]
          = (2/w_a) g^(j+1) u^(e+delta_a) + (e_a/w_a) g^(j) u^(e-delta_a).
        """
        mi = tuple(mi)
        if mi in self._terms_cache:
            return self._terms_cache[mi]
        terms = {(0, (0,) * self.dim): 1.0}
        for ax in range(self.dim):
            for _ in range(mi[ax]):
                new = {}
                for (j, e), c in terms.items():
                    up = list(e)
                    up[ax] += 1
                    key = (j + 1, tuple(up))
                    new[key] = new.get(key, 0.0) + 2.0 * c / self.widths[ax]
                    if e[ax] > 0:
                        dn = list(e)
                        dn[ax] -= 1
                        key = (j, tuple(dn))
                        new[key] = new.get(key, 0.0) + e[ax] * c / self.widths[ax]
                terms = new
        self._terms_cache[mi] = terms
        return terms

    def _eval_terms(self, terms, pts, single):
        from numpy.polynomial import polynomial as P

        dtype = complex if isinstance(self.amplitude, complex) else float
        out = np.zeros(pts.shape[:-1], dtype=dtype)
        us = (pts - self.center) / self.widths
        tau = np.sum(us * us, axis=-1)
        inside = tau < 1.0
        if np.any(inside):
            usi = us[inside]
            v = 1.0 / (1.0 - tau[inside])
            base = np.exp(-v)
            polys = _ellipsoid_profile_polys(MAX_BUMP_ORDER)
            jmax = max(j for j, _ in terms)
            gtab = [P.polyval(v, polys[j]) * base for j in range(jmax + 1)]
            acc = np.zeros(usi.shape[0], dtype=dtype)
            for (j, e), c in terms.items():
                f = gtab[j]
                for ax in range(self.dim):
                    if e[ax]:
                        f = f * usi[:, ax] ** e[ax]
                acc += c * f
            out[inside] = self.amplitude * acc
        return out[0] if single else out

    def deriv(self, mi, pts):
        if sum(mi) > MAX_BUMP_ORDER:
            raise UnsupportedOrderError(
                f"derivative order {sum(mi)} exceeds supported maximum {MAX_BUMP_ORDER}")
        pts, single = _as_points(pts, self.dim)
        return self._eval_terms(self._terms(mi), pts, single)

    def box_power_deriv(self, k, mi, pts):
        """Merge the box^k composition into a single term table before evaluating."""
        if k == 0:
            return self.deriv(mi, pts)
        if sum(mi) + 2 * k > MAX_BUMP_ORDER:
            raise UnsupportedOrderError(
                f"derivative order {sum(mi) + 2 * k} exceeds supported maximum "
                f"{MAX_BUMP_ORDER}")
        pts, single = _as_points(pts, self.dim)
        merged = {}
        for coeff, bmi in _box_compositions(k, self.dim):
            full = tuple(a + b for a, b in zip(mi, bmi))
            for key, c in self._terms(full).items():
                merged[key] = merged.get(key, 0.0) + coeff * c
        return self._eval_terms(merged, pts, single)
