"""Hadamard coefficients for wave-type operators P = box + b, shifted by z.

The coefficients V^k(y, x) solve the transport recursion along the radial
geodesic c(s) = x + s (y - x),

    s V' + (k + w(s)/2) V = -k (P V^{k-1})(c(s)),    w = (1/2) box Gamma - d,

whose bounded-at-s=0 branch is the weighted line integral

    V^k(y, x) = -k int_0^1 s^{k-1} (P V^{k-1})(x + s (y - x), x) ds

on the flat backend (w == 0), with V^0 == 1.  Constant potentials have the
closed form V^k = (z - b)^k.

Everything else is solved with per-base-point derivative tables: for fixed x
every partial derivative obeys the same kind of line integral,

    D^a V^k(y) = -k int_0^1 s^(k-1+|a|) (D^a f_{k-1})(c(s)) ds,
    f_k = (box + b - z) V^k,

and D^a f_k is a finite combination of deeper derivatives of V^k and exact
derivatives of the potential (Leibniz).  Tabulating these jets on a Chebyshev
tensor grid and interpolating along geodesics keeps every level free of
numerical differentiation, so errors stay at quadrature level instead of
being amplified by repeated spectral or finite differencing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .fields import ConstantField, SmoothField
from .geometry import SpacetimeModel, as_event

_GRID_N = 32  # Chebyshev points per axis minus one
_LINE_TOL = 1e-13


def _as_field(potential, dim) -> SmoothField:
    if isinstance(potential, SmoothField):
        return potential
    return ConstantField(complex(potential) if isinstance(potential, complex)
                         else float(potential), dim)


@dataclass(frozen=True)
class OperatorSpec:
    """P - z with P = box + b(y); b constant, polynomial, or bump."""

    model: SpacetimeModel
    potential: object = 0.0
    z: complex = 0.0

    def __post_init__(self):
        object.__setattr__(self, "potential", _as_field(self.potential, self.model.dim))
        object.__setattr__(self, "z", complex(self.z))

    @property
    def constant_potential(self):
        """The constant value of b, or None when b varies."""
        if isinstance(self.potential, ConstantField):
            return complex(self.potential.value)
        return None

    def potential_shift(self, dz) -> "OperatorSpec":
        """Same P, spectral shift increased by dz (operator P - z - dz)."""
        return OperatorSpec(self.model, self.potential, self.z + dz)

    def pz_values(self, pts):
        """b(y) - z on a batch of points."""
        return self.potential(pts) - self.z


# -- Chebyshev machinery -------------------------------------------------------

@lru_cache(maxsize=None)
def _cheb_nodes(n):
    """Chebyshev-Lobatto nodes on [-1, 1] and barycentric weights."""
    j = np.arange(n + 1)
    x = np.cos(np.pi * j / n)
    bary = (-1.0) ** j
    bary[0] *= 0.5
    bary[-1] *= 0.5
    return x, bary


def _axis_interp_weights(p, nodes, bary):
    """Barycentric weight matrix L with f(p) = L @ f(nodes), rows normalized."""
    diff = p[:, None] - nodes[None, :]
    hit = np.abs(diff) < 1e-14
    with np.errstate(divide="ignore", invalid="ignore"):
        L = bary[None, :] / diff
    rows = hit.any(axis=1)
    if np.any(rows):
        L[rows] = hit[rows].astype(float)
    return L / L.sum(axis=1)[:, None]


@lru_cache(maxsize=None)
def _gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _sub_indices(alpha):
    import itertools
    return itertools.product(*(range(a + 1) for a in alpha))


class _ChebTable:
    """Tensor Chebyshev grid over the domain box with barycentric interpolation."""

    def __init__(self, model, n=_GRID_N):
        self.model = model
        self.n = n
        x, bary = _cheb_nodes(n)
        self.bary = bary
        self.nodes = []
        for ax in range(model.dim):
            lo, hi = model.box[ax]
            self.nodes.append(0.5 * (lo + hi) + 0.5 * (hi - lo) * x)
        grids = np.meshgrid(*self.nodes, indexing="ij")
        self.points = np.stack(grids, axis=-1)

    def interp_ops(self, pts):
        """Per-axis barycentric weight matrices for a flat point batch."""
        flat = np.asarray(pts, dtype=float).reshape(-1, self.model.dim)
        return [_axis_interp_weights(flat[:, ax], self.nodes[ax], self.bary)
                for ax in range(self.model.dim)]

    @staticmethod
    def interp_apply(ops, vals):
        """Evaluate grid values at the points the ops were built for."""
        v0 = vals.flat[0]
        if np.all(np.abs(vals - v0) <= 1e-14 * max(1.0, abs(v0))):
            # constant table: interpolation is exact and free
            return np.full(ops[0].shape[0], v0)
        res = vals
        for ax, L in enumerate(ops):
            if ax == 0:
                res = L @ res if vals.ndim <= 2 else np.einsum("mi,i...->m...", L, res)
            else:
                res = np.einsum("mi,mi...->m...", L, res)
        return res

    def interp(self, vals, pts):
        """Barycentric tensor interpolation of grid values at pts (..., dim)."""
        pts = np.asarray(pts, dtype=float)
        out = self.interp_apply(self.interp_ops(pts), vals)
        return out.reshape(pts.shape[:-1])


class _TransportTable:
    """Jet tables D^a V^k on the grid for one base point x."""

    def __init__(self, op, x, grid):
        self.op = op
        self.x = np.asarray(x, dtype=float)
        self.grid = grid
        self.shape = grid.points.shape[:-1]
        self._jets = {}     # (k, alpha) -> grid of D^alpha V^k
        self._sources = {}  # (k, alpha) -> grid of D^alpha (P - z) V^k
        self._bder = {}     # alpha -> grid of D^alpha b, or None when zero
        self._grid_ops = {}  # nq -> interp ops for the grid-target line points

    # potential derivative grids, with exact-zero pruning ----------------------

    def _b_deriv(self, alpha):
        vals = self._bder.get(alpha, False)
        if vals is False:
            vals = self.op.potential.deriv(alpha, self.grid.points)
            if not np.any(vals):
                vals = None
            self._bder[alpha] = vals
        return vals

    # jets ---------------------------------------------------------------------

    def jet(self, k, alpha):
        """Grid values of D^alpha V^k(., x)."""
        key = (k, alpha)
        vals = self._jets.get(key)
        if vals is None:
            if k == 0:
                vals = (np.ones(self.shape, dtype=complex) if not any(alpha)
                        else np.zeros(self.shape, dtype=complex))
            else:
                src = self.source(k - 1, alpha)
                flat = self.grid.points.reshape(-1, self.op.model.dim)
                vals = self._line_integral(k, alpha, src, flat,
                                           ops_cache=self._grid_ops).reshape(self.shape)
            self._jets[key] = vals
        return vals

    def source(self, k, alpha):
        """Grid values of D^alpha [(box + b - z) V^k](., x)."""
        key = (k, alpha)
        vals = self._sources.get(key)
        if vals is None:
            d = self.op.model.dim
            up = list(alpha)
            up[0] += 2
            vals = self.jet(k, tuple(up))
            for ax in range(1, d):
                up = list(alpha)
                up[ax] += 2
                vals = vals - self.jet(k, tuple(up))
            for beta in _sub_indices(alpha):
                bder = self._b_deriv(beta)
                if bder is None:
                    continue
                c = 1.0
                for a, b in zip(alpha, beta):
                    c *= math.comb(a, b)
                vals = vals + c * bder * self.jet(k, tuple(a - b for a, b in zip(alpha, beta)))
            vals = vals - self.op.z * self.jet(k, alpha)
            self._sources[key] = vals
        return vals

    def _line_integral(self, k, alpha, src, ys, ops_cache=None):
        """-k int_0^1 s^(k-1+|alpha|) src(x + s (ys - x)) ds, batched over ys.

        Interpolation operators depend only on the target points, so grid
        builds (same targets for every jet) pass a shared cache.
        """
        x = self.x
        power = k - 1 + sum(alpha)
        n_ys = ys.shape[0]
        prev = None
        for nq in (48, 96, 192, 384):
            s, w = _gauss01(nq)
            cur = np.empty(n_ys, dtype=complex)
            step = max(1, 2_000_000 // nq)  # bound peak interpolation memory
            for a in range(0, n_ys, step):
                sel = ys[a:a + step]
                ops = None if ops_cache is None or n_ys > step else ops_cache.get(nq)
                if ops is None:
                    pts = x[None, None, :] + s[None, :, None] * (sel[:, None, :] - x[None, None, :])
                    ops = self.grid.interp_ops(pts)
                    if ops_cache is not None and n_ys <= step:
                        ops_cache[nq] = ops
                vals = self.grid.interp_apply(ops, src).reshape(sel.shape[0], nq)
                cur[a:a + step] = -k * (vals * s ** power) @ w
            if prev is not None:
                scale = max(np.max(np.abs(cur)), 1.0)
                if np.max(np.abs(cur - prev)) <= _LINE_TOL * scale:
                    return cur
            prev = cur
        return prev

    def eval_deriv(self, k, alpha, ys):
        """D^alpha V^k(ys, x) at arbitrary points.

        Off-grid values come from the jet table by barycentric interpolation;
        the jets are at least as smooth as the potential, so this stays at
        the table's own accuracy and is far cheaper than re-integrating the
        transport line for every query point.
        """
        ys = np.asarray(ys, dtype=float)
        if k == 0:
            return (np.ones(ys.shape[0], dtype=complex) if not any(alpha)
                    else np.zeros(ys.shape[0], dtype=complex))
        vals = self.jet(k, alpha)
        out = np.empty(ys.shape[0], dtype=complex)
        step = 500_000  # bound peak interpolation memory
        for a in range(0, ys.shape[0], step):
            out[a:a + step] = self.grid.interp(vals, ys[a:a + step])
        return out


class _TransportSolver:
    """Caches one jet table per base point for a fixed operator."""

    def __init__(self, op, grid_n=_GRID_N):
        self.op = op
        self.grid = _ChebTable(op.model, grid_n)
        self._tables = {}

    def table(self, x):
        key = tuple(np.round(np.asarray(x, dtype=float), 12))
        tab = self._tables.get(key)
        if tab is None:
            # Jet tables are large; keep only the most recent few base points.
            while len(self._tables) >= 4:
                self._tables.pop(next(iter(self._tables)))
            tab = self._tables[key] = _TransportTable(self.op, x, self.grid)
        return tab


class HadamardCoefficient:
    """Evaluator V^k(y, x); subclasses define eval_many."""

    def __init__(self, op, k):
        self.op = op
        self.k = k

    def eval_many(self, ys, x):
        raise NotImplementedError

    def deriv_many(self, alpha, ys, x):
        """D^alpha_y V^k(ys, x); exact for closed forms."""
        raise NotImplementedError

    def __call__(self, y, x):
        y, x = as_event(y), as_event(x)
        self.op.model.check_inside(y, x)
        val = complex(self.eval_many(y[None, :], x)[0])
        return val.real if val.imag == 0.0 else val

    def as_field(self, x) -> "CoefficientField":
        return CoefficientField(self, x)


class ClosedFormCoefficient(HadamardCoefficient):
    """V^k = (z - b)^k for constant potential b."""

    def __init__(self, op, k):
        super().__init__(op, k)
        self.value = (op.z - op.constant_potential) ** k if k else 1.0 + 0j

    def eval_many(self, ys, x):
        return np.full(np.asarray(ys).shape[0], self.value)

    def deriv_many(self, alpha, ys, x):
        n = np.asarray(ys).shape[0]
        return np.full(n, self.value) if not any(alpha) else np.zeros(n, dtype=complex)


class TransportCoefficient(HadamardCoefficient):
    """V^k from the numerical transport recursion."""

    def __init__(self, op, k, solver=None):
        super().__init__(op, k)
        self.solver = solver or _TransportSolver(op)

    def eval_many(self, ys, x):
        tab = self.solver.table(as_event(x))
        return tab.eval_deriv(self.k, (0,) * self.op.model.dim, np.asarray(ys, dtype=float))

    def deriv_many(self, alpha, ys, x):
        tab = self.solver.table(as_event(x))
        return tab.eval_deriv(self.k, tuple(alpha), np.asarray(ys, dtype=float))


class CombinationCoefficient(HadamardCoefficient):
    """Finite linear combination of coefficients (shift formula output)."""

    def __init__(self, op, k, parts):
        super().__init__(op, k)
        self.parts = list(parts)  # (scalar, coefficient)

    def eval_many(self, ys, x):
        total = np.zeros(np.asarray(ys).shape[0], dtype=complex)
        for c, coeff in self.parts:
            total = total + c * coeff.eval_many(ys, x)
        return total

    def deriv_many(self, alpha, ys, x):
        total = np.zeros(np.asarray(ys).shape[0], dtype=complex)
        for c, coeff in self.parts:
            total = total + c * coeff.deriv_many(alpha, ys, x)
        return total


class CoefficientField(SmoothField):
    """V^k(., x) for fixed x as a smooth field (derivatives from the jets)."""

    def __init__(self, coeff: HadamardCoefficient, x):
        self.coeff = coeff
        self.x = as_event(x)
        self.dim = coeff.op.model.dim

    def deriv(self, mi, pts):
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        flat = pts.reshape(-1, self.dim)
        out = self.coeff.deriv_many(tuple(mi), flat, self.x)
        if np.all(out.imag == 0.0):
            out = out.real
        out = out.reshape(pts.shape[:-1]) if not single else out[0]
        return out


def solve_transport(op: OperatorSpec, k: int, prev: HadamardCoefficient | None = None,
                    grid_n: int = _GRID_N) -> HadamardCoefficient:
    """Bounded-branch solution of the k-th transport equation.

    The regular singular point at s = 0 admits a second branch ~ s^(-k);
    the line-integral representation selects the bounded one automatically,
    which is what pins V^0(x, x) = 1 and the whole family uniquely.
    """
    if k < 0:
        raise ValueError("transport index must be >= 0")
    solver = prev.solver if isinstance(prev, TransportCoefficient) else None
    if solver is None:
        solver = _TransportSolver(op, grid_n)
    return TransportCoefficient(op, k, solver)


@dataclass
class HadamardFamily:
    """Coefficients V^0..V^K for one operator."""

    operator: OperatorSpec
    coefficients: list = field(default_factory=list)

    @property
    def max_index(self):
        return len(self.coefficients) - 1

    def __getitem__(self, k) -> HadamardCoefficient:
        return self.coefficients[k]

    def eval(self, k, y, x):
        return self.coefficients[k](y, x)


def hadamard_family(op: OperatorSpec, K: int, method: str = "auto",
                    grid_n: int = _GRID_N) -> HadamardFamily:
    """Build V^0..V^K; closed forms for constant potentials unless forced."""
    if method not in ("auto", "closed", "numerical"):
        raise ValueError(f"unknown method {method!r}")
    closed = op.constant_potential is not None and method != "numerical"
    if method == "closed" and op.constant_potential is None:
        raise ValueError("closed-form family requires a constant potential")
    if closed:
        coeffs = [ClosedFormCoefficient(op, k) for k in range(K + 1)]
    else:
        solver = _TransportSolver(op, grid_n)
        coeffs = [TransportCoefficient(op, k, solver) for k in range(K + 1)]
    return HadamardFamily(op, coeffs)


def shift_coefficients(family: HadamardFamily, z) -> HadamardFamily:
    """Family of P - (z0 + z) from the family of P - z0.

    V^k(z) = sum_m binom(k, m) z^m V^(k-m); closed forms stay closed.
    """
    z = complex(z)
    op = family.operator.potential_shift(z)
    if all(isinstance(c, ClosedFormCoefficient) for c in family.coefficients):
        return hadamard_family(op, family.max_index, method="closed")
    coeffs = []
    for k in range(family.max_index + 1):
        parts = [(math.comb(k, m) * z ** m, family[k - m]) for m in range(k + 1)]
        coeffs.append(CombinationCoefficient(op, k, parts))
    return HadamardFamily(op, coeffs)


def heat_shift(a, z, K=None):
    """Heat-coefficient shift: a_k -> sum_m z^m / m! a_(k-m)."""
    a = list(a)
    z = complex(z)
    K = len(a) - 1 if K is None else K
    out = []
    for k in range(K + 1):
        s = sum(z ** m / math.factorial(m) * a[k - m]
                for m in range(min(k, len(a) - 1) + 1))
        out.append(s.real if isinstance(s, complex) and s.imag == 0.0 else s)
    return out


def _fd_box(evaluate, y, x, model, h=None):
    """Fourth-order central-difference d'Alembertian in the first slot."""
    d = model.dim
    if h is None:
        h = 1e-3 * model.extent
    offs = np.array([-2.0, -1.0, 1.0, 2.0]) * h
    pts = [y]
    for ax in range(d):
        for o in offs:
            p = y.copy()
            p[ax] += o
            if not model.contains(p):
                raise DomainError(f"difference stencil around {y} leaves the domain box")
            pts.append(p)
    vals = np.asarray(evaluate(np.asarray(pts), x), dtype=complex)
    center = vals[0]
    total = 0.0 + 0j
    w = np.array([-1.0, 16.0, 16.0, -1.0])
    for ax in range(d):
        block = vals[1 + 4 * ax: 5 + 4 * ax]
        second = (w @ block - 30.0 * center) / (12.0 * h * h)
        total = total + (second if ax == 0 else -second)
    return total


def apply_P(op: OperatorSpec, V, y, x):
    """(box + b - z) V(., x) evaluated at y.

    Exact for constant coefficients and smooth fields; otherwise the
    d'Alembertian falls back to fourth-order central differences with a
    box-scaled step (fixed, for reproducible residuals).
    """
    y, x = as_event(y), as_event(x)
    op.model.check_inside(y, x)
    bz = complex(op.pz_values(y[None, :])[0])
    if isinstance(V, (ClosedFormCoefficient, TransportCoefficient, CombinationCoefficient)):
        d = op.model.dim
        boxv = V.deriv_many((2,) + (0,) * (d - 1), y[None, :], x)[0]
        for ax in range(1, d):
            alpha = [0] * d
            alpha[ax] = 2
            boxv = boxv - V.deriv_many(tuple(alpha), y[None, :], x)[0]
        val = boxv + bz * complex(V.eval_many(y[None, :], x)[0])
    elif isinstance(V, SmoothField):
        val = complex(V.box(y[None, :])[0] + bz * V(y[None, :])[0])
    else:
        def ev(pts, base):
            return np.array([V(p, base) for p in pts], dtype=complex)
        val = _fd_box(ev, y, x, op.model) + bz * complex(V(y, x))
    val = complex(val)
    return val.real if val.imag == 0.0 else val


def diagonal_check(op: OperatorSpec, family: HadamardFamily, K: int, points=None):
    """Max residual of P V^k |diag = -V^(k+1) |diag for k <= K.

    Requires the family to reach index K + 1.
    """
    if family.max_index < K + 1:
        raise ValueError("family must reach index K + 1 for the diagonal identity")
    if points is None:
        box = op.model.box
        mid = box.mean(axis=1)
        span = 0.25 * (box[:, 1] - box[:, 0])
        rng = np.random.default_rng(20240211)
        points = mid[None, :] + span[None, :] * rng.uniform(-1, 1, size=(5, op.model.dim))
    per_k = {}
    for k in range(K + 1):
        worst = 0.0
        for x in np.asarray(points, dtype=float):
            lhs = apply_P(op, family[k], x, x)
            rhs = -family[k + 1](x, x)
            worst = max(worst, abs(lhs - rhs))
        per_k[k] = worst
    return {"per_k": per_k, "max_residual": max(per_k.values())}
