"""Truncated expansions for powers and resolvents of causal Green's operators.

Every kernel approximated here is a finite sum of (rational coefficient)
x (Hadamard coefficient V^k) x (Riesz distribution): powers G^m of the
retarded/advanced Green's operator, the exact negative-power case, the
error term E_N, the two-variable z-expansion, and the resolvent expansion
built on resolvent Riesz kernels.  Coefficients live in exact rational
arithmetic (generalized binomials) so that any residual measured against
an oracle is quadrature or transport error, never coefficient error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from .errors import RegimeError
from .fields import ConstantField, DAlembertPowerField, SmoothField
from .geometry import as_event
from .hadamard import (CoefficientField, HadamardFamily, OperatorSpec, apply_P,
                       hadamard_family)
from .riesz import (ResolventRiesz, pair_field, resolvent_riesz_eval,
                    resolvent_riesz_pair, riesz_constant)
from .testfn import QuadratureSpec


def gbinom(a: int, b: int) -> Fraction:
    """Generalized binomial a(a-1)...(a-b+1)/b! for integer a, b >= 0."""
    if b < 0:
        return Fraction(0)
    num = 1
    for i in range(b):
        num *= a - i
    return Fraction(num, math.factorial(b))


@dataclass(frozen=True)
class Term:
    """One expansion summand: rational * scalar * W^k * R.

    W^k is V^k by default, or P V^k for the remainder term; R is the
    standard Riesz distribution of the given order, or the resolvent one
    R(z, order) when z is set.
    """

    rational: Fraction
    k: int
    order: int
    z: complex | None = None
    scalar: complex = 1.0
    remainder: bool = False

    @property
    def coefficient(self) -> complex:
        c = complex(self.rational) * self.scalar
        return c.real if c.imag == 0.0 else c


@dataclass
class TruncatedExpansion:
    """Finite term list approximating the kernel of an operator power."""

    operator: OperatorSpec
    sign: int
    power: int
    truncation: int
    terms: list = dc_field(default_factory=list)
    family: HadamardFamily | None = None

    def __post_init__(self):
        if self.family is None:
            kmax = max((t.k + (1 if t.remainder else 0) for t in self.terms), default=0)
            self.family = hadamard_family(self.operator, kmax)

    def coefficient_field(self, term: Term, x) -> SmoothField:
        """W^k(., x) of one term as a smooth field."""
        V = self.family[term.k]
        vf = CoefficientField(V, x)
        if not term.remainder:
            return vf
        op = self.operator
        pz = op.potential + ConstantField(-op.z, op.model.dim)
        return DAlembertPowerField(vf, 1) + pz * vf


def power_expansion(op: OperatorSpec, m: int, N: int, sign: int = +1,
                    family: HadamardFamily | None = None) -> TruncatedExpansion:
    """Expansion of K(G^m): sum_k binom(m+k-1, k) V^k R(2k+2m).

    For m <= 0 the sum is exactly finite: binomials vanish for k + m > 0
    (those terms are dropped) and the result is independent of N >= -m.
    """
    terms = []
    for k in range(N + 1):
        c = gbinom(m + k - 1, k)
        if m <= 0 and k + m > 0:
            assert c == 0
            continue
        terms.append(Term(c, k, 2 * k + 2 * m))
    return TruncatedExpansion(op, sign, m, N, terms, family)


def remainder_term(op: OperatorSpec, m: int, N: int) -> Term:
    """E_N = binom(N+m, N) (P V^N) R(2N+2m+2)."""
    return Term(gbinom(N + m, N), N, 2 * N + 2 * m + 2, remainder=True)


def double_expansion(op: OperatorSpec, z, N_k: int, N_m: int, sign: int = +1,
                     family: HadamardFamily | None = None) -> TruncatedExpansion:
    """K(G_(P-z)) as a double series in the z-free family of P:

    sum_(k,m) binom(k+m, k) z^m V^k R(2k+2m+2).
    """
    z = complex(z)
    terms = []
    for k in range(N_k + 1):
        for m in range(N_m + 1):
            terms.append(Term(gbinom(k + m, k), k, 2 * k + 2 * m + 2, scalar=z ** m))
    return TruncatedExpansion(op, sign, 1, max(N_k, N_m), terms, family)


def resolvent_expansion(op: OperatorSpec, z, m: int, N: int, sign: int = +1,
                        family: HadamardFamily | None = None) -> TruncatedExpansion:
    """K(G_(P-z)^m) via resolvent Riesz kernels: sum_k binom(k+m-1,k) V^k R(z, 2k+2m)."""
    z = complex(z)
    terms = [Term(gbinom(m + k - 1, k), k, 2 * k + 2 * m, z=z) for k in range(N + 1)]
    return TruncatedExpansion(op, sign, m, N, terms, family)


def _term_kernel_value(T: TruncatedExpansion, term: Term, y, x):
    model = T.operator.model
    d = model.dim
    if term.z is not None:
        rr = ResolventRiesz(T.sign, term.z, term.order, model)
        return resolvent_riesz_eval(rr, y, x)
    if term.order < d:
        raise RegimeError(
            f"Riesz order {term.order} below the function regime (d={d}); use expansion_pair")
    if not model.in_causal_cone(y, x, T.sign):
        return 0.0
    gamma = model.world_function(y, x)
    p = (term.order - d) / 2
    power = gamma ** p if gamma > 0.0 else (1.0 if p == 0 else 0.0)
    return riesz_constant(term.order, d) * power


def expansion_eval(T: TruncatedExpansion, y, x):
    """Pointwise kernel value; all term orders must be in the function regime."""
    y, x = as_event(y), as_event(x)
    op = T.operator
    total = 0.0 + 0.0j
    for term in T.terms:
        if term.rational == 0:
            continue
        if term.remainder:
            w = apply_P(op, T.family[term.k], y, x)
        else:
            w = T.family[term.k](y, x)
        total += term.coefficient * w * _term_kernel_value(T, term, y, x)
    total = complex(total)
    return total.real if total.imag == 0.0 else total


def expansion_pair(T: TruncatedExpansion, phi: SmoothField, x,
                   quad: QuadratureSpec | None = None):
    """Pairing of the expansion kernel with a test function in the first slot.

    Smooth V^k factors are folded into the test function; delta-type terms
    (orders <= 0) short-circuit inside the Riesz pairing and stay exact.
    """
    x = as_event(x)
    op = T.operator
    total = 0.0 + 0.0j
    for term in T.terms:
        if term.rational == 0:
            continue
        field = T.coefficient_field(term, x) * phi
        if term.z is not None:
            rr = ResolventRiesz(T.sign, term.z, term.order, op.model)
            val = resolvent_riesz_pair(rr, field, x, quad)
        else:
            val = pair_field(op.model, T.sign, term.order, field, x, quad)
        total += term.coefficient * val
    total = complex(total)
    return total.real if total.imag == 0.0 else total


def ledger_identity_check(op: OperatorSpec, m: int, N: int, probes, x,
                          quad: QuadratureSpec | None = None):
    """Residual of the telescoping identity behind the power expansion:

        P sum_(k<=N) binom(m+k,k) V^k R(2k+2m+2)
          = sum_(k<=N) binom(k+m-1,k) V^k R(2k+2m) + E_N.

    Both sides are paired with test functions; P moves onto the probe
    (constant-coefficient box is formally self-adjoint, multiplication by
    the potential is symmetric), which restricts this to the flat backend.
    """
    if m < 0:
        raise ValueError("the identity is stated for m >= 0")
    x = as_event(x)
    model = op.model
    family = hadamard_family(op, N + 1)
    e_n = remainder_term(op, m, N)
    carrier = TruncatedExpansion(op, +1, m, N, [e_n], family)
    report = []
    for phi in probes:
        pz = op.potential + ConstantField(-op.z, model.dim)
        p_phi = DAlembertPowerField(phi, 1) + pz * phi
        lhs = 0.0 + 0.0j
        for k in range(N + 1):
            c = gbinom(m + k, k)
            if c == 0:
                continue
            field = CoefficientField(family[k], x) * p_phi
            lhs += complex(c) * pair_field(model, +1, 2 * k + 2 * m + 2, field, x, quad)
        rhs = 0.0 + 0.0j
        for k in range(N + 1):
            c = gbinom(k + m - 1, k)
            if c == 0:
                continue
            field = CoefficientField(family[k], x) * phi
            rhs += complex(c) * pair_field(model, +1, 2 * k + 2 * m, field, x, quad)
        rhs += e_n.coefficient * pair_field(
            model, +1, e_n.order, carrier.coefficient_field(e_n, x) * phi, x, quad)
        report.append(abs(lhs - rhs))
    return {"residuals": report, "max_residual": max(report)}
