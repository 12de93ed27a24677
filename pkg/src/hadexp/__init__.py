"""Hadamard-expansion toolkit for wave-type operators on flat spacetime blocks.

Riesz distributions of arbitrary complex order, Hadamard coefficients via
transport equations, and truncated expansions of powers and resolvents of
advanced/retarded Green's operators, verified against independent oracles
(Bessel-series kernels, brute-force quadrature, finite-difference solves).
"""

from .errors import (CFLError, ConfigError, DomainError, GridError, HadexpError,
                     QuadratureError, RegimeError, UnsupportedOrderError)
from .expansion import (Term, TruncatedExpansion, double_expansion, expansion_eval,
                        expansion_pair, gbinom, ledger_identity_check,
                        power_expansion, remainder_term, resolvent_expansion)
from .fields import (BumpField, ConstantField, DAlembertPowerField,
                     EllipsoidBumpField, MonomialField, SmoothField)
from .geometry import SpacetimeModel, causal_relation, minkowski, world_function
from .hadamard import (HadamardFamily, OperatorSpec, apply_P, diagonal_check,
                       hadamard_family, heat_shift, shift_coefficients,
                       solve_transport)
from .oracle import (FDSolution, GridSpec, bessel_series, compare_expansion_fd,
                     exact_kernel_2d, fd_power_apply, fd_retarded_solve,
                     smeared_riesz_power)
from .riesz import (ResolventRiesz, RieszDistribution, pair_field, resolvent_riesz_eval,
                    resolvent_riesz_pair, riesz_constant, riesz_eval, riesz_pair)
from .suites import SUITES, SuiteResult, run_all, run_suite
from .testfn import QuadratureSpec, TestFunction, apply_box_power, integrate

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
