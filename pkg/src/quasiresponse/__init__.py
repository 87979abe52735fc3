"""Quasi-periodic response solutions of strongly damped, quasi-periodically forced wave models.

Pipeline: zeroth-order solve, Lindstedt expansion to order M, Picard
iteration at a complex damping parameter eps, plus diagnostics (spectral
lower bounds, small divisors, contraction constants, resonances and
analyticity checks).
"""

from .explorer import cauchy_check, fit_residual_order, prepare, scan_epsilon, solve_at
from .fixedpoint import FixedPointConfig, contraction_estimate, galerkin_newton, hull_residual, picard_solve
from .lindstedt import LindstedtSeries, evaluate, expand, nonresonance_order
from .operators import (
    DomainSpec,
    EllipticOperator,
    ModelSpec,
    apply_linear,
    build_L,
    gamma_lower_bound,
    in_domain,
    invert_linear,
    multiplier,
    resonance_locations,
)
from .spectral import (
    DIRICHLET,
    NEUMANN,
    PERIODIC,
    Frequency,
    HypothesisError,
    Nonlinearity,
    NormParams,
    SpectralError,
    SpectralField,
    Truncation,
    basis_tables,
    compose_h,
    multiply,
    norm,
    solve_omega_grad,
    theta_average,
)
from .zeroth_order import multistart_c0, solve_c0, solve_U0_modelB, solve_U0_modelBprime

__version__ = "0.1.0"
