"""Picard iteration on the hull equation, with contraction diagnostics.

Models A/A':  T(U) = N_eps^{-1}(f - <f> - G(U)),  G(U) = h(c0+U) - h(c0) - h'(c0)U
Model  B:     T(U) = Lam_eps^{-1}(f - H(U)),       H(U) = h(U) - h'(0)U
Model  B':    T(U) = Lam_eps^{-1}(f - eps h(U))

For A/A' the c0 profile is read from the elliptic operator (``op.profile``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .operators import (
    APRIME,
    A,
    B,
    BPRIME,
    DomainSpec,
    EllipticOperator,
    ModelSpec,
    MultiplierUnderflow,
    apply_linear,
    in_domain,
    invert_linear,
)
from .spectral import (
    ConvergenceError,
    NormParams,
    SpectralError,
    SpectralField,
    basis_tables,
    compose_h,
    norm,
    norm_weights,
    remainder_h,
    theta_average,
    to_delta_basis,
)


class DomainError(SpectralError):
    """eps lies outside the configured domain in strict mode."""


@dataclass(frozen=True)
class FixedPointConfig:
    tol: float = 1e-12
    max_iter: int = 200
    alpha0: float = 1e3
    beta: Optional[float] = None
    params: NormParams = field(default_factory=NormParams)
    strict: bool = True
    domain: Optional[DomainSpec] = None
    multiplier_floor: float = 1e-12

    def __post_init__(self):
        if not self.tol > 0:
            raise SpectralError("tol must be positive")
        if self.max_iter < 1:
            raise SpectralError("max_iter must be at least 1")
        if self.alpha0 <= 0:
            raise SpectralError("alpha0 must be positive")
        if self.start_radius > self.alpha0:
            raise SpectralError("the start ball radius beta must not exceed alpha0")

    @property
    def start_radius(self) -> float:
        """beta, defaulting to 100 sigma for parabolic domains and alpha0 otherwise."""
        if self.beta is not None:
            return float(self.beta)
        if self.domain is not None and self.domain.kind == "parabolic":
            return 100.0 * self.domain.sigma
        return float(self.alpha0)


@dataclass(frozen=True)
class PicardReport:
    converged: bool
    iterations: int
    step: float
    residual: float
    residual_raw: float
    contraction_ratio: float
    steps: tuple
    failure: Optional[str] = None
    in_domain: Optional[bool] = None

    def as_record(self) -> dict:
        return {"converged": self.converged, "iterations": self.iterations, "step": self.step,
                "residual": self.residual, "residual_raw": self.residual_raw,
                "contraction_ratio": self.contraction_ratio, "failure": self.failure,
                "in_domain": self.in_domain}


class PicardFailure(ConvergenceError):
    """Structured Picard failure: ``kind`` is ball_exit, max_iter or multiplier_underflow."""

    def __init__(self, msg, kind, report=None):
        super().__init__(msg, report)
        self.kind = kind


def norm_eigenvalues(model: ModelSpec, op: EllipticOperator):
    """Eigenvalues and basis change used for the weighted norm of this model."""
    if model.variant == BPRIME:
        return op.lam_delta, None
    return op.lam, op.Q


def field_norm(model: ModelSpec, op: EllipticOperator, u: SpectralField, params: NormParams) -> float:
    lam, Q = norm_eigenvalues(model, op)
    return norm(u, params, lam, Q)


def nonlinear_part(model: ModelSpec, op: EllipticOperator, eps: complex, U: SpectralField) -> SpectralField:
    """G(U), H(U) or eps h(U), matching the Picard map of each model."""
    v = model.variant
    if v in (A, APRIME):
        return remainder_h(model.h, U, op.profile)
    if v == B:
        tr = model.trunc
        x = basis_tables(tr.bc, tr).x
        h0 = model.h(np.zeros_like(x), x)
        out = remainder_h(model.h, U)
        if np.any(h0 != 0):
            out = out + SpectralField.from_profile(tr, basis_tables(tr.bc, tr).projection @ h0)
        return out
    return compose_h(model.h, U) * complex(eps)


def _rhs(model: ModelSpec) -> SpectralField:
    f = model.forcing
    if model.variant in (A, APRIME):
        return f - SpectralField.from_profile(f.trunc, theta_average(f))
    return f


def picard_map(model: ModelSpec, op: EllipticOperator, eps: complex, U: SpectralField,
               multiplier_floor: float = 1e-12) -> SpectralField:
    r = _rhs(model) - nonlinear_part(model, op, eps, U)
    return invert_linear(model, op, eps, r, multiplier_floor)


def hull_residual_field(model: ModelSpec, op: EllipticOperator, eps: complex, U: SpectralField,
                        form: str = "auto") -> SpectralField:
    """F_eps(U) as a field; ``form`` is 'raw', 'scaled' (eps-multiplied) or 'auto'."""
    U = to_delta_basis(U, op.Q)
    F = apply_linear(model, op, eps, U) + nonlinear_part(model, op, eps, U) - _rhs(model)
    if model.variant in (A, APRIME):
        if form == "scaled" or (form == "auto" and abs(eps) < 1):
            return F * complex(eps)
    return F


def hull_residual(model: ModelSpec, op: EllipticOperator, eps: complex, U: SpectralField,
                  params: Optional[NormParams] = None, form: str = "auto") -> float:
    """Weighted norm of the hull-equation residual.

    For A/A' with |eps| < 1 the eps-multiplied equation is used (no 1/eps
    amplification); pass form='raw' for the unscaled one.  For A/A' the c0
    equation is taken as solved (its own residual is reported by solve_c0).
    """
    params = params or NormParams()
    return field_norm(model, op, hull_residual_field(model, op, eps, U, form), params)


def _tail_ratio(steps) -> float:
    ratios = [b / a for a, b in zip(steps[:-1], steps[1:]) if a > 0]
    if not ratios:
        return 0.0
    return float(np.median(ratios[-10:]))


def picard_solve(model: ModelSpec, op: EllipticOperator, eps: complex, U_init: Optional[SpectralField],
                 cfg: Optional[FixedPointConfig] = None):
    """Iterate U <- T(U) until the weighted step norm drops below cfg.tol.

    Returns (U, PicardReport).  ``iterations`` counts the map applications
    before the confirming one (a constant map reports 1).  Failures raise
    PicardFailure carrying a report; nothing unconverged is returned.
    """
    cfg = cfg or FixedPointConfig()
    eps = complex(eps)
    inside = None
    if cfg.domain is not None:
        inside = in_domain(eps, cfg.domain)
        if not inside:
            if cfg.strict:
                raise DomainError(f"eps = {eps} lies outside the {cfg.domain.kind} domain (strict mode)")
            warnings.warn(f"eps = {eps} outside the configured domain; proceeding (explore mode)",
                          RuntimeWarning, stacklevel=2)
    params = cfg.params
    U = SpectralField.zeros(model.trunc) if U_init is None else to_delta_basis(U_init, op.Q)

    def fail(kind, msg, steps):
        rep = PicardReport(False, len(steps), steps[-1] if steps else math.nan, math.nan, math.nan,
                           _tail_ratio(steps), tuple(steps), kind, inside)
        raise PicardFailure(msg, kind, rep)

    steps = []
    for i in range(cfg.max_iter + 1):
        try:
            with np.errstate(over="raise", invalid="raise"):
                U_new = picard_map(model, op, eps, U, cfg.multiplier_floor)
        except MultiplierUnderflow as exc:
            fail("multiplier_underflow", str(exc), steps)
        except (FloatingPointError, SpectralError) as exc:
            fail("ball_exit", f"iterate left the admissible region: {exc}", steps)
        size = field_norm(model, op, U_new, params)
        step = field_norm(model, op, U_new - U, params)
        steps.append(step)
        if not math.isfinite(size) or size > cfg.alpha0:
            fail("ball_exit", f"iterate norm {size:.3e} exceeds alpha0 = {cfg.alpha0:.3e}", steps)
        U = U_new
        if step < cfg.tol:
            res = hull_residual(model, op, eps, U, params)
            raw = hull_residual(model, op, eps, U, params, form="raw")
            rep = PicardReport(True, max(len(steps) - 1, 1), step, res, raw, _tail_ratio(steps),
                               tuple(steps), None, inside)
            return U, rep
    fail("max_iter", f"no convergence in {cfg.max_iter} iterations (last step {steps[-1]:.3e})", steps)


def random_direction(model: ModelSpec, op: EllipticOperator, params: NormParams, rng) -> SpectralField:
    """Random field of unit weighted norm with comparable weight in every mode."""
    tr = model.trunc
    lam, Q = norm_eigenvalues(model, op)
    w = norm_weights(tr, params)[..., None] * np.asarray(lam) ** params.m
    c = (rng.normal(size=tr.shape) + 1j * rng.normal(size=tr.shape)) / np.sqrt(w)
    u = SpectralField(c @ Q.T if Q is not None else c, tr)
    return u / field_norm(model, op, u, params)


def contraction_estimate(model: ModelSpec, op: EllipticOperator, eps: complex, center: SpectralField,
                         radius: float, n_pairs: int = 20, seed: int = 0,
                         params: Optional[NormParams] = None, multiplier_floor: float = 1e-12) -> float:
    """Largest sampled ||T U - T V|| / ||U - V|| over pairs in the ball around ``center``."""
    if n_pairs < 1:
        raise SpectralError("n_pairs must be at least 1")
    params = params or NormParams()
    rng = np.random.default_rng(seed)
    center = to_delta_basis(center, op.Q)
    best = 0.0
    for _ in range(n_pairs):
        U = center + random_direction(model, op, params, rng) * (radius * rng.uniform())
        V = center + random_direction(model, op, params, rng) * (radius * rng.uniform())
        d = field_norm(model, op, U - V, params)
        if d == 0:
            continue
        TU = picard_map(model, op, eps, U, multiplier_floor)
        TV = picard_map(model, op, eps, V, multiplier_floor)
        best = max(best, field_norm(model, op, TU - TV, params) / d)
    return best


def galerkin_newton(model: ModelSpec, op: EllipticOperator, eps: complex, U_init: SpectralField,
                    tol: float = 1e-14, max_iter: int = 40, fd_step: float = 1e-7):
    """Dense Newton on the Galerkin system F_eps(U) = 0 with a finite-difference Jacobian.

    An independent check on picard_solve: the residual is assembled
    directly and the Jacobian comes from central differences of it, one
    complex coefficient at a time (F is holomorphic in the coefficients).
    Returns (U, iterations).
    """
    tr = model.trunc
    shape = tr.shape
    eps = complex(eps)

    def F(vec):
        U = SpectralField(vec.reshape(shape), tr)
        return hull_residual_field(model, op, eps, U, form="raw").coeffs.reshape(-1)

    x = to_delta_basis(U_init, op.Q).coeffs.reshape(-1).astype(complex)
    n = x.size
    for it in range(1, max_iter + 1):
        r = F(x)
        J = np.empty((n, n), dtype=complex)
        h = fd_step * max(1.0, float(np.max(np.abs(x))))
        for j in range(n):
            e = np.zeros(n, dtype=complex)
            e[j] = h
            J[:, j] = (F(x + e) - F(x - e)) / (2 * h)
        dx = np.linalg.solve(J, -r)
        x = x + dx
        if np.max(np.abs(dx)) <= tol * max(1.0, float(np.max(np.abs(x)))):
            return SpectralField(x.reshape(shape), tr), it
    raise ConvergenceError(f"Galerkin Newton did not converge in {max_iter} steps")
