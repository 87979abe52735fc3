"""Order-zero problems.

Models A and A' need the spatial profile c0 with -c0'' + h(c0, x) = <f>,
found here by damped Newton on the Galerkin system.  Model B needs U0
solving (w.d) U0 - Delta U0 + h(U0) = f, found by contraction.  Model B'
has the explicit diagonal solution U0 = f / ((w.d) - Delta).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .operators import (
    APRIME,
    A,
    B,
    BPRIME,
    EllipticOperator,
    ModelSpec,
    build_L,
    minus_delta,
)
from .spectral import (
    DIRICHLET,
    ConvergenceError,
    HypothesisError,
    NormParams,
    SpectralError,
    SpectralField,
    basis_tables,
    compose_h,
    norm,
    omega_dot_k,
    remainder_h,
    theta_average,
    to_delta_basis,
    to_L_basis,
)


@dataclass(frozen=True)
class C0Solution:
    c0: np.ndarray
    residual: float
    iterations: int
    halvings: int
    eigenvalues: np.ndarray
    h2: bool

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])

    def as_record(self) -> dict:
        return {"iterations": self.iterations, "residual": self.residual, "halvings": self.halvings,
                "lambda1": self.lambda1, "h2": self.h2}


def _real_profile(p, N_x: int, what: str) -> np.ndarray:
    p = np.asarray(p, dtype=complex).reshape(-1)
    if p.size != N_x:
        raise SpectralError(f"{what} has {p.size} coefficients, truncation has N_x = {N_x}")
    if np.max(np.abs(p.imag), initial=0.0) > 1e-12 * max(1.0, float(np.max(np.abs(p)))):
        raise SpectralError(f"{what} must be real for the c0 equation")
    return p.real.copy()


def c0_residual(model: ModelSpec, c0, f_avg) -> np.ndarray:
    """Galerkin residual of -Delta c0 + h(c0, x) - <f>."""
    tr = model.trunc
    bas = basis_tables(tr.bc, tr)
    c0 = np.asarray(c0, dtype=float)
    hv = model.h(bas.evaluation @ c0, bas.x)
    return bas.eigenvalues * c0 + bas.projection @ np.real(hv) - np.real(np.asarray(f_avg))


def _c0_jacobian(model: ModelSpec, c0) -> np.ndarray:
    tr = model.trunc
    bas = basis_tables(tr.bc, tr)
    pot = np.real(model.h.derivative(bas.evaluation @ c0, bas.x, 1))
    return np.diag(bas.eigenvalues) + bas.projection @ (pot[:, None] * bas.evaluation)


def solve_c0(model: ModelSpec, f_avg=None, initial_guess=None, newton_tol: float = 1e-12,
             max_iter: int = 60, max_halvings: int = 40) -> C0Solution:
    """Damped Newton for the spatial profile c0 (models A and A')."""
    if model.variant not in (A, APRIME):
        raise SpectralError("c0 is only defined for models A and A'")
    tr = model.trunc
    N = tr.N_x
    fa = _real_profile(theta_average(model.forcing) if f_avg is None else f_avg, N, "<f>")
    c = np.zeros(N) if initial_guess is None else _real_profile(initial_guess, N, "initial guess")
    r = c0_residual(model, c, fa)
    res = float(np.max(np.abs(r)))
    total_halvings = 0
    it = 0
    while res >= newton_tol:
        if it >= max_iter:
            raise ConvergenceError(f"c0 Newton did not converge in {max_iter} steps (residual {res:.3e})",
                                   {"iterations": it, "residual": res})
        J = _c0_jacobian(model, c)
        if np.linalg.cond(J) > 1e14:
            raise ConvergenceError("singular Jacobian in the c0 Newton iteration "
                                   "(L has a zero eigenvalue along the path)",
                                   {"iterations": it, "residual": res})
        step = np.linalg.solve(J, -r)
        t = 1.0
        for nh in range(max_halvings + 1):
            trial = c + t * step
            with np.errstate(all="ignore"):
                try:
                    r_new = c0_residual(model, trial, fa)
                except SpectralError:
                    r_new = None
            if r_new is not None and np.all(np.isfinite(r_new)):
                new_res = float(np.max(np.abs(r_new)))
                if new_res < res or new_res < newton_tol:
                    break
            t *= 0.5
        else:
            raise ConvergenceError(f"c0 Newton stalled: no decrease after {max_halvings} halvings "
                                   f"(residual {res:.3e})", {"iterations": it, "residual": res})
        total_halvings += nh
        c, r, res = trial, r_new, new_res
        it += 1
    op = build_L(c, model.h, tr, require_h2=False)
    return C0Solution(c, res, it, total_halvings, op.lam, op.h2)


def multistart_c0(model: ModelSpec, f_avg=None, n_starts: int = 16, seed: int = 0,
                  dedup_tol: float = 1e-6, amplitude: float = 3.0, threads: int = 1,
                  newton_tol: float = 1e-12) -> list:
    """Newton from the zero profile plus random starts; distinct solutions only.

    Random starts have coefficient n drawn from N(0, (amplitude / n)^2).
    Failed starts are dropped.  Solutions are sorted by their first
    coefficient.
    """
    N = model.trunc.N_x
    rng = np.random.default_rng(seed)
    starts = [np.zeros(N)]
    decay = amplitude / np.arange(1, N + 1)
    starts += [rng.normal(size=N) * decay for _ in range(max(0, n_starts - 1))]

    def run(g):
        try:
            return solve_c0(model, f_avg, g, newton_tol=newton_tol)
        except (ConvergenceError, HypothesisError):
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(g) for g in starts]
    uniq = []
    for sol in results:
        if sol is None:
            continue
        if all(np.linalg.norm(sol.c0 - u.c0) > dedup_tol for u in uniq):
            uniq.append(sol)
    uniq.sort(key=lambda s: tuple(np.round(s.c0, 9)))
    return uniq


def select_c0(solutions, rule: str = "smallest") -> C0Solution:
    """Pick one H2-admissible c0: 'smallest' norm or 'index:<i>'."""
    ok = [s for s in solutions if s.h2]
    if not ok:
        raise HypothesisError("H2 violated: no c0 solution with a positive smallest eigenvalue of L")
    if rule.startswith("index:"):
        return ok[int(rule.split(":", 1)[1])]
    if rule != "smallest":
        raise SpectralError(f"unknown c0 selection rule {rule!r}")
    return min(ok, key=lambda s: float(np.linalg.norm(s.c0)))


# ---------------------------------------------------------------------------
# model B


@dataclass(frozen=True)
class U0Report:
    iterations: int
    step: float
    norm: float
    residual: float
    steps: tuple = field(default_factory=tuple)

    def as_record(self) -> dict:
        return {"iterations": self.iterations, "step": self.step, "norm": self.norm,
                "residual": self.residual}


def _gamma_inverse(model: ModelSpec, op: EllipticOperator, u: SpectralField) -> SpectralField:
    # (w.d + L0)^{-1} on the L0 eigenbasis; L0 has positive spectrum so no zero divisor
    tau = 2 * math.pi * omega_dot_k(model.trunc, model.omega)[..., None]
    uL = to_L_basis(u, op.Q)
    return to_delta_basis(uL.with_coeffs(uL.coeffs / (1j * tau + op.lam)), op.Q)


def _b0_residual(model: ModelSpec, op: EllipticOperator, U: SpectralField) -> SpectralField:
    # the model B hull equation at eps = 0, linear part applied exactly on coefficients
    from .fixedpoint import hull_residual_field

    return hull_residual_field(model, op, 0.0, U, form="raw")


def solve_U0_modelB(model: ModelSpec, alpha0: float = 10.0, tol: float = 1e-12,
                    params: Optional[NormParams] = None, max_iter: int = 500):
    """Contraction for (w.d) U0 - Delta U0 + h(U0) = f.

    The map is T(U) = Gamma^{-1}(f - G(U)) with Gamma = w.d + L0,
    L0 = -Delta + h'(0, x) and G(U) = h(U) - h'(0, x) U.  Stops when the
    weighted step norm is below ``tol``; aborts if an iterate leaves the
    ball of radius ``alpha0``.
    """
    if model.variant != B:
        raise SpectralError("solve_U0_modelB needs a model B specification")
    tr = model.trunc
    x = basis_tables(tr.bc, tr).x
    if not model.h.vanishes_at_zero(x):
        raise HypothesisError("model B needs h(0, x) = 0")
    params = params or NormParams()
    op = build_L(None, model.h, tr)

    def nrm(u):
        return norm(u, params, op.lam, op.Q)

    def T(U):
        return _gamma_inverse(model, op, model.forcing - _remainder_B(model, op, U))

    U = SpectralField.zeros(tr)
    steps = []
    for it in range(1, max_iter + 1):
        U_new = T(U)
        step = nrm(U_new - U)
        steps.append(step)
        size = nrm(U_new)
        if not math.isfinite(size) or size > alpha0:
            raise ConvergenceError(f"model B zeroth-order iterate left the ball of radius {alpha0} "
                                   f"(norm {size:.3e}); forcing too large for contraction",
                                   {"iterations": it, "norm": size})
        U = U_new
        if step < tol:
            res = nrm(_b0_residual(model, op, U))
            # the confirming step is not counted, so a constant map reports 1
            return U, U0Report(max(it - 1, 1), step, size, res, tuple(steps))
    raise ConvergenceError(f"model B zeroth-order contraction did not converge in {max_iter} steps "
                           f"(last step {steps[-1]:.3e})", {"iterations": max_iter, "step": steps[-1]})


def _remainder_B(model: ModelSpec, op: EllipticOperator, U: SpectralField) -> SpectralField:
    """h(U) - h'(0, x) U, assembled without cancellation for polynomial h."""
    # h(0) = 0, so h(U) - h'(0)U is the second-order Taylor remainder at 0
    return remainder_h(model.h, U)


def solve_U0_modelBprime(model: ModelSpec) -> SpectralField:
    """U0 = f / (2 pi i omega.k + lambda^Delta_n), mode by mode, k = 0 included."""
    if model.variant != BPRIME:
        raise SpectralError("solve_U0_modelBprime needs a model B' specification")
    tr = model.trunc
    if tr.bc != DIRICHLET:
        raise HypothesisError("H2' violated: model B' needs Dirichlet conditions")
    minus_delta(tr)
    tau = 2 * math.pi * omega_dot_k(tr, model.omega)[..., None]
    lamD = basis_tables(tr.bc, tr).eigenvalues
    f = model.forcing
    return f.with_coeffs(f.coeffs / (1j * tau + lamD))
