"""Lindstedt series: order-by-order construction of approximate solutions.

For models A and A' the correction U = sum_{j=1..M} eps^j U_j solves the
eps-multiplied hull equation order by order.  With D = w.d (model A) or
D = (w.d) Delta (model A'),

    D U_1     = f - <f>
    D U_{N+1} = -(w.d)^2 U_N - L U_N - G_N,      L <U_N> = -<G_N>,

where G_N is the eps^N coefficient of h(c0+U) - h(c0) - h'(c0) U.  For model
B (U = U_0 + sum eps^j U_j), U_1 = 0 and

    Gt U_N = -(w.d)^2 U_{N-2} - R_N,     Gt = w.d - Delta + h'(U_0),

with R_N the part of [h(U)]_N not involving U_N.  For model B',

    Lam U_N = -(w.d)^2 U_{N-2} - [h(U)]_{N-1},   Lam = w.d - Delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import mpmath
import numpy as np

from .operators import APRIME, A, B, BPRIME, EllipticOperator, ModelSpec, build_L, minus_delta
from .spectral import (
    ConvergenceError,
    Frequency,
    HypothesisError,
    Nonlinearity,
    SpectralError,
    SpectralField,
    _integer_ball,
    apply_omega_grad,
    basis_tables,
    from_grid,
    grid_profile,
    omega_dot_k,
    solve_omega_grad,
    theta_average,
    to_grid,
)


# ---------------------------------------------------------------------------
# non-resonance diagnostic


@dataclass(frozen=True)
class NonresonanceReport:
    """sup_k |k|^{-1} log |omega.k|^{-1} and the largest admissible order."""

    sup: float
    M: float
    k: Optional[tuple]
    K: int
    rho: float

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.M)

    def __iter__(self):
        yield self.sup
        yield self.M

    def as_record(self) -> dict:
        return {"sup": self.sup, "M": "unbounded" if self.unbounded else int(self.M),
                "k": list(self.k) if self.k else None, "K": self.K, "rho": self.rho}


def nonresonance_order(omega: Frequency, rho: float, K: int, refine: int = 64,
                       dps: int = 50) -> NonresonanceReport:
    """Scan 0 < |k|_1 <= K for the worst small divisor.

    A double-precision pass ranks the candidates; the best ``refine`` of
    them (and every divisor below 1e-6) are recomputed with ``dps``
    significant digits from the exact binary values of omega.
    """
    if K < 1:
        raise SpectralError("the scan cutoff K must be at least 1")
    if rho <= 0:
        raise SpectralError("rho must be positive")
    ks = _integer_ball(omega.d, int(K))
    l1 = np.abs(ks).sum(axis=1).astype(float)
    with np.errstate(divide="ignore"):
        approx = -np.log(np.abs(ks @ omega.vector)) / l1
    order = np.argsort(-approx, kind="stable")
    pick = set(order[: int(refine)].tolist())
    pick |= set(np.flatnonzero(np.abs(ks @ omega.vector) < 1e-6).tolist())
    best, best_k = -math.inf, None
    with mpmath.workdps(dps):
        om = [mpmath.mpf(w) for w in omega.omega]
        for i in sorted(pick):
            k = ks[i]
            dot = mpmath.fsum(o * int(c) for o, c in zip(om, k))
            if dot == 0:
                raise SpectralError(f"omega.k = 0 exactly at k = {tuple(int(c) for c in k)}")
            term = float(-mpmath.log(abs(dot)) / int(l1[i]))
            if term > best:
                best, best_k = term, tuple(int(c) for c in k)
    sup = max(best, 0.0)
    M = math.inf if sup <= 0 else math.floor(2 * math.pi * rho / sup)
    return NonresonanceReport(sup, M, best_k if sup > 0 else None, int(K), float(rho))


# ---------------------------------------------------------------------------
# eps-Taylor arithmetic on grids


def taylor_coefficients(h: Nonlinearity, base, x, w_grids, order: int, pmin: int = 0):
    """Coefficients [h(base + W)]_j, j = 0..order, restricted to Taylor terms p >= pmin.

    ``w_grids[j-1]`` holds the grid values of W_j (W has no eps^0 term).
    Returns a list of grid arrays indexed by j.
    """
    base = np.asarray(base)
    shape = np.broadcast(base, x, *w_grids[:1]).shape if w_grids else np.broadcast(base, x).shape
    dtype = np.result_type(base, complex)
    zero = np.zeros(shape, dtype=dtype)
    pmax = order
    if h.degree is not None:
        pmax = min(pmax, h.degree)
    if h.max_derivative is not None and pmax > h.max_derivative:
        needed = [p for p in range(pmin, pmax + 1) if p > h.max_derivative]
        if needed:
            raise SpectralError(
                f"the expansion to order {order} needs h^({needed[0]}), which the custom "
                f"nonlinearity does not provide"
            )
    out = [zero.copy() for _ in range(order + 1)]
    # powers[j] = [W^p]_j for the current p
    powers = [zero.copy() for _ in range(order + 1)]
    powers[0] = np.ones(shape, dtype=dtype)
    for p in range(0, pmax + 1):
        if p > 0:
            new = [zero.copy() for _ in range(order + 1)]
            for j in range(p, order + 1):
                acc = zero.copy()
                for i in range(1, j - p + 2):
                    acc = acc + w_grids[i - 1] * powers[j - i]
                new[j] = acc
            powers = new
        if p < pmin:
            continue
        d_p = h.derivative(base, x, p) / math.factorial(p)
        for j in range(p, order + 1):
            out[j] = out[j] + d_p * powers[j]
    return out


# ---------------------------------------------------------------------------
# series


@dataclass(frozen=True, eq=False)
class LindstedtSeries:
    """U^(M) = zeroth + sum_{j=1..M} eps^j U_j (zeroth term dropped for A and A')."""

    model: ModelSpec
    zeroth: object
    coeffs: tuple
    op: EllipticOperator
    order_checks: tuple = field(default_factory=tuple)
    nonresonance: Optional[NonresonanceReport] = None

    @property
    def M(self) -> int:
        return len(self.coeffs)

    @property
    def c0(self) -> Optional[np.ndarray]:
        return self.zeroth if self.model.variant in (A, APRIME) else None

    def term(self, j: int) -> SpectralField:
        if j == 0:
            if self.model.variant in (A, APRIME):
                return SpectralField.zeros(self.model.trunc)
            return self.zeroth
        return self.coeffs[j - 1]

    def truncated(self, M: int) -> "LindstedtSeries":
        if not 0 <= M <= self.M:
            raise SpectralError(f"cannot truncate an order-{self.M} series to order {M}")
        return LindstedtSeries(self.model, self.zeroth, self.coeffs[:M], self.op,
                               self.order_checks[:M], self.nonresonance)


def evaluate(series: LindstedtSeries, eps: complex) -> SpectralField:
    """Horner evaluation of the series polynomial at eps."""
    eps = complex(eps)
    tr = series.model.trunc
    acc = np.zeros(tr.shape, dtype=complex)
    for j in range(series.M, 0, -1):
        acc = (acc + series.coeffs[j - 1].coeffs) * eps
    return SpectralField(acc + series.term(0).coeffs, tr)


def _zero_average(r: SpectralField, scale: float, what: str, rel_tol: float = 1e-9) -> SpectralField:
    avg = np.max(np.abs(theta_average(r)), initial=0.0)
    if avg > rel_tol * max(scale, 1e-300):
        raise SpectralError(f"{what}: right-hand side has nonzero average {avg:.3e} (compatibility fails)")
    c = np.array(r.coeffs)
    c[r.trunc.zero_index()] = 0.0
    return r.with_coeffs(c)


def expand(model: ModelSpec, zeroth, M: int, rho: float = 0.05, enforce_nonresonance: bool = True,
           neumann_tol: float = 1e-15, neumann_max: int = 400) -> LindstedtSeries:
    """Construct the order-M Lindstedt series.

    ``zeroth`` is c0 (spatial coefficients, models A/A') or U0 (a field,
    models B/B').  When ``enforce_nonresonance`` is set, M must not exceed
    the order admitted by the small-divisor condition at strip width
    ``rho``, scanned over the truncation's mode box.
    """
    if M < 1:
        raise SpectralError("the expansion order M must be at least 1")
    tr = model.trunc
    report = nonresonance_order(model.omega, rho, tr.d * tr.K_theta)
    if enforce_nonresonance and M > report.M:
        raise SpectralError(
            f"order M = {M} violates the non-resonance condition: admissible M = {report.M} "
            f"(worst k = {report.k}, sup = {report.sup:.6f})"
        )
    if model.variant in (A, APRIME):
        return _expand_A(model, np.asarray(zeroth, dtype=float), M, report)
    if model.variant == B:
        return _expand_B(model, zeroth, M, report, neumann_tol, neumann_max)
    return _expand_Bprime(model, zeroth, M, report)


def _solve_D(model: ModelSpec, r: SpectralField, lamD: np.ndarray) -> SpectralField:
    w = solve_omega_grad(r, model.omega)
    if model.variant == APRIME:
        w = w.with_coeffs(-w.coeffs / lamD)
    return w


def _expand_A(model: ModelSpec, c0: np.ndarray, M: int, report) -> LindstedtSeries:
    tr = model.trunc
    bas = basis_tables(tr.bc, tr)
    op = build_L(c0, model.h, tr)
    base = grid_profile(c0, tr)
    f = model.forcing
    f_osc = f - SpectralField.from_profile(tr, theta_average(f))
    lamD = bas.eigenvalues

    U = [_solve_D(model, f_osc, lamD)]   # U_1, zero average for now
    grids = []
    checks = []
    for N in range(1, M + 1):
        grids.append(None)
        grids[N - 1] = to_grid(U[N - 1])
        # G_N involves U_1..U_{N-1}; the U_N slot enters only at p = 1 (excluded)
        G = taylor_coefficients(model.h, base, bas.x, grids[:N - 1] + [np.zeros_like(grids[0])],
                                N, pmin=2)[N]
        G_N = from_grid(G, tr)
        avg = -op.solve(theta_average(G_N))
        c = np.array(U[N - 1].coeffs)
        c[tr.zero_index()] = avg
        U[N - 1] = U[N - 1].with_coeffs(c)
        grids[N - 1] = to_grid(U[N - 1])
        S = apply_omega_grad(U[N - 1], model.omega, 2) + U[N - 1].with_coeffs(op.apply(U[N - 1].coeffs)) + G_N
        checks.append(float(np.max(np.abs(theta_average(S)))))
        if N < M:
            rhs = _zero_average(-S, S.max_abs(), f"order {N + 1}")
            U.append(_solve_D(model, rhs, lamD))
    return LindstedtSeries(model, c0, tuple(U), op, tuple(checks), report)


def _expand_Bprime(model: ModelSpec, U0: SpectralField, M: int, report) -> LindstedtSeries:
    tr = model.trunc
    bas = basis_tables(tr.bc, tr)
    op = minus_delta(tr)
    tau = 2 * math.pi * omega_dot_k(tr, model.omega)[..., None]
    sym = 1j * tau + bas.eigenvalues
    g0 = to_grid(U0)
    terms = [U0]
    grids = []
    checks = []
    for N in range(1, M + 1):
        # [h(U)]_{N-1} needs U_1..U_{N-1}
        hN = taylor_coefficients(model.h, g0, bas.x, grids, N - 1, pmin=0)[N - 1]
        rhs = -from_grid(hN, tr)
        if N >= 2:
            rhs = rhs - apply_omega_grad(terms[N - 2], model.omega, 2)
        U_N = rhs.with_coeffs(rhs.coeffs / sym)
        terms.append(U_N)
        grids.append(to_grid(U_N))
        lhs = U_N.with_coeffs(U_N.coeffs * sym)
        checks.append(float(np.max(np.abs((lhs - rhs).coeffs))))
    return LindstedtSeries(model, U0, tuple(terms[1:]), op, tuple(checks), report)


def _expand_B(model: ModelSpec, U0: SpectralField, M: int, report, tol: float, max_iter: int):
    tr = model.trunc
    bas = basis_tables(tr.bc, tr)
    op = build_L(None, model.h, tr)
    tau = 2 * math.pi * omega_dot_k(tr, model.omega)[..., None]
    g0 = to_grid(U0)
    # Gt = Gamma + (h'(U0) - h'(0)) with Gamma = w.d + L0 diagonal on the L0 basis
    pert = model.h.derivative(g0, bas.x, 1) - model.h.derivative(np.zeros_like(bas.x), bas.x, 1)
    sym = 1j * tau + op.lam

    def gamma_inv(r: SpectralField) -> SpectralField:
        return r.with_coeffs(((r.coeffs @ op.Q) / sym) @ op.Q.T)

    def gt_apply(X: SpectralField) -> SpectralField:
        lin = X.with_coeffs(1j * tau * X.coeffs + op.apply(X.coeffs))
        return lin + from_grid(pert * to_grid(X), tr)

    def gt_solve(r: SpectralField, order: int) -> SpectralField:
        X = gamma_inv(r)
        scale = max(X.max_abs(), 1e-300)
        prev = math.inf
        for it in range(max_iter):
            X_new = gamma_inv(r - from_grid(pert * to_grid(X), tr))
            change = (X_new - X).max_abs()
            X = X_new
            if change <= tol * scale or change == 0.0:
                return X
            if it > 20 and change > prev:
                if change <= 1e3 * tol * scale:
                    return X  # roundoff floor reached
                raise ConvergenceError(
                    f"Neumann series for the order-{order} operator does not converge "
                    f"(change {change:.3e}); h'(U0) - h'(0) too large"
                )
            prev = change
        raise ConvergenceError(f"Neumann series for order {order} did not converge in {max_iter} steps")

    terms = [U0]
    grids = []
    checks = []
    for N in range(1, M + 1):
        if N == 1:
            U_N = SpectralField.zeros(tr)
            checks.append(0.0)
        else:
            # R_N: [h(U0 + W)]_N without the p = 1 term (W_N slot is zero here)
            R = taylor_coefficients(model.h, g0, bas.x, grids + [np.zeros_like(g0)], N, pmin=2)[N]
            rhs = -from_grid(R, tr) - apply_omega_grad(terms[N - 2], model.omega, 2)
            U_N = gt_solve(rhs, N)
            checks.append(float(np.max(np.abs((gt_apply(U_N) - rhs).coeffs))))
        terms.append(U_N)
        grids.append(to_grid(U_N))
    return LindstedtSeries(model, U0, tuple(terms[1:]), op, tuple(checks), report)
