"""Model-dependent linear operators and their spectral diagnostics.

The four models share the hull-equation structure

    A :  (w.d)^2 U + (1/eps)(w.d) U       + L U + G(U) = f - <f>
    A':  (w.d)^2 U + (1/eps)(w.d) Delta U + L U + G(U) = f - <f>
    B :  eps^2 (w.d)^2 U + (w.d) U - Delta U + h(U)     = f
    B':  eps^2 (w.d)^2 U + (w.d) U - Delta U + eps h(U) = f

with w.d = omega . grad_theta.  On the mode e^{2 pi i k.theta} Phi_n the
operator w.d acts as 2 pi i (omega . k); write tau = 2 pi omega . k.
"""

from __future__ import annotations

import cmath
import hashlib
import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .spectral import (
    DELTA_BASIS,
    DIRICHLET,
    L_BASIS,
    NEUMANN,
    Frequency,
    HypothesisError,
    Nonlinearity,
    SpectralError,
    SpectralField,
    Truncation,
    basis_tables,
    grid_profile,
    omega_dot_k,
    to_delta_basis,
    to_L_basis,
)

A, APRIME, B, BPRIME = "A", "Aprime", "B", "Bprime"
VARIANTS = (A, APRIME, B, BPRIME)
_VARIANT_ALIASES = {"a": A, "aprime": APRIME, "a'": APRIME, "a′": APRIME,
                    "b": B, "bprime": BPRIME, "b'": BPRIME, "b′": BPRIME}

MINUS_DELTA = "MinusDelta"
L_OPERATOR = "LOperator"


class MultiplierUnderflow(SpectralError):
    """A linear multiplier is (numerically) zero: the parameter sits on a resonance."""

    def __init__(self, msg, k=None, n=None, value=None):
        super().__init__(msg)
        self.k, self.n, self.value = k, n, value


def normalize_variant(v: str) -> str:
    key = str(v).strip().lower().replace("_", "")
    if key not in _VARIANT_ALIASES:
        raise SpectralError(f"unknown model variant {v!r}")
    return _VARIANT_ALIASES[key]


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Everything that fixes a hull equation: variant, h, forcing, omega, truncation."""

    variant: str
    h: Nonlinearity
    forcing: SpectralField
    omega: Frequency

    def __post_init__(self):
        object.__setattr__(self, "variant", normalize_variant(self.variant))
        tr = self.trunc
        if self.omega.d != tr.d:
            raise SpectralError("omega dimension differs from truncation d")
        if self.variant in (APRIME, BPRIME) and tr.bc != DIRICHLET:
            raise HypothesisError(
                f"H2' violated: model {self.variant} needs Dirichlet conditions "
                "(smallest eigenvalue of -Delta is 0 for periodic/Neumann)"
            )
        x = basis_tables(tr.bc, tr).x
        if tr.bc == DIRICHLET and not self.h.vanishes_at_zero(x):
            raise HypothesisError("BCD violated: Dirichlet conditions need h(0, x) = 0")
        if tr.bc == NEUMANN and not self.h.neumann_compatible:
            raise HypothesisError("BCN violated: h is not declared Neumann compatible")

    @property
    def trunc(self) -> Truncation:
        return self.forcing.trunc

    @property
    def bc(self) -> str:
        return self.trunc.bc

    def fingerprint(self) -> str:
        """Stable hash used to match saved series with models."""
        hsh = hashlib.sha256()
        tr = self.trunc
        hsh.update(repr((self.variant, tr.bc, tr.K_theta, tr.N_x, tr.d, tr.oversample,
                         self.omega.omega, self.h.describe())).encode())
        hsh.update(np.ascontiguousarray(self.forcing.coeffs).tobytes())
        return hsh.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class EllipticOperator:
    """-Delta + V(x) diagonalized in the Delta eigenbasis: matrix = Q diag(lam) Q^T."""

    lam: np.ndarray
    Q: np.ndarray
    matrix: np.ndarray
    source_tag: str
    trunc: Truncation
    profile: np.ndarray
    diagonal: bool

    @property
    def lam_delta(self) -> np.ndarray:
        return basis_tables(self.trunc.bc, self.trunc).eigenvalues

    @property
    def h2(self) -> bool:
        return bool(self.lam[0] > 0)

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        """Act on the spatial (last) axis of a Delta-basis coefficient array."""
        if self.diagonal:
            return coeffs * np.diag(self.matrix)
        return coeffs @ self.matrix.T

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if not self.h2:
            raise HypothesisError(
                f"H2 violated: smallest eigenvalue {self.lam[0]:.3e} <= 0, operator not invertible"
            )
        return ((np.asarray(rhs) @ self.Q) / self.lam) @ self.Q.T


def _assemble(potential: np.ndarray, trunc: Truncation, source_tag: str, profile,
              require_h2: bool) -> EllipticOperator:
    basis = basis_tables(trunc.bc, trunc)
    lamD = basis.eigenvalues
    pot = np.real_if_close(np.asarray(potential, dtype=complex))
    if np.iscomplexobj(pot):
        raise SpectralError("the potential h'(c0, x) must be real for a self-adjoint L")
    spread = float(np.ptp(pot)) if pot.size else 0.0
    if spread <= 1e-14 * (1.0 + float(np.max(np.abs(pot)))):
        # constant potential: L commutes with Delta, keep it exactly diagonal
        const = float(np.mean(pot))
        mat = np.diag(lamD + const)
        lam, Q, diagonal = lamD + const, np.eye(trunc.N_x), True
    else:
        mat = np.diag(lamD) + basis.projection @ (pot[:, None] * basis.evaluation)
        mat = 0.5 * (mat + mat.T)
        lam, Q = np.linalg.eigh(mat)
        diagonal = False
    lam = np.array(lam, dtype=float)
    op = EllipticOperator(lam, Q, mat, source_tag, trunc, np.asarray(profile, dtype=float), diagonal)
    if require_h2 and not op.h2:
        raise HypothesisError(
            f"H2 violated: smallest eigenvalue of L is {lam[0]:.6e} <= 0"
        )
    return op


def build_L(c0, h: Nonlinearity, trunc: Truncation, require_h2: bool = True) -> EllipticOperator:
    """Diagonalize L = -Delta + h'(c0(x), x) on the truncation.

    ``c0`` is a real spatial coefficient vector (or None for c0 = 0).
    """
    basis = basis_tables(trunc.bc, trunc)
    prof = np.zeros(trunc.N_x) if c0 is None else np.real(np.asarray(c0, dtype=complex))
    pot = h.derivative(grid_profile(prof, trunc), basis.x, 1)
    return _assemble(pot, trunc, L_OPERATOR, prof, require_h2)


def minus_delta(trunc: Truncation, require_h2: bool = True) -> EllipticOperator:
    op = _assemble(np.zeros(basis_tables(trunc.bc, trunc).n_grid), trunc, MINUS_DELTA,
                   np.zeros(trunc.N_x), False)
    if require_h2 and not op.h2:
        raise HypothesisError("H2' violated: -Delta has a zero eigenvalue for this boundary condition")
    return op


def operator_for(model: ModelSpec, c0=None) -> EllipticOperator:
    """The operator whose eigenbasis diagonalizes the model's linear part."""
    if model.variant in (A, APRIME):
        return build_L(c0, model.h, model.trunc)
    if model.variant == B:
        return build_L(None, model.h, model.trunc)
    return minus_delta(model.trunc)


# ---------------------------------------------------------------------------
# multipliers


def _tau(model: ModelSpec) -> np.ndarray:
    return 2 * math.pi * omega_dot_k(model.trunc, model.omega)


def _check_eps(model: ModelSpec, eps: complex):
    if model.variant in (A, APRIME) and eps == 0:
        raise SpectralError(f"eps = 0 is singular for model {model.variant}")


def multiplier_formula(variant: str, eps: complex, tau, lam, lam_delta=None):
    """Scalar symbol of the linear operator at tau = 2 pi omega.k."""
    tau = np.asarray(tau, dtype=float)
    if variant == A:
        return -tau**2 + 1j * tau / eps + lam
    if variant == APRIME:
        return -tau**2 - 1j * tau * lam_delta / eps + lam
    if variant == B:
        return -(eps**2) * tau**2 + 1j * tau + lam
    return -(eps**2) * tau**2 + 1j * tau + lam


def multiplier_table(model: ModelSpec, op: EllipticOperator, eps: complex) -> np.ndarray:
    """Multipliers lambda_{n,k}(eps) on the L basis, shape trunc.shape.

    For A' this is exact only when L and Delta commute (constant potential).
    """
    _check_eps(model, eps)
    tau = _tau(model)[..., None]
    lamD = op.lam_delta
    lam = lamD if model.variant == BPRIME else op.lam
    return multiplier_formula(model.variant, eps, tau, lam, lamD)


def multiplier(model: ModelSpec, op: EllipticOperator, eps: complex, k, n: int) -> complex:
    tab = multiplier_table(model, op, eps)
    return complex(tab[model.trunc.k_index(k) + (int(n),)])


def apply_linear(model: ModelSpec, op: EllipticOperator, eps: complex, u: SpectralField) -> SpectralField:
    """The model's linear operator applied to a Delta-basis field."""
    _check_eps(model, eps)
    tag = u.basis_tag
    u = _as_delta(u, op)
    tau = _tau(model)[..., None]
    c = u.coeffs
    lamD = op.lam_delta
    v = model.variant
    if v == A:
        out = (-tau**2 + 1j * tau / eps) * c + op.apply(c)
    elif v == APRIME:
        out = (-tau**2 - 1j * tau * lamD / eps) * c + op.apply(c)
    elif v == B:
        out = (-(eps**2) * tau**2 + 1j * tau) * c + op.apply(c)
    else:
        out = (-(eps**2) * tau**2 + 1j * tau + lamD) * c
    return _restore(u.with_coeffs(out), tag, op)


def multiplier_scale(model: ModelSpec, op: EllipticOperator, eps: complex) -> np.ndarray:
    """Sum of the moduli of the terms making up each multiplier (roundoff scale)."""
    tau = np.abs(_tau(model))[..., None]
    lamD = op.lam_delta
    lam = np.abs(lamD if model.variant == BPRIME else op.lam)
    v = model.variant
    if v == A:
        return tau**2 + tau / abs(eps) + lam
    if v == APRIME:
        return tau**2 + tau * lamD / abs(eps) + lam
    return abs(eps) ** 2 * tau**2 + tau + lam


def _underflow(tab: np.ndarray, scale: np.ndarray, trunc: Truncation, floor: float):
    rel = np.abs(tab) / np.maximum(scale, 1.0)
    if rel.min() < floor:
        idx = np.unravel_index(int(np.argmin(rel)), rel.shape)
        k = tuple(int(i) - trunc.K_theta for i in idx[:-1])
        n = int(idx[-1])
        raise MultiplierUnderflow(
            f"multiplier |lambda| = {abs(tab[idx]):.3e} (relative {rel[idx]:.1e}) below floor "
            f"{floor:.1e} at k={k}, n={n}: eps is at (or numerically on) a resonance",
            k=k, n=n, value=complex(tab[idx]),
        )


def invert_linear(model: ModelSpec, op: EllipticOperator, eps: complex, u: SpectralField,
                  multiplier_floor: float = 1e-12) -> SpectralField:
    """Solve (linear operator) X = u mode by mode.

    A mode is rejected when |lambda_{n,k}| falls below ``multiplier_floor``
    times the sum of the moduli of its terms (at least 1), which keeps the
    test meaningful when the terms are large and cancel to roundoff.
    """
    _check_eps(model, eps)
    tr = model.trunc
    if model.variant == APRIME and not op.diagonal:
        tag = u.basis_tag
        u = _as_delta(u, op)
        out = u.with_coeffs(_dense_aprime_solve(model, op, eps, u.coeffs, multiplier_floor))
        return _restore(out, tag, op)
    tab = multiplier_table(model, op, eps)
    _underflow(tab, multiplier_scale(model, op, eps), tr, multiplier_floor)
    if model.variant == BPRIME or op.diagonal or u.basis_tag == L_BASIS:
        return u.with_coeffs(u.coeffs / tab)
    return u.with_coeffs(((u.coeffs @ op.Q) / tab) @ op.Q.T)


def _as_delta(u: SpectralField, op: EllipticOperator) -> SpectralField:
    return to_delta_basis(u, op.Q) if u.basis_tag == L_BASIS else u


def _restore(u: SpectralField, tag: str, op: EllipticOperator) -> SpectralField:
    return to_L_basis(u, op.Q) if tag == L_BASIS else u


def _dense_aprime_solve(model, op, eps, coeffs, floor):
    # per-k blocks -tau^2 I - (i tau / eps) diag(lamD) + L in the Delta basis
    tr = model.trunc
    tau = _tau(model).reshape(-1)
    N = tr.N_x
    lamD = op.lam_delta
    mats = np.broadcast_to(op.matrix.astype(complex), (tau.size, N, N)).copy()
    diag = (-tau[:, None] ** 2 - 1j * tau[:, None] * lamD[None, :] / eps)
    mats[:, np.arange(N), np.arange(N)] += diag
    sv = np.linalg.svd(mats, compute_uv=False)
    smin = sv[:, -1] / np.maximum(sv[:, 0], 1.0)
    if smin.min() < floor:
        i = int(np.argmin(smin))
        k = tuple(int(c) - tr.K_theta for c in np.unravel_index(i, (tr.n_k,) * tr.d))
        raise MultiplierUnderflow(
            f"A' block at k={k} is singular (smallest singular value {smin[i]:.3e})", k=k, value=smin[i]
        )
    rhs = coeffs.reshape(-1, N)
    sol = np.linalg.solve(mats, rhs[..., None])[..., 0]
    return sol.reshape(coeffs.shape)


def diagonal_operator_norm_bound(model: ModelSpec, op: EllipticOperator, eps: complex,
                                 inverse: bool = False) -> float:
    """sup_{n,k} |lambda_{n,k}| (or of 1/lambda) over the truncation."""
    tab = multiplier_table(model, op, eps)
    return float(np.max(np.abs(1.0 / tab) if inverse else np.abs(tab)))


def apply_diagonal(model: ModelSpec, op: EllipticOperator, eps: complex, u_L: SpectralField,
                   inverse: bool = False) -> SpectralField:
    """Multiply L-basis coefficients by the multiplier table (or its inverse)."""
    tab = multiplier_table(model, op, eps)
    return u_L.with_coeffs(u_L.coeffs / tab if inverse else u_L.coeffs * tab)


# ---------------------------------------------------------------------------
# spectral lower bounds


def _gamma_values(variant, eps, tau, lam, lamD):
    # tau (T,1), lam (1,N)
    if variant == A:
        val = -eps * tau**2 + 1j * tau + eps * lam
    elif variant == APRIME:
        val = -eps * tau**2 - 1j * tau * lamD + eps * lam
    else:
        val = -(eps**2) * tau**2 + 1j * tau + lam
    return np.abs(val) ** 2


def gamma_lower_bound(model: ModelSpec, op: EllipticOperator, eps: complex, tau_samples: int = 4001,
                      T: Optional[float] = None, refine: bool = True):
    """Infimum over real tau and all n of the squared multiplier modulus.

    Returns (inf_value, tau_at_inf, n_at_inf).  For A/A' the quantity is
    |eps lambda_{n,k}|^2 with tau = 2 pi omega.k relaxed to the real line;
    for B/B' it is |lambda_{n,k}|^2.
    """
    from scipy.optimize import minimize_scalar

    v = model.variant
    lamD = op.lam_delta
    lam = lamD if v == BPRIME else op.lam
    if T is None:
        T = 2.5 * math.sqrt(max(float(np.max(np.abs(lam))), 1.0))
        if v in (B, BPRIME) and abs(eps) > 0:
            T = max(T, 3.0 * math.sqrt(float(np.max(np.abs(lam)))) / abs(eps))
    tau = np.linspace(-T, T, int(tau_samples))
    if 0.0 not in tau:
        tau = np.sort(np.append(tau, 0.0))
    vals = _gamma_values(v, eps, tau[:, None], lam[None, :], lamD[None, :])
    best_val, best_tau, best_n = np.inf, 0.0, 0
    for n in range(lam.size):
        col = vals[:, n]
        interior = np.flatnonzero((col[1:-1] <= col[:-2]) & (col[1:-1] <= col[2:])) + 1
        cands = [(float(col[i]), float(tau[i])) for i in interior]
        cands.append((float(col[0]), float(tau[0])))
        cands.append((float(col[-1]), float(tau[-1])))
        if refine:
            dt = tau[1] - tau[0]
            refined = []
            for val, t0 in cands:
                f = lambda t: float(_gamma_values(v, eps, np.array([[t]]), lam[n], lamD[n])[0, 0])
                res = minimize_scalar(f, bounds=(t0 - dt, t0 + dt), method="bounded",
                                      options={"xatol": 1e-13 * max(1.0, abs(t0))})
                refined.append(min((val, t0), (float(res.fun), float(res.x))))
            cands = refined
        val, t = min(cands)
        if val < best_val:
            best_val, best_tau, best_n = val, t, n
    return max(best_val, 0.0), best_tau, best_n


# ---------------------------------------------------------------------------
# parameter domains


@dataclass(frozen=True)
class DomainSpec:
    """Complex eps-domains: parabolic Omega_{sigma,B}, its union over sigma, or the sector Omega_delta."""

    kind: str
    sigma: float = 0.0
    B: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        kind = self.kind.strip().lower()
        object.__setattr__(self, "kind", kind)
        if kind == "parabolic":
            if self.sigma <= 0 or self.B <= 0:
                raise SpectralError("parabolic domain needs sigma > 0 and B > 0")
        elif kind == "parabolic_union":
            if self.B <= 0:
                raise SpectralError("parabolic union needs B > 0")
        elif kind == "sector":
            if self.delta <= 0:
                raise SpectralError("sector domain needs delta > 0")
        else:
            raise SpectralError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def parabolic(cls, sigma: float, B: float) -> "DomainSpec":
        return cls("parabolic", sigma=sigma, B=B)

    @classmethod
    def parabolic_union(cls, B: float) -> "DomainSpec":
        return cls("parabolic_union", B=B)

    @classmethod
    def sector(cls, delta: float) -> "DomainSpec":
        return cls("sector", delta=delta)


def in_domain(eps: complex, dom: DomainSpec) -> bool:
    eps = complex(eps)
    xi, eta = eps.real, eps.imag
    if dom.kind == "parabolic":
        return xi > dom.B * eta**2 and dom.sigma < abs(eps) < 2 * dom.sigma
    if dom.kind == "parabolic_union":
        return xi > dom.B * eta**2
    if (-(eps**2)).real >= dom.delta:
        return True
    return eta == 0.0 and dom.delta < abs(xi) < 2 * dom.delta


# ---------------------------------------------------------------------------
# resonances


@dataclass(frozen=True)
class Resonance:
    eps: complex
    k: tuple
    n: int


def resonance_locations(model: ModelSpec, op: EllipticOperator, k_range: int, n_max: Optional[int] = None):
    """Zeros in eps of lambda_{n,k}(eps) for 0 < |k|_1 <= k_range, n < n_max.

    Returns (resonances sorted by |eps|, skipped (k, n) pairs without a
    finite resonance).
    """
    lamD = op.lam_delta
    lam = lamD if model.variant == BPRIME else op.lam
    nmax = lam.size if n_max is None else min(int(n_max), lam.size)
    om = model.omega.vector
    found, skipped = [], []
    for k in itertools.product(range(-k_range, k_range + 1), repeat=model.trunc.d):
        l1 = sum(abs(c) for c in k)
        if l1 == 0 or l1 > k_range:
            continue
        tau = 2 * math.pi * float(np.dot(om, k))
        for n in range(nmax):
            if model.variant == A:
                den = tau**2 - lam[n]
                if den == 0:
                    skipped.append((k, n))
                    continue
                roots = [1j * tau / den]
            elif model.variant == APRIME:
                den = tau**2 - lam[n]
                if den == 0 or lamD[n] == 0:
                    skipped.append((k, n))
                    continue
                roots = [-1j * tau * lamD[n] / den]
            else:
                if tau == 0:
                    skipped.append((k, n))
                    continue
                r = cmath.sqrt((lam[n] + 1j * tau) / tau**2)
                roots = [r, -r]
            found.extend(Resonance(complex(e), tuple(k), n) for e in roots)
    found.sort(key=lambda r: (abs(r.eps), cmath.phase(r.eps), r.k, r.n))
    return found, skipped


def nearest_resonance_distance(eps: complex, resonances) -> float:
    if not resonances:
        return math.inf
    return min(abs(complex(eps) - r.eps) for r in resonances)
