"""Spectral representation of functions u(theta, x) on T^d x D.

Fields are stored as complex coefficient arrays indexed by a Fourier mode
k in the box |k|_inf <= K_theta (one array axis per torus dimension,
offset by K_theta) and by a spatial eigenmode index n of -Delta for the
chosen boundary condition (last axis).  Products and compositions are
evaluated by collocation on an oversampled theta x x grid and projected
back onto the working band.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

PERIODIC = "periodic"
DIRICHLET = "dirichlet"
NEUMANN = "neumann"
BOUNDARY_CONDITIONS = (PERIODIC, DIRICHLET, NEUMANN)

DELTA_BASIS = "delta"
L_BASIS = "L"


class SpectralError(ValueError):
    """Raised when a spectral operation is ill-posed for its inputs."""


class ConvergenceError(SpectralError):
    """An iteration failed; ``report`` carries the last state."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class HypothesisError(SpectralError):
    """A structural hypothesis (H2, H2', BCD, BCN) fails."""


def normalize_bc(bc: str) -> str:
    key = bc.strip().lower()
    aliases = {"p": PERIODIC, "d": DIRICHLET, "n": NEUMANN}
    key = aliases.get(key, key)
    if key not in BOUNDARY_CONDITIONS:
        raise SpectralError(f"unsupported boundary condition {bc!r}")
    return key


@dataclass(frozen=True)
class Frequency:
    """Frequency vector omega of the quasi-periodic forcing."""

    omega: tuple
    K_check: int = 64
    resonance_tol: float = 1e-12

    def __post_init__(self):
        om = tuple(float(w) for w in np.atleast_1d(self.omega))
        object.__setattr__(self, "omega", om)
        if not om:
            raise SpectralError("frequency vector must be non-empty")
        if self.d > 4:
            return
        worst = self.smallest_divisor(self.K_check)
        if worst[0] < self.resonance_tol:
            raise SpectralError(
                f"omega is resonant: |omega.k| = {worst[0]:.3e} at k = {worst[1]}"
            )

    @property
    def d(self) -> int:
        return len(self.omega)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.omega)

    def smallest_divisor(self, K: int):
        """Return (min |omega.k|, k) over 0 < |k|_1 <= K."""
        ks = _integer_ball(self.d, K)
        vals = np.abs(ks @ self.vector)
        i = int(np.argmin(vals))
        return float(vals[i]), tuple(int(c) for c in ks[i])


@lru_cache(maxsize=32)
def _integer_ball(d: int, K: int) -> np.ndarray:
    rng = np.arange(-K, K + 1)
    grids = np.stack(np.meshgrid(*([rng] * d), indexing="ij"), axis=-1).reshape(-1, d)
    l1 = np.abs(grids).sum(axis=1)
    keep = (l1 > 0) & (l1 <= K)
    return grids[keep]


@dataclass(frozen=True)
class Truncation:
    """Discretization of the torus-times-interval function space."""

    K_theta: int
    N_x: int
    bc: str = DIRICHLET
    d: int = 1
    oversample: int = 2

    def __post_init__(self):
        object.__setattr__(self, "bc", normalize_bc(self.bc))
        if self.K_theta < 1 or self.N_x < 1:
            raise SpectralError("K_theta and N_x must be >= 1")
        if self.d < 1:
            raise SpectralError("torus dimension d must be >= 1")
        if self.oversample < 2:
            raise SpectralError("oversampling factor must be >= 2")

    @property
    def n_k(self) -> int:
        return 2 * self.K_theta + 1

    @property
    def shape(self) -> tuple:
        return (self.n_k,) * self.d + (self.N_x,)

    @property
    def n_theta(self) -> int:
        return self.oversample * self.n_k

    @property
    def n_xgrid(self) -> int:
        return self.oversample * (self.N_x + 1)

    def mode_vectors(self) -> np.ndarray:
        """Integer mode vectors k, shape (n_k,)*d + (d,)."""
        r = np.arange(-self.K_theta, self.K_theta + 1)
        return np.stack(np.meshgrid(*([r] * self.d), indexing="ij"), axis=-1)

    def zero_index(self) -> tuple:
        return (self.K_theta,) * self.d

    def k_index(self, k: Sequence[int]) -> tuple:
        k = tuple(int(c) for c in np.atleast_1d(k))
        if len(k) != self.d:
            raise SpectralError(f"mode {k} has wrong dimension for d={self.d}")
        if max(abs(c) for c in k) > self.K_theta:
            raise SpectralError(f"mode {k} outside truncation K_theta={self.K_theta}")
        return tuple(c + self.K_theta for c in k)


@dataclass(frozen=True)
class NormParams:
    """Analyticity half-width rho and Sobolev exponents j (theta), m (x)."""

    rho: float = 0.05
    j: int = 2
    m: int = 2

    def __post_init__(self):
        if self.rho <= 0:
            raise SpectralError("rho must be positive")
        for name in ("j", "m"):
            v = getattr(self, name)
            if v < 0 or v % 2:
                raise SpectralError(f"{name} must be an even nonnegative integer")

    def algebra_ok(self, d: int) -> bool:
        return self.j > d and self.m > 0.5


# ---------------------------------------------------------------------------
# spatial eigenbases of -Delta on the unit circle / unit interval


@dataclass(frozen=True, eq=False)
class SpatialBasis:
    bc: str
    N_x: int
    x: np.ndarray
    weights: np.ndarray
    eigenvalues: np.ndarray
    labels: tuple
    evaluation: np.ndarray  # (n_grid, N_x): Phi_n(x_j)
    projection: np.ndarray  # (N_x, n_grid): quadrature inner products

    @property
    def n_grid(self) -> int:
        return self.x.size

    def label_index(self, label) -> int:
        key = str(label).strip().lower()
        try:
            return self.labels.index(key)
        except ValueError:
            raise SpectralError(f"spatial mode {label!r} not in {self.bc} basis") from None


def basis_tables(bc: str, trunc_or_nx, n_grid: Optional[int] = None) -> SpatialBasis:
    """Eigenpairs of -Delta, sorted by eigenvalue, sampled on a quadrature grid.

    Dirichlet uses sqrt(2) sin(pi n x), n >= 1; Neumann uses 1 and
    sqrt(2) cos(pi n x); periodic uses 1, sqrt(2) cos(2 pi m x),
    sqrt(2) sin(2 pi m x).  All are L2-orthonormal on the unit domain.
    """
    bc = normalize_bc(bc)
    if isinstance(trunc_or_nx, Truncation):
        N_x = trunc_or_nx.N_x
        if n_grid is None:
            n_grid = trunc_or_nx.n_xgrid
    else:
        N_x = int(trunc_or_nx)
        if n_grid is None:
            n_grid = 2 * (N_x + 1)
    if N_x < 1:
        raise SpectralError("N_x must be >= 1")
    if n_grid <= 2 * N_x:
        raise SpectralError(
            f"N_x={N_x} exceeds the resolution of a {n_grid}-point spatial grid"
        )
    return _basis_tables(bc, N_x, int(n_grid))


@lru_cache(maxsize=64)
def _basis_tables(bc: str, N_x: int, n_grid: int) -> SpatialBasis:
    s2 = math.sqrt(2.0)
    if bc == PERIODIC:
        x = np.arange(n_grid) / n_grid
        labels, lams, cols = [], [], []
        m = 0
        while len(labels) < N_x:
            if m == 0:
                labels.append("0")
                lams.append(0.0)
                cols.append(np.ones_like(x))
            else:
                for kind, fn in (("c", np.cos), ("s", np.sin)):
                    if len(labels) < N_x:
                        labels.append(f"{kind}{m}")
                        lams.append((2 * math.pi * m) ** 2)
                        cols.append(s2 * fn(2 * math.pi * m * x))
            m += 1
    else:
        x = (np.arange(n_grid) + 0.5) / n_grid
        if bc == DIRICHLET:
            ns = np.arange(1, N_x + 1)
            cols = [s2 * np.sin(math.pi * n * x) for n in ns]
            labels = [str(n) for n in ns]
        else:
            ns = np.arange(0, N_x)
            cols = [np.ones_like(x) if n == 0 else s2 * np.cos(math.pi * n * x) for n in ns]
            labels = [str(n) for n in ns]
        lams = [(math.pi * n) ** 2 for n in ns]
    w = np.full(n_grid, 1.0 / n_grid)
    E = np.column_stack(cols)
    P = (E * w[:, None]).T
    for arr in (x, w, E, P):
        arr.setflags(write=False)
    lam = np.array(lams, dtype=float)
    lam.setflags(write=False)
    return SpatialBasis(bc, N_x, x, w, lam, tuple(labels), E, P)


# ---------------------------------------------------------------------------
# nonlinearities h(u, x)


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """The restoring nonlinearity h(u, x) and its u-derivatives.

    ``kind`` is one of ``"polynomial"`` (``coeffs`` a_0..a_P, constants or
    callables of x), ``"mems"`` (h = gamma / (1 + u)^2) or ``"custom"``
    (``funcs`` = sequence of callables (u, x) -> h^(p)(u, x), p = 0, 1, 2, ...).
    """

    kind: str
    coeffs: tuple = ()
    gamma: float = 1.0
    funcs: tuple = ()
    pole_guard: float = 1e-6
    neumann_compatible: bool = True
    name: str = ""

    @classmethod
    def polynomial(cls, *coeffs, **kw) -> "Nonlinearity":
        return cls("polynomial", coeffs=tuple(coeffs), **kw)

    @classmethod
    def mems(cls, gamma: float, **kw) -> "Nonlinearity":
        return cls("mems", gamma=float(gamma), **kw)

    @classmethod
    def custom(cls, *funcs, **kw) -> "Nonlinearity":
        if len(funcs) < 2:
            raise SpectralError("custom nonlinearity needs h and at least h'")
        return cls("custom", funcs=tuple(funcs), **kw)

    def __post_init__(self):
        if self.kind not in ("polynomial", "mems", "custom"):
            raise SpectralError(f"unknown nonlinearity kind {self.kind!r}")

    @property
    def is_polynomial(self) -> bool:
        return self.kind == "polynomial"

    @property
    def max_derivative(self) -> Optional[int]:
        """Highest available u-derivative (None for unbounded)."""
        if self.kind == "custom":
            return len(self.funcs) - 1
        return None

    @property
    def degree(self) -> Optional[int]:
        """Polynomial degree in u (None for non-polynomial kinds)."""
        return len(self.coeffs) - 1 if self.kind == "polynomial" else None

    def describe(self) -> str:
        if self.name:
            return self.name
        if self.kind == "polynomial":
            return "polynomial" + repr(tuple(_coef_repr(a) for a in self.coeffs))
        if self.kind == "mems":
            return f"mems(gamma={self.gamma!r})"
        return "custom" + repr(tuple(getattr(f, "__name__", "f") for f in self.funcs))

    def _coef(self, q: int, x):
        a = self.coeffs[q]
        return a(x) if callable(a) else a

    def derivative(self, u, x, p: int = 0):
        """h^(p)(u, x), broadcasting u against the spatial grid x."""
        u = np.asarray(u)
        if self.kind == "polynomial":
            out = np.zeros(np.broadcast(u, x).shape, dtype=np.result_type(u, float))
            # Horner in u for sum_q a_q q!/(q-p)! u^(q-p)
            for q in range(len(self.coeffs) - 1, p - 1, -1):
                fac = math.perm(q, p)
                out = out * u + fac * self._coef(q, x)
            return out
        if self.kind == "mems":
            base = 1.0 + u
            if np.any(np.abs(base) <= self.pole_guard):
                raise SpectralError("u approaches the pole of gamma/(1+u)^2")
            val = self.gamma * (-1.0) ** p * math.factorial(p + 1) * base ** (-(p + 2))
            return np.broadcast_to(val, np.broadcast(u, x).shape).copy()
        if p >= len(self.funcs):
            raise SpectralError(f"custom nonlinearity provides no derivative of order {p}")
        return np.broadcast_to(self.funcs[p](u, x), np.broadcast(u, x).shape).astype(
            np.result_type(u, float), copy=True
        )

    def __call__(self, u, x):
        return self.derivative(u, x, 0)

    def taylor_remainder(self, base, v, x):
        """h(base + v) - h(base) - h'(base) v evaluated pointwise.

        Polynomials use their finite Taylor expansion about ``base`` so the
        result carries roundoff relative to |v|^2 rather than to |h|.
        """
        if self.kind == "polynomial":
            shape = np.broadcast(base, v, x).shape
            acc = np.zeros(shape, dtype=np.result_type(base, v, float))
            for p in range(len(self.coeffs) - 1, 1, -1):
                acc = acc * v + self.derivative(base, x, p) / math.factorial(p)
            return acc * v * v
        return self(base + v, x) - self(base, x) - self.derivative(base, x, 1) * v

    def vanishes_at_zero(self, x) -> bool:
        return bool(np.all(np.abs(self(np.zeros_like(x), x)) <= 1e-14))


def _coef_repr(a):
    return getattr(a, "__name__", "callable") if callable(a) else float(a)


# ---------------------------------------------------------------------------
# fields


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Coefficients u_{k,n} of sum_k sum_n u_{k,n} e^{2 pi i k.theta} Phi_n(x)."""

    coeffs: np.ndarray
    trunc: Truncation
    basis_tag: str = DELTA_BASIS

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.trunc.shape:
            raise SpectralError(f"coefficient shape {c.shape} != truncation shape {self.trunc.shape}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # construction ----------------------------------------------------------
    @classmethod
    def zeros(cls, trunc: Truncation) -> "SpectralField":
        return cls(np.zeros(trunc.shape, complex), trunc)

    @classmethod
    def from_modes(cls, trunc: Truncation, modes) -> "SpectralField":
        """Build from an iterable of (k, n_index, value)."""
        c = np.zeros(trunc.shape, complex)
        for k, n, val in modes:
            c[trunc.k_index(k) + (int(n),)] += val
        return cls(c, trunc)

    @classmethod
    def from_profile(cls, trunc: Truncation, profile) -> "SpectralField":
        """theta-independent field from a spatial coefficient vector."""
        c = np.zeros(trunc.shape, complex)
        c[trunc.zero_index()] = np.asarray(profile)
        return cls(c, trunc)

    @classmethod
    def from_function(cls, trunc: Truncation, fn: Callable, tol: float = 1e-10) -> "SpectralField":
        """Sample fn(theta_1, ..., theta_d, x) and project on the truncation.

        Raises if the sampled function is not reproduced by its projection,
        which happens when it violates the boundary conditions or exceeds
        the working band.
        """
        grid = theta_x_grid(trunc)
        vals = np.asarray(fn(*grid), dtype=complex)
        vals = np.broadcast_to(vals, np.broadcast_shapes(*(g.shape for g in grid)))
        u = from_grid(vals, trunc)
        err = np.max(np.abs(to_grid(u) - vals))
        scale = max(1.0, float(np.max(np.abs(vals))))
        if err > tol * scale:
            raise SpectralError(
                f"function not representable on the truncation (projection residual {err:.2e}); "
                "check boundary conditions and bandwidth"
            )
        return u

    # algebra ---------------------------------------------------------------
    def _check(self, other: "SpectralField"):
        if not isinstance(other, SpectralField):
            return NotImplemented
        if other.trunc != self.trunc or other.basis_tag != self.basis_tag:
            raise SpectralError("fields differ in truncation or basis")
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SpectralField(self.coeffs + other.coeffs, self.trunc, self.basis_tag)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SpectralField(self.coeffs - other.coeffs, self.trunc, self.basis_tag)

    def __neg__(self):
        return SpectralField(-self.coeffs, self.trunc, self.basis_tag)

    def __mul__(self, s):
        if isinstance(s, SpectralField):
            raise TypeError("use multiply(u, v) for field products")
        return SpectralField(self.coeffs * s, self.trunc, self.basis_tag)

    __rmul__ = __mul__

    def __truediv__(self, s):
        return SpectralField(self.coeffs / s, self.trunc, self.basis_tag)

    def with_coeffs(self, c) -> "SpectralField":
        return SpectralField(c, self.trunc, self.basis_tag)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def coefficient(self, k, n: int) -> complex:
        return complex(self.coeffs[self.trunc.k_index(k) + (int(n),)])

    def conj_reflect(self) -> "SpectralField":
        """Coefficients of the complex conjugate function: conj(u_{-k,n})."""
        c = self.coeffs[(slice(None, None, -1),) * self.trunc.d]
        return self.with_coeffs(np.conj(c))

    def is_real(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.coeffs - self.conj_reflect().coeffs), initial=0.0) <= tol * max(1.0, self.max_abs()))


# ---------------------------------------------------------------------------
# transforms


def _embed_index(trunc: Truncation):
    idx = np.arange(-trunc.K_theta, trunc.K_theta + 1) % trunc.n_theta
    return np.ix_(*([idx] * trunc.d), np.arange(trunc.N_x))


def theta_x_grid(trunc: Truncation):
    """Open meshgrid arrays (theta_1, ..., theta_d, x) of the collocation grid."""
    th = np.arange(trunc.n_theta) / trunc.n_theta
    x = basis_tables(trunc.bc, trunc).x
    return np.meshgrid(*([th] * trunc.d), x, indexing="ij", sparse=True)


def to_grid(u: SpectralField) -> np.ndarray:
    """Values on the oversampled theta x x grid, shape (n_theta,)*d + (n_xgrid,)."""
    tr = u.trunc
    if u.basis_tag != DELTA_BASIS:
        raise SpectralError("grid transforms need a field in the Delta basis")
    full = np.zeros((tr.n_theta,) * tr.d + (tr.N_x,), complex)
    full[_embed_index(tr)] = u.coeffs
    axes = tuple(range(tr.d))
    vals = np.fft.ifftn(full, axes=axes) * tr.n_theta**tr.d
    E = basis_tables(tr.bc, tr).evaluation
    return vals @ E.T


def from_grid(values: np.ndarray, trunc: Truncation) -> SpectralField:
    """Project grid values onto the working band (truncating higher modes)."""
    P = basis_tables(trunc.bc, trunc).projection
    spat = np.asarray(values) @ P.T
    axes = tuple(range(trunc.d))
    full = np.fft.fftn(spat, axes=axes) / trunc.n_theta**trunc.d
    return SpectralField(full[_embed_index(trunc)], trunc)


def grid_profile(profile, trunc: Truncation) -> np.ndarray:
    """Spatial coefficient vector -> values on the x grid."""
    E = basis_tables(trunc.bc, trunc).evaluation
    return E @ np.asarray(profile)


# ---------------------------------------------------------------------------
# norms


def norm_weights(trunc: Truncation, params: NormParams) -> np.ndarray:
    """theta-weights e^{4 pi |k| rho} / B(k, rho) * ((2 pi)^2 |k|_2^2 + 1)^j."""
    k = trunc.mode_vectors()
    absk = np.abs(k)
    a = np.where(absk == 0, 1.0 / (4 * math.pi * params.rho), 4 * math.pi * absk)
    B = np.prod(a, axis=-1)
    l1 = absk.sum(axis=-1)
    l2sq = (k.astype(float) ** 2).sum(axis=-1)
    return np.exp(4 * math.pi * l1 * params.rho) / B * ((2 * math.pi) ** 2 * l2sq + 1.0) ** params.j


def to_L_basis(u: SpectralField, Q: np.ndarray) -> SpectralField:
    if u.basis_tag == L_BASIS:
        return u
    return SpectralField(u.coeffs @ Q, u.trunc, L_BASIS)


def to_delta_basis(u: SpectralField, Q: np.ndarray) -> SpectralField:
    if u.basis_tag == DELTA_BASIS:
        return u
    return SpectralField(u.coeffs @ Q.T, u.trunc, DELTA_BASIS)


def norm(u: SpectralField, params: NormParams, eigenvalues, Q: Optional[np.ndarray] = None) -> float:
    """Weighted analytic-Sobolev norm from the coefficients in the L basis.

    ``eigenvalues`` are the eigenvalues of the elliptic operator whose
    eigenbasis indexes the coefficients; a Delta-basis field is rotated
    with ``Q`` first.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if np.any(lam <= 0):
        raise HypothesisError(
            "H2 violated: the norm needs a strictly positive smallest eigenvalue "
            f"(got {lam.min():.3e})"
        )
    if u.basis_tag == DELTA_BASIS and Q is not None:
        u = to_L_basis(u, Q)
    w = norm_weights(u.trunc, params)[..., None] * lam**params.m
    return float(math.sqrt(np.sum(w * np.abs(u.coeffs) ** 2)))


# ---------------------------------------------------------------------------
# products, compositions, averages, division by omega . grad


def multiply(u: SpectralField, v: SpectralField) -> SpectralField:
    if u.trunc != v.trunc or u.basis_tag != v.basis_tag:
        raise SpectralError("multiply: fields differ in truncation or basis")
    return from_grid(to_grid(u) * to_grid(v), u.trunc)


def _sample(h: Nonlinearity, u: SpectralField, c0, p: int):
    tr = u.trunc
    x = basis_tables(tr.bc, tr).x
    vals = to_grid(u)
    if c0 is not None:
        vals = vals + grid_profile(c0, tr)
    out = h.derivative(vals, x, p)
    if not np.all(np.isfinite(out)):
        raise SpectralError("non-finite value while composing with h")
    return out


def compose_h(h: Nonlinearity, u: SpectralField, c0=None, derivative: int = 0,
              times: Optional[SpectralField] = None) -> SpectralField:
    """Field of h^(p)(c0 + u, x) (optionally multiplied by the field ``times``)."""
    vals = _sample(h, u, c0, derivative)
    if times is not None:
        vals = vals * to_grid(times)
    return from_grid(vals, u.trunc)


def remainder_h(h: Nonlinearity, u: SpectralField, base=None) -> SpectralField:
    """h(b + u) - h(b) - h'(b) u with b = base (spatial profile) or 0."""
    tr = u.trunc
    x = basis_tables(tr.bc, tr).x
    b = np.zeros_like(x) if base is None else grid_profile(base, tr)
    vals = h.taylor_remainder(b, to_grid(u), x)
    if not np.all(np.isfinite(vals)):
        raise SpectralError("non-finite value while composing with h")
    return from_grid(vals, tr)


def theta_average(u: SpectralField) -> np.ndarray:
    """The k = 0 slice <u>(x) as spatial coefficients."""
    return np.array(u.coeffs[u.trunc.zero_index()])


def remove_average(u: SpectralField) -> SpectralField:
    c = np.array(u.coeffs)
    c[u.trunc.zero_index()] = 0.0
    return u.with_coeffs(c)


def omega_dot_k(trunc: Truncation, omega: Frequency) -> np.ndarray:
    """omega . k over the mode box, shape (n_k,)*d."""
    if omega.d != trunc.d:
        raise SpectralError("frequency and truncation disagree on d")
    return trunc.mode_vectors() @ omega.vector


def apply_omega_grad(u: SpectralField, omega: Frequency, power: int = 1) -> SpectralField:
    """(omega . grad_theta)^power u."""
    sym = (2j * math.pi * omega_dot_k(u.trunc, omega)) ** power
    return u.with_coeffs(u.coeffs * sym[..., None])


def solve_omega_grad(rhs: SpectralField, omega: Frequency, avg_tol: float = 1e-14,
                     divisor_floor: float = 1e-14) -> SpectralField:
    """Zero-average solution U of (omega . grad_theta) U = rhs."""
    avg = np.max(np.abs(theta_average(rhs)), initial=0.0)
    if avg > avg_tol:
        raise SpectralError(f"nonzero average {avg:.3e}: omega.grad U = rhs has no solution")
    wk = omega_dot_k(rhs.trunc, omega)
    small = np.abs(wk) < divisor_floor
    small[rhs.trunc.zero_index()] = False
    if np.any(small):
        idx = tuple(int(i) for i in np.argwhere(small)[0] - rhs.trunc.K_theta)
        raise SpectralError(f"small divisor underflow |omega.k| < {divisor_floor} at k = {idx}")
    sym = 2j * math.pi * wk
    sym[rhs.trunc.zero_index()] = 1.0
    c = rhs.coeffs / sym[..., None]
    c[rhs.trunc.zero_index()] = 0.0
    return rhs.with_coeffs(c)


def iter_modes(trunc: Truncation):
    """Yield (k tuple, array index) over the theta mode box."""
    r = range(-trunc.K_theta, trunc.K_theta + 1)
    for k in itertools.product(r, repeat=trunc.d):
        yield k, tuple(c + trunc.K_theta for c in k)
