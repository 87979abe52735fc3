"""Pipeline helpers and empirical probes in the complex eps-plane."""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .fixedpoint import (
    DomainError,
    FixedPointConfig,
    PicardFailure,
    hull_residual,
    picard_solve,
)
from .lindstedt import LindstedtSeries, evaluate, expand
from .operators import (
    APRIME,
    A,
    B,
    DomainSpec,
    EllipticOperator,
    ModelSpec,
    in_domain,
    multiplier_scale,
    multiplier_table,
    nearest_resonance_distance,
    resonance_locations,
)
from .spectral import HypothesisError, NormParams, SpectralError, SpectralField
from .zeroth_order import multistart_c0, select_c0, solve_c0, solve_U0_modelB, solve_U0_modelBprime


@dataclass(frozen=True, eq=False)
class Prepared:
    """Zeroth-order solution, operator and Lindstedt series for one model."""

    model: ModelSpec
    zeroth: object
    op: EllipticOperator
    series: LindstedtSeries
    zeroth_report: dict = field(default_factory=dict)


def prepare(model: ModelSpec, M: int, rho: float = 0.05, c0_starts: int = 1, seed: int = 0,
            c0_rule: str = "smallest", alpha0: float = 10.0, tol: float = 1e-12,
            params: Optional[NormParams] = None, enforce_nonresonance: bool = True) -> Prepared:
    """Zeroth order, then the order-M series."""
    v = model.variant
    if v in (A, APRIME):
        if c0_starts > 1:
            sols = multistart_c0(model, n_starts=c0_starts, seed=seed)
            sol = select_c0(sols, c0_rule)
        else:
            sol = solve_c0(model)
            if not sol.h2:
                raise HypothesisError(
                    f"H2 violated: smallest eigenvalue of L at c0 is {sol.lambda1:.6e} <= 0"
                )
        zeroth, rep = sol.c0, sol.as_record()
    elif v == B:
        zeroth, r = solve_U0_modelB(model, alpha0=alpha0, tol=tol, params=params)
        rep = r.as_record()
    else:
        zeroth, rep = solve_U0_modelBprime(model), {}
    series = expand(model, zeroth, M, rho=rho, enforce_nonresonance=enforce_nonresonance)
    return Prepared(model, zeroth, series.op, series, rep)


def solve_at(prep: Prepared, eps: complex, cfg: FixedPointConfig, M_start: Optional[int] = None):
    """Picard from the Lindstedt approximant of order M_start (default: full series)."""
    s = prep.series if M_start is None else prep.series.truncated(M_start)
    return picard_solve(prep.model, prep.op, eps, evaluate(s, eps), cfg)


# ---------------------------------------------------------------------------
# scans


@dataclass(frozen=True)
class ScanGrid:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    nx: int
    ny: int

    def points(self):
        xs = np.linspace(self.re_min, self.re_max, self.nx)
        ys = np.linspace(self.im_min, self.im_max, self.ny)
        return [complex(x, y) for y in ys for x in xs]


def _is_multiplier_zero(prep: Prepared, eps: complex, floor: float) -> bool:
    try:
        tab = multiplier_table(prep.model, prep.op, eps)
    except SpectralError:
        return True
    rel = np.abs(tab) / np.maximum(multiplier_scale(prep.model, prep.op, eps), 1.0)
    return bool(rel.min() < floor)


def scan_epsilon(prep: Prepared, grid: ScanGrid, cfg: FixedPointConfig,
                 parabolic: Optional[DomainSpec] = None, sector: Optional[DomainSpec] = None,
                 threads: int = 1, k_range: Optional[int] = None, M_start: Optional[int] = None) -> list:
    """One record per grid point; failures are recorded, never raised.

    In strict mode a point outside cfg.domain is flagged out_of_domain and
    not attempted.
    """
    tr = prep.model.trunc
    res, _ = resonance_locations(prep.model, prep.op, k_range or tr.K_theta)

    def one(eps):
        rec = {"re": eps.real, "im": eps.imag, "perturbed": False}
        if _is_multiplier_zero(prep, eps, cfg.multiplier_floor):
            eps = eps + 1e-12
            rec["perturbed"] = True
        rec["in_parabolic"] = in_domain(eps, parabolic) if parabolic else None
        rec["in_sector"] = in_domain(eps, sector) if sector else None
        rec["nearest_resonance"] = nearest_resonance_distance(eps, res)
        inside = in_domain(eps, cfg.domain) if cfg.domain else True
        rec["out_of_domain"] = not inside
        blank = {"attempted": False, "converged": False, "iterations": 0, "residual": math.nan,
                 "contraction_ratio": math.nan, "failure": None}
        if cfg.strict and not inside:
            rec.update(blank, failure="out_of_domain")
            return rec
        local = FixedPointConfig(cfg.tol, cfg.max_iter, cfg.alpha0, cfg.beta, cfg.params,
                                 strict=False, domain=None, multiplier_floor=cfg.multiplier_floor)
        try:
            _, rep = solve_at(prep, eps, local, M_start)
            rec.update(attempted=True, converged=True, iterations=rep.iterations,
                       residual=rep.residual, contraction_ratio=rep.contraction_ratio, failure=None)
        except PicardFailure as exc:
            r = exc.report
            rec.update(attempted=True, converged=False, iterations=r.iterations if r else 0,
                       residual=math.nan, contraction_ratio=r.contraction_ratio if r else math.nan,
                       failure=exc.kind)
        except SpectralError as exc:
            rec.update(blank, attempted=True, failure=f"error: {exc}")
        return rec

    pts = grid.points()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, pts))
    return [one(p) for p in pts]


# ---------------------------------------------------------------------------
# residual order


class ResidualUnderflow(SpectralError):
    def __init__(self, msg, usable=()):
        super().__init__(msg)
        self.usable = tuple(usable)


@dataclass(frozen=True)
class OrderFit:
    slope: float
    intercept: float
    r2: float
    eps: tuple
    residuals: tuple
    dropped: tuple

    def as_record(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2,
                "eps": list(self.eps), "residuals": list(self.residuals), "dropped": list(self.dropped)}


def fit_residual_order(approx: Union[LindstedtSeries, Callable], model: ModelSpec, op: EllipticOperator,
                       eps_list, params: Optional[NormParams] = None, rel_floor: float = 1e-12) -> OrderFit:
    """Least-squares slope of log residual against log eps.

    ``approx`` is a series (evaluated at each eps) or a callable eps ->
    field.  Points whose residual is below ``rel_floor`` times the norm of
    the forcing term of the same equation are roundoff-dominated and are
    dropped; fewer than five usable points is an error.
    """
    params = params or NormParams()
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 5:
        raise SpectralError("the residual fit needs at least 5 ladder points")
    if any(e <= 0 for e in eps_list):
        raise SpectralError("the residual ladder must be positive real")
    zero = SpectralField.zeros(model.trunc)
    used, res, dropped = [], [], []
    for e in eps_list:
        U = evaluate(approx, e) if isinstance(approx, LindstedtSeries) else approx(e)
        scale = hull_residual(model, op, e, zero, params)
        r = hull_residual(model, op, e, U, params)
        if r <= rel_floor * scale:
            dropped.append(e)
        else:
            used.append(e)
            res.append(r)
    if len(used) < 5:
        raise ResidualUnderflow(
            f"residual at roundoff for {len(dropped)} of {len(eps_list)} ladder points; "
            f"usable sub-range {used}", used,
        )
    x, y = np.log(used), np.log(res)
    slope, icpt = np.polyfit(x, y, 1)
    pred = slope * x + icpt
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return OrderFit(float(slope), float(icpt), r2, tuple(used), tuple(res), tuple(dropped))


# ---------------------------------------------------------------------------
# analyticity


@dataclass(frozen=True)
class CauchyReport:
    deviation: float
    center: complex
    radius: float
    n_samples: int
    max_iterations: int


def circle_inside(center: complex, radius: float, n_samples: int, dom: DomainSpec) -> bool:
    """All circle samples inside ``dom``; parabolic domains use their union over sigma."""
    if dom.kind == "parabolic":
        dom = DomainSpec.parabolic_union(dom.B)
    pts = [center + radius * cmath.exp(2j * math.pi * j / n_samples) for j in range(n_samples)]
    return all(in_domain(p, dom) for p in pts)


def cauchy_check(prep: Prepared, center: complex, radius: float, n_samples: int = 64,
                 cfg: Optional[FixedPointConfig] = None, threads: int = 1) -> CauchyReport:
    """Compare U at the center with the trapezoidal Cauchy mean over a circle.

    The precondition is checked against cfg.domain (for a parabolic domain,
    against the union of the parabolic domains over sigma, on which the
    solution family is analytic).  Any non-convergence raises.
    """
    cfg = cfg or FixedPointConfig()
    if radius <= 0 or n_samples < 3:
        raise SpectralError("cauchy_check needs radius > 0 and at least 3 samples")
    center = complex(center)
    dom = cfg.domain
    if dom is None:
        if prep.model.variant in (A, APRIME):
            dom = DomainSpec.parabolic_union(1.0)
        else:
            raise DomainError("cauchy_check needs a configured domain for models B and B'")
    if not circle_inside(center, radius, n_samples, dom):
        raise DomainError(f"the circle |eps - {center}| = {radius} leaves the {dom.kind} domain")
    local = FixedPointConfig(cfg.tol, cfg.max_iter, cfg.alpha0, cfg.beta, cfg.params,
                             strict=False, domain=None, multiplier_floor=cfg.multiplier_floor)
    pts = [center + radius * cmath.exp(2j * math.pi * j / n_samples) for j in range(n_samples)]

    def run(e):
        return solve_at(prep, e, local)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(run, pts))
    else:
        outs = [run(e) for e in pts]
    Uc, rc = run(center)
    mean = sum(u.coeffs for u, _ in outs) / n_samples
    dev = float(np.max(np.abs(mean - Uc.coeffs)) / max(np.max(np.abs(Uc.coeffs)), 1e-300))
    iters = max([r.iterations for _, r in outs] + [rc.iterations])
    return CauchyReport(dev, center, float(radius), int(n_samples), iters)
