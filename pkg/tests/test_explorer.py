import math

import numpy as np
import pytest

from conftest import benchmark
from quasiresponse.explorer import (
    ScanGrid,
    cauchy_check,
    circle_inside,
    prepare,
    scan_epsilon,
    solve_at,
)
from quasiresponse.fixedpoint import DomainError, FixedPointConfig, hull_residual
from quasiresponse.operators import A, B, DomainSpec
from quasiresponse.spectral import PERIODIC, Nonlinearity, SpectralError

EPS_STAR = 2 * math.pi / (4 * math.pi**2 - 1)  # imaginary part of the first resonance


@pytest.fixture(scope="module")
def periodic_prep():
    return prepare(benchmark(A, K=4, N=1, bc=PERIODIC, amp=0.5), 3)


@pytest.fixture(scope="module")
def cubic_prep():
    return prepare(benchmark(A, K=8, N=8), 3)


def test_scan_finds_cluster_at_resonance(periodic_prep):
    h = 3e-4
    grid = ScanGrid(-h, h, EPS_STAR - h, EPS_STAR + h, 13, 13)
    recs = scan_epsilon(periodic_prep, grid, FixedPointConfig(), threads=4)
    assert len(recs) == 169
    bad = [r for r in recs if not r["converged"]]
    assert len(bad) >= 5
    assert all(r["attempted"] for r in recs)
    assert all(r["nearest_resonance"] < 1e-2 for r in bad)
    assert all(r["failure"] in ("ball_exit", "max_iter", "multiplier_underflow") for r in bad)
    far = [r for r in recs if r["nearest_resonance"] > 2.5e-4]
    assert far and all(r["converged"] for r in far)
    center = [r for r in recs if r["re"] == 0.0 and abs(r["im"] - EPS_STAR) < 1e-15]
    assert center[0]["perturbed"] and not center[0]["converged"]


def test_scan_inside_parabolic_domain_converges(cubic_prep):
    dom = DomainSpec.parabolic(0.04, 100.0)
    cfg = FixedPointConfig(domain=dom, alpha0=10.0)
    grid = ScanGrid(0.045, 0.075, -0.005, 0.005, 4, 3)
    recs = scan_epsilon(cubic_prep, grid, cfg, parabolic=dom)
    assert all(r["in_parabolic"] and not r["out_of_domain"] for r in recs)
    assert all(r["converged"] for r in recs)
    assert max(r["residual"] for r in recs) < 1e-10
    assert all(0 <= r["contraction_ratio"] < 1 for r in recs)


def test_strict_scan_never_attempts_outside(cubic_prep):
    dom = DomainSpec.parabolic(0.04, 100.0)
    sector = DomainSpec.sector(0.5)
    grid = ScanGrid(-0.2, -0.1, -0.05, 0.05, 3, 3)
    recs = scan_epsilon(cubic_prep, grid, FixedPointConfig(domain=dom), parabolic=dom, sector=sector)
    assert all(r["out_of_domain"] and not r["attempted"] for r in recs)
    assert all(r["failure"] == "out_of_domain" for r in recs)
    assert not any(r["in_parabolic"] or r["in_sector"] for r in recs)


def test_explore_scan_attempts_outside(cubic_prep):
    dom = DomainSpec.parabolic(0.04, 100.0)
    grid = ScanGrid(0.1, 0.2, 0.0, 0.0, 2, 1)
    recs = scan_epsilon(cubic_prep, grid, FixedPointConfig(domain=dom, strict=False))
    assert all(r["out_of_domain"] and r["attempted"] for r in recs)


def test_scan_is_deterministic(periodic_prep):
    grid = ScanGrid(-0.01, 0.01, 0.15, 0.17, 4, 4)
    a = scan_epsilon(periodic_prep, grid, FixedPointConfig(), threads=1)
    b = scan_epsilon(periodic_prep, grid, FixedPointConfig(), threads=3)
    assert repr(a) == repr(b)


def test_solve_at_from_different_orders_agree(cubic_prep):
    cfg = FixedPointConfig()
    U1, _ = solve_at(cubic_prep, 0.05, cfg, M_start=1)
    U3, _ = solve_at(cubic_prep, 0.05, cfg)
    assert np.abs(U1.coeffs - U3.coeffs).max() < 1e-12
    res = hull_residual(cubic_prep.model, cubic_prep.op, 0.05, U3)
    assert res < 1e-10


def test_cauchy_linear_is_exact():
    prep = prepare(benchmark(A, K=6, N=4, h=Nonlinearity.polynomial(0.0, 1.0)), 2)
    rep = cauchy_check(prep, 0.048, 0.01)
    assert rep.deviation < 1e-10
    assert rep.n_samples == 64


def test_cauchy_cubic(cubic_prep):
    sigma = 0.04
    rep = cauchy_check(cubic_prep, 1.2 * sigma, sigma / 4, threads=4,
                       cfg=FixedPointConfig(domain=DomainSpec.parabolic(sigma, 100.0)))
    assert rep.deviation < 1e-6


def test_cauchy_rejects_circle_crossing_imaginary_axis(cubic_prep):
    with pytest.raises(DomainError):
        cauchy_check(cubic_prep, 0.01, 0.02)
    assert not circle_inside(0.01, 0.02, 64, DomainSpec.parabolic_union(1.0))
    assert circle_inside(0.05, 0.01, 64, DomainSpec.parabolic(0.04, 100.0))
    with pytest.raises(SpectralError):
        cauchy_check(cubic_prep, 0.05, 0.0)


def test_cauchy_model_B_needs_domain():
    prep = prepare(benchmark(B, K=4, N=3), 2)
    with pytest.raises(DomainError):
        cauchy_check(prep, 0.3j, 0.05)
    rep = cauchy_check(prep, 0.3j, 0.05, cfg=FixedPointConfig(domain=DomainSpec.sector(0.01)))
    assert rep.deviation < 1e-10
