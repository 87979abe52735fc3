import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_field
from quasiresponse.io import field_from_csv, field_to_csv
from quasiresponse.spectral import (
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
    apply_omega_grad,
    basis_tables,
    compose_h,
    from_grid,
    multiply,
    norm,
    remainder_h,
    remove_average,
    solve_omega_grad,
    theta_average,
    to_grid,
)

PHI = (1 + math.sqrt(5)) / 2


# basis tables ---------------------------------------------------------------


def test_dirichlet_eigenvalues_are_sine_spectrum():
    b = basis_tables(DIRICHLET, 3)
    np.testing.assert_allclose(b.eigenvalues, [math.pi**2, 4 * math.pi**2, 9 * math.pi**2], rtol=1e-15)


def test_periodic_smallest_eigenvalue_is_zero():
    b = basis_tables(PERIODIC, 5)
    assert b.eigenvalues[0] == 0.0
    assert list(b.eigenvalues) == sorted(b.eigenvalues)


def test_neumann_gram_matrix_is_identity():
    b = basis_tables(NEUMANN, 4)
    gram = b.projection @ b.evaluation
    np.testing.assert_allclose(gram, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(b.eigenvalues, [(math.pi * n) ** 2 for n in range(4)])


def _classical(bc, n_modes):
    if bc == DIRICHLET:
        return [lambda x, n=n: math.sqrt(2) * np.sin(math.pi * n * x) for n in range(1, n_modes + 1)]
    if bc == NEUMANN:
        return [lambda x: np.ones_like(x)] + [
            lambda x, n=n: math.sqrt(2) * np.cos(math.pi * n * x) for n in range(1, n_modes)]
    cols = [lambda x: np.ones_like(x)]
    for m in range(1, n_modes):
        cols += [lambda x, m=m: math.sqrt(2) * np.cos(2 * math.pi * m * x),
                 lambda x, m=m: math.sqrt(2) * np.sin(2 * math.pi * m * x)]
    return cols[:n_modes]


@pytest.mark.parametrize("bc", [PERIODIC, DIRICHLET, NEUMANN])
def test_basis_orthonormal_against_fine_quadrature(bc):
    b = basis_tables(bc, 6)
    cols = _classical(bc, 6)
    xg, wg = np.polynomial.legendre.leggauss(200)
    x = 0.5 * (xg + 1)
    E = np.column_stack([c(x) for c in cols])
    np.testing.assert_allclose((E * (0.5 * wg)[:, None]).T @ E, np.eye(6), atol=1e-12)
    # the package tables sample the same functions
    ref = np.column_stack([c(b.x) for c in cols])
    np.testing.assert_allclose(b.evaluation, ref, atol=1e-13)


def test_basis_errors():
    with pytest.raises(SpectralError, match="unsupported"):
        basis_tables("robin", 3)
    with pytest.raises(SpectralError, match="resolution"):
        basis_tables(DIRICHLET, 8, n_grid=10)


def test_truncation_invariants():
    with pytest.raises(SpectralError):
        Truncation(0, 4)
    with pytest.raises(SpectralError):
        Truncation(4, 0)
    with pytest.raises(SpectralError, match="oversampling"):
        Truncation(4, 4, oversample=1)


def test_frequency_rejects_rational_dependence():
    with pytest.raises(SpectralError, match="resonant"):
        Frequency((1.0, 2.0))
    assert Frequency((PHI, 1.0)).d == 2


def test_norm_params_invariants():
    with pytest.raises(SpectralError):
        NormParams(rho=0.0)
    with pytest.raises(SpectralError):
        NormParams(j=3)
    assert NormParams(j=2, m=2).algebra_ok(1)
    assert not NormParams(j=2, m=0).algebra_ok(1)
    assert not NormParams(j=2, m=2).algebra_ok(2)


# norm -----------------------------------------------------------------------


def test_norm_of_zero_field():
    tr = Truncation(4, 4)
    assert norm(SpectralField.zeros(tr), NormParams(), np.arange(1.0, 5.0)) == 0.0


@pytest.mark.parametrize("rho,j,m", [(0.05, 2, 2), (0.3, 4, 2), (0.1, 0, 0)])
def test_norm_single_mode_closed_form(rho, j, m):
    tr = Truncation(3, 2, PERIODIC)
    lam = np.array([1.7, 5.0])
    u = SpectralField.from_modes(tr, [((1,), 0, 1.0)])
    with mpmath.workdps(40):
        expect = (mpmath.exp(4 * mpmath.pi * rho) / (4 * mpmath.pi)
                  * ((2 * mpmath.pi) ** 2 + 1) ** j * mpmath.mpf(1.7) ** m)
    got = norm(u, NormParams(rho, j, m), lam) ** 2
    assert got == pytest.approx(float(expect), rel=1e-13)


def test_norm_zero_mode_uses_rho_weight():
    tr = Truncation(2, 1, PERIODIC)
    u = SpectralField.from_modes(tr, [((0,), 0, 2.0)])
    got = norm(u, NormParams(0.25, 2, 2), [3.0]) ** 2
    assert got == pytest.approx(4.0 * 9.0 * 4 * math.pi * 0.25, rel=1e-14)


def test_norm_rejects_nonpositive_eigenvalues():
    tr = Truncation(2, 2)
    with pytest.raises(HypothesisError, match="H2"):
        norm(SpectralField.zeros(tr), NormParams(), [0.0, 1.0])


def test_norm_is_a_norm(rng):
    tr = Truncation(6, 5, DIRICHLET)
    lam = basis_tables(DIRICHLET, tr).eigenvalues + 1.0
    p = NormParams()
    for _ in range(50):
        u, v = random_field(tr, rng), random_field(tr, rng)
        a = complex(rng.normal(), rng.normal())
        assert norm(u * a, p, lam) == pytest.approx(abs(a) * norm(u, p, lam), rel=1e-10)
        assert norm(u + v, p, lam) <= (norm(u, p, lam) + norm(v, p, lam)) * (1 + 1e-10)
        assert norm(u, p, lam) > 0


# products and composition -----------------------------------------------------


def test_multiply_exponentials_add():
    tr = Truncation(4, 1, PERIODIC)
    e1 = SpectralField.from_modes(tr, [((1,), 0, 1.0)])
    out = multiply(e1, e1)
    expect = SpectralField.from_modes(tr, [((2,), 0, 1.0)])
    np.testing.assert_allclose(out.coeffs, expect.coeffs, atol=1e-15)


def test_multiply_cosines_trig_identity():
    tr = Truncation(4, 1, PERIODIC)
    u = SpectralField.from_modes(tr, [((1,), 0, 1.0), ((-1,), 0, 1.0)])  # 2 cos(2 pi theta)
    out = multiply(u, u)
    expect = SpectralField.from_modes(tr, [((0,), 0, 2.0), ((2,), 0, 1.0), ((-2,), 0, 1.0)])
    np.testing.assert_allclose(out.coeffs, expect.coeffs, atol=1e-14)
    # brute-force grid product of the same functions
    th = np.arange(64) / 64
    prod = (2 * np.cos(2 * np.pi * th)) ** 2
    np.testing.assert_allclose(prod, 2 + 2 * np.cos(4 * np.pi * th), atol=1e-13)


def test_multiply_by_one_is_identity(rng):
    tr = Truncation(5, 4, PERIODIC)
    u = random_field(tr, rng)
    one = SpectralField.from_modes(tr, [((0,), 0, 1.0)])
    np.testing.assert_allclose(multiply(u, one).coeffs, u.coeffs, atol=1e-14)


def test_multiply_basis_mismatch():
    tr = Truncation(3, 3)
    u = SpectralField.zeros(tr)
    with pytest.raises(SpectralError):
        multiply(u, SpectralField(u.coeffs, tr, "L"))
    with pytest.raises(SpectralError):
        multiply(u, SpectralField.zeros(Truncation(4, 3)))


def test_compose_square_of_single_mode():
    tr = Truncation(4, 1, PERIODIC)
    u = SpectralField.from_modes(tr, [((1,), 0, 1.0)])
    out = compose_h(Nonlinearity.polynomial(0, 0, 1), u)
    np.testing.assert_allclose(out.coeffs, SpectralField.from_modes(tr, [((2,), 0, 1.0)]).coeffs, atol=1e-15)


def test_compose_cube_of_cosine():
    tr = Truncation(4, 1, PERIODIC)
    u = SpectralField.from_modes(tr, [((1,), 0, 1.0), ((-1,), 0, 1.0)])
    out = compose_h(Nonlinearity.polynomial(0, 0, 0, 1), u)
    expect = SpectralField.from_modes(tr, [((1,), 0, 3.0), ((-1,), 0, 3.0), ((3,), 0, 1.0), ((-3,), 0, 1.0)])
    np.testing.assert_allclose(out.coeffs, expect.coeffs, atol=1e-14)


def test_compose_mems_at_zero_is_gamma():
    tr = Truncation(3, 3, PERIODIC)
    out = compose_h(Nonlinearity.mems(1.0), SpectralField.zeros(tr))
    expect = SpectralField.from_modes(tr, [((0,), 0, 1.0)])
    np.testing.assert_allclose(out.coeffs, expect.coeffs, atol=1e-15)


def test_compose_mems_pole_guard():
    tr = Truncation(2, 2, PERIODIC)
    u = SpectralField.from_modes(tr, [((0,), 0, -1.0)])
    with pytest.raises(SpectralError, match="pole"):
        compose_h(Nonlinearity.mems(1.0), u)


def _dense_oracle(g, *fields, fine=8):
    """Independent evaluation: explicit sums on a finer grid, explicit quadrature back.

    g maps grid values of the fields (and x) to grid values of the result.
    """
    tr = fields[0].trunc
    nt = fine * tr.n_k
    nx = fine * (tr.N_x + 1)
    th = np.arange(nt) / nt
    x = (np.arange(nx) + 0.5) / nx
    ks = np.arange(-tr.K_theta, tr.K_theta + 1)
    Eth = np.exp(2j * np.pi * np.outer(th, ks))
    Ex = np.column_stack([c(x) for c in _classical(tr.bc, tr.N_x)])
    vals = [Eth @ u.coeffs @ Ex.T for u in fields]
    out = g(*vals, x[None, :])
    return (Eth.conj().T @ out @ Ex) / (nt * nx)


def test_compose_matches_dense_grid_oracle_dirichlet(rng):
    # odd h keeps sine series in the sine span, so the projection is exact
    tr = Truncation(5, 6, DIRICHLET)
    h = Nonlinearity.polynomial(0.0, 1.0, 0.0, 0.1)
    for _ in range(5):
        u = random_field(tr, rng)
        np.testing.assert_allclose(compose_h(h, u).coeffs, _dense_oracle(h, u), atol=1e-13)


def test_compose_matches_dense_grid_oracle_periodic(rng):
    tr = Truncation(5, 6, PERIODIC)
    h = Nonlinearity.polynomial(0.2, 1.0, 0.3, 0.1)
    for _ in range(5):
        u = random_field(tr, rng)
        np.testing.assert_allclose(compose_h(h, u).coeffs, _dense_oracle(h, u), atol=1e-13)


def test_compose_derivative_variant_times_field(rng):
    tr = Truncation(4, 4, DIRICHLET)
    h = Nonlinearity.polynomial(0.0, 1.0, 0.0, 0.1)
    u, v = random_field(tr, rng), random_field(tr, rng)
    got = compose_h(h, u, derivative=1, times=v)
    expect = _dense_oracle(lambda a, b, x: (1 + 0.3 * a**2) * b, u, v)
    np.testing.assert_allclose(got.coeffs, expect, atol=1e-13)


def test_remainder_matches_direct_difference(rng):
    tr = Truncation(4, 5, DIRICHLET)
    h = Nonlinearity.polynomial(0.0, 2.0, 0.5, 0.3)
    u = random_field(tr, rng)
    c0 = np.array([0.3, -0.1, 0.05, 0.0, 0.0])
    direct = compose_h(h, u, c0) - compose_h(h, SpectralField.zeros(tr), c0) - compose_h(h, u, c0, 0) * 0
    lin = compose_h(h, SpectralField.zeros(tr), c0, derivative=1, times=u)
    np.testing.assert_allclose(remainder_h(h, u, c0).coeffs, (direct - lin).coeffs, atol=1e-13)


# averages and division by omega.grad -----------------------------------------


def test_theta_average_examples(rng):
    tr = Truncation(3, 3, DIRICHLET)
    u = SpectralField.from_modes(tr, [((1,), 0, 1.0)])
    np.testing.assert_array_equal(theta_average(u), 0)
    u = SpectralField.from_modes(tr, [((0,), 0, 1.0), ((1,), 1, 1.0)])
    np.testing.assert_array_equal(theta_average(u), [1, 0, 0])
    w = random_field(tr, rng)
    np.testing.assert_array_equal(theta_average(remove_average(w)), 0)


def test_solve_omega_grad_single_mode():
    tr = Truncation(3, 1, PERIODIC)
    rhs = SpectralField.from_modes(tr, [((1,), 0, 1.0)])
    out = solve_omega_grad(rhs, Frequency((1.0,)))
    assert out.coefficient((1,), 0) == pytest.approx(1 / (2j * math.pi), rel=1e-15)


def test_solve_omega_grad_nonzero_average():
    tr = Truncation(3, 1, PERIODIC)
    rhs = SpectralField.from_modes(tr, [((0,), 0, 1.0)])
    with pytest.raises(SpectralError, match="nonzero average"):
        solve_omega_grad(rhs, Frequency((1.0,)))


def test_solve_omega_grad_golden_divisor():
    tr = Truncation(2, 1, PERIODIC, d=2)
    om = Frequency((PHI, 1.0))
    rhs = SpectralField.from_modes(tr, [((1, -2), 0, 1.0)])
    out = solve_omega_grad(rhs, om)
    with mpmath.workdps(40):
        phi = (1 + mpmath.sqrt(5)) / 2
        div = phi - 2
        assert float(abs(div)) == pytest.approx(0.3819660, abs=1e-7)
        expect = 1 / (2j * mpmath.pi * div)
    assert out.coefficient((1, -2), 0) == pytest.approx(complex(expect), rel=1e-14)


def test_solve_omega_grad_divisor_floor():
    tr = Truncation(2, 1, PERIODIC, d=2)
    om = Frequency((1.0, 1.0 + 2.0**-40), resonance_tol=1e-14)
    rhs = SpectralField.from_modes(tr, [((1, -1), 0, 1.0)])
    with pytest.raises(SpectralError, match="small divisor underflow") as err:
        solve_omega_grad(rhs, om, divisor_floor=1e-10)
    k1, k2 = eval(str(err.value).split("k = ")[1])
    assert k1 == -k2 != 0


def test_solve_omega_grad_is_right_inverse(rng):
    tr = Truncation(6, 4, DIRICHLET, d=2)
    om = Frequency((PHI, 1.0))
    lam = basis_tables(DIRICHLET, tr).eigenvalues
    p = NormParams()
    for _ in range(10):
        rhs = remove_average(random_field(tr, rng))
        out = solve_omega_grad(rhs, om)
        back = apply_omega_grad(out, om)
        assert norm(back - rhs, p, lam) <= 1e-12 * norm(rhs, p, lam)
        np.testing.assert_array_equal(theta_average(out), 0)


# transforms -------------------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), bc=st.sampled_from([PERIODIC, DIRICHLET, NEUMANN]),
       K=st.integers(1, 6), N=st.integers(1, 6), d=st.integers(1, 2))
def test_grid_round_trip(seed, bc, K, N, d):
    tr = Truncation(K, N, bc, d=d)
    u = random_field(tr, np.random.default_rng(seed))
    back = from_grid(to_grid(u), tr)
    np.testing.assert_allclose(back.coeffs, u.coeffs, atol=1e-12)


def test_real_function_has_conjugate_symmetry():
    tr = Truncation(4, 4, DIRICHLET)
    u = SpectralField.from_function(
        tr, lambda th, x: np.cos(2 * np.pi * th) * np.sin(np.pi * x) + 0.2 * np.sin(4 * np.pi * th) * np.sin(2 * np.pi * x)
    )
    assert u.is_real()
    assert np.abs(to_grid(u).imag).max() < 1e-14
    v = SpectralField.from_modes(tr, [((1,), 0, 1.0)])
    assert not v.is_real()


def test_from_function_rejects_boundary_violation():
    tr = Truncation(3, 4, DIRICHLET)
    with pytest.raises(SpectralError, match="boundary"):
        SpectralField.from_function(tr, lambda th, x: np.cos(np.pi * x) + 0 * th)


def test_csv_round_trip(rng):
    tr = Truncation(3, 3, DIRICHLET, d=2)
    u = random_field(tr, rng)
    text = field_to_csv(u)
    assert text.splitlines()[0] == "k1,k2,n,re,im"
    np.testing.assert_array_equal(field_from_csv(text, tr).coeffs, u.coeffs)
