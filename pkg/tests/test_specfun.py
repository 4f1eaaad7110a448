import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from landau_spectra import specfun
from landau_spectra.errors import DomainError
from landau_spectra.specfun import RadialFunctionParams


def test_log_gamma_small_integers():
    assert specfun.log_gamma(1.0) == pytest.approx(0.0, abs=1e-15)
    assert specfun.log_gamma(2.0) == pytest.approx(0.0, abs=1e-15)


def test_log_gamma_factorial_oracle():
    # 10! by integer product
    assert specfun.log_gamma(11.0) == pytest.approx(math.log(math.prod(range(1, 11))), rel=1e-14)
    for n in (5, 30, 170):
        assert specfun.log_gamma(n + 1.0) == pytest.approx(
            float(mpmath.log(mpmath.factorial(n))), rel=1e-13)


def test_log_gamma_rejects_nonpositive():
    with pytest.raises(DomainError):
        specfun.log_gamma(0.0)


def test_incomplete_gamma_closed_forms():
    for x in (0.0, 0.3, 1.0, 4.0, 25.0):
        assert specfun.reg_lower_inc_gamma(1, x) == pytest.approx(1 - math.exp(-x), abs=1e-14)
    assert specfun.reg_lower_inc_gamma(3.5, 0.0) == 0.0
    assert specfun.reg_lower_inc_gamma(2, 2) == pytest.approx(1 - 3 * math.exp(-2), abs=1e-14)
    assert specfun.reg_lower_inc_gamma(2, 2) == pytest.approx(0.5939941503, abs=1e-10)


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0, 7.5, 40.0, 300.0])
def test_incomplete_gamma_against_mpmath(s):
    for x in np.linspace(0.0, 2.5 * s + 10, 17):
        ref = float(mpmath.gammainc(s, 0, x, regularized=True))
        assert specfun.reg_lower_inc_gamma(s, x) == pytest.approx(ref, abs=1e-13)
        assert specfun.reg_lower_inc_gamma(s, x) + specfun.reg_upper_inc_gamma(s, x) == pytest.approx(1.0, abs=1e-12)


def test_incomplete_gamma_monotone():
    xs = np.linspace(0, 60, 400)
    vals = [specfun.reg_lower_inc_gamma(12.5, x) for x in xs]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_laguerre_low_degrees():
    xi = np.linspace(0, 10, 11)
    assert np.all(specfun.laguerre(0, 3.0, xi) == 1.0)
    np.testing.assert_allclose(specfun.laguerre(1, 2.5, xi), 3.5 - xi, atol=1e-14)


def test_laguerre_against_mpmath():
    for q, a, x in [(3, 0, 1.5), (7, 2, 4.0), (12, 5.5, 20.0), (20, 0, 60.0)]:
        ref = float(mpmath.laguerre(q, a, x))
        assert specfun.laguerre(q, a, x) == pytest.approx(ref, rel=1e-10, abs=1e-10)


def test_laguerre_bound_example():
    assert abs(specfun.laguerre(3, 0, 1.5)) <= 27 * math.exp(0.5)


@settings(max_examples=300, deadline=None)
@given(q=st.integers(0, 20), alpha=st.integers(-20, 200), xi=st.floats(0.0, 500.0))
def test_laguerre_bound_property(q, alpha, xi):
    k = alpha + q
    if alpha < -q or k < 1:
        return
    val = abs(specfun.laguerre(q, alpha, xi))
    if val == 0.0:
        return
    assert math.log(val) <= q * math.log(k) + xi / k + 1e-12 * max(1.0, q * math.log(k) + xi / k)


def test_normalized_radial_ground_state():
    xi = np.linspace(0, 30, 50)
    np.testing.assert_allclose(specfun.normalized_radial(RadialFunctionParams(0, 0), xi),
                               np.exp(-xi / 2), rtol=1e-14)


def test_normalized_radial_large_alpha_extended_precision():
    mpmath.mp.dps = 40
    ref = mpmath.exp(mpmath.mpf("0.5") * (2000 * mpmath.log(2000) - 2000 - mpmath.loggamma(2001)))
    mpmath.mp.dps = 15
    got = specfun.normalized_radial(RadialFunctionParams(0, 2000), 2000.0)
    assert got == pytest.approx(float(ref), rel=1e-11)
    assert got == pytest.approx((2 * math.pi * 2000) ** -0.25, rel=1e-3)


def test_normalized_radial_against_mpmath_definition():
    for q, a, x in [(2, 3, 1.7), (5, 0, 9.0), (4, 11, 15.0), (1, 60, 55.0)]:
        ref = (mpmath.sqrt(mpmath.factorial(q) / mpmath.factorial(q + a))
               * mpmath.power(x, a / 2.0) * mpmath.exp(-x / 2.0) * mpmath.laguerre(q, a, x))
        assert specfun.normalized_radial(RadialFunctionParams(q, a), x) == pytest.approx(
            float(ref), rel=1e-11, abs=1e-300)


def test_normalized_radial_negative_alpha_identity():
    xi = np.linspace(0.1, 20, 30)
    for q, k in [(2, 1), (3, 3), (5, 2)]:
        lhs = specfun.normalized_radial(RadialFunctionParams(q, -k), xi)
        rhs = (-1) ** k * specfun.normalized_radial(RadialFunctionParams(q - k, k), xi)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-13)


def test_normalized_radial_finite_at_extremes():
    vals = specfun.normalized_radial(RadialFunctionParams(3, 10**6), np.array([0.0, 1.0, 1e6, 4e6]))
    assert np.all(np.isfinite(vals))


def test_normalized_radial_unit_norm():
    val = specfun.adaptive_xi_integral(
        lambda xi: specfun.normalized_radial(RadialFunctionParams(2, 3), xi) ** 2, 0.0, 250.0)
    assert val == pytest.approx(1.0, abs=1e-12)


def test_normalized_radial_domain():
    with pytest.raises(DomainError):
        RadialFunctionParams(2, -3)
    with pytest.raises(DomainError):
        specfun.normalized_radial(RadialFunctionParams(0, 0), -1.0)


def test_gauss_legendre_small_rules():
    r = specfun.gauss_legendre(1, -1, 1)
    np.testing.assert_allclose(r.nodes, [0.0], atol=1e-16)
    np.testing.assert_allclose(r.weights, [2.0])
    r = specfun.gauss_legendre(2, -1, 1)
    np.testing.assert_allclose(np.sort(r.nodes), [-1 / math.sqrt(3), 1 / math.sqrt(3)], rtol=1e-15)
    np.testing.assert_allclose(r.weights, [1.0, 1.0], rtol=1e-15)


def test_gauss_legendre_polynomial_exactness():
    r = specfun.gauss_legendre(16, 0.0, 1.0)
    assert np.sum(r.weights * r.nodes ** 15) == pytest.approx(1 / 16, abs=1e-14)


@pytest.mark.parametrize("n", [5, 32, 64])
def test_gauss_legendre_matches_numpy(n):
    x_ref, w_ref = np.polynomial.legendre.leggauss(n)
    r = specfun.gauss_legendre(n, -1, 1)
    order = np.argsort(r.nodes)
    np.testing.assert_allclose(r.nodes[order], x_ref, atol=1e-14)
    np.testing.assert_allclose(r.weights[order], w_ref, atol=1e-14)


def test_orthonormality_gram():
    from landau_spectra.selftest import radial_gram
    for alpha in (-4, 0, 25, 500):
        qs, G = radial_gram(10, alpha)
        np.testing.assert_allclose(G, np.eye(len(qs)), atol=1e-9)
