import cmath
import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modprime.errors import DomainError, RangeError
from modprime.specfun import (
    EULER_GAMMA,
    bessel_j,
    bessel_j_array,
    log_j0_coefficients,
    weight_f,
    weight_g,
    weight_values,
)


def j0_decimal(x, digits=40):
    getcontext().prec = digits
    x = Decimal(x)
    q = -(x / 2) ** 2
    term, total, n = Decimal(1), Decimal(1), 0
    while abs(term) > Decimal(10) ** (-digits):
        n += 1
        term = term * q / (n * n)
        total += term
    return total


def euler_gamma_oracle(n=100, digits=40):
    # Euler-Maclaurin: H_n - log n - 1/(2n) + 1/(12n^2) - 1/(120n^4) + 1/(252n^6) - 1/(240n^8)
    getcontext().prec = digits
    N = Decimal(n)
    h = sum(Decimal(1) / k for k in range(1, n + 1))
    return h - N.ln() - 1 / (2 * N) + 1 / (12 * N**2) - 1 / (120 * N**4) + 1 / (252 * N**6) - 1 / (240 * N**8)


def test_trivial_values():
    assert bessel_j(0, 0).value == 1
    assert bessel_j(1, 0).value == 0


def test_j0_one_thirty_digits():
    ref = j0_decimal(1)
    assert str(ref).startswith("0.7651976865579665514497175")
    assert abs(bessel_j(0, 1).value - float(ref)) < 1e-14


@pytest.mark.parametrize("k", [0, 1, 2, 5, 9])
@pytest.mark.parametrize("z", [0.3, 1.0, 2.5, 7.0, 1.5j, 2 - 1j])
def test_truncation_bound_valid(k, z):
    import mpmath

    mpmath.mp.dps = 40
    ev = bessel_j(k, z)
    ref = complex(mpmath.besselj(k, z))
    # rounding allowance scales with the sum of |terms|, which is I_k(|z|)
    rounding = 4 * np.finfo(float).eps * max(1.0, float(mpmath.besseli(k, abs(z))))
    assert abs(ev.value - ref) <= ev.truncation_bound + rounding


def test_real_argument_gives_real_value():
    for u in np.linspace(-5, 5, 21):
        ev = bessel_j(3, u)
        assert abs(ev.value.imag) <= 1e-14 * max(1, abs(ev.value))


def test_negative_order():
    for k in range(1, 6):
        assert bessel_j(-k, 1.3).value == (-1) ** k * bessel_j(k, 1.3).value


def test_envelope():
    with pytest.raises(RangeError):
        bessel_j(0, 51)
    with pytest.raises(RangeError):
        bessel_j_array(0, np.array([60.0]))


def test_generating_identity():
    theta = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    for u in (0.5, 1.0, 2.0):
        series = sum(bessel_j(k, u).value * np.exp(1j * k * theta) for k in range(-20, 21))
        assert np.max(np.abs(np.exp(1j * u * np.sin(theta)) - series)) < 1e-12


def test_magnitude_bound():
    for u in np.linspace(0, 3, 61):
        assert abs(bessel_j(0, u).value) <= 1
        for k in range(11):
            assert abs(bessel_j(k, u).value) <= (u / 2) ** k / math.factorial(k) * (1 + 1e-14)


def test_parity():
    u = np.linspace(0.1, 4, 30)
    np.testing.assert_array_equal(bessel_j_array(0, u), bessel_j_array(0, -u))
    np.testing.assert_array_equal(bessel_j_array(1, u), -bessel_j_array(1, -u))


def test_array_matches_scalar():
    z = np.array([0.1, 1.0, 3.3, 10.0])
    for k in (0, 2):
        scalar = [bessel_j(k, v).value.real for v in z]
        np.testing.assert_allclose(bessel_j_array(k, z), scalar, rtol=1e-13, atol=1e-16)


def test_log_j0_coefficients():
    ell = log_j0_coefficients(6)
    w = 0.3
    assert sum(float(c) * w ** (2 * n) for n, c in enumerate(ell, 1)) == pytest.approx(math.log(bessel_j(0, w).value.real), rel=1e-12)
    assert ell[0] == -0.25 and ell[1] == -1 / 64


def test_weight_f_values():
    assert weight_f(0.0) == 1.0
    assert weight_f(1.0) == 0.0
    assert weight_f(0.5) == pytest.approx(math.pi / 4, rel=1e-15)
    with pytest.raises(DomainError):
        weight_f(1.2)
    with pytest.raises(DomainError):
        weight_f(-0.1)


def test_weight_f_branch_continuity():
    u = 1e-2
    x = math.pi * u / 2
    assert abs(weight_f(u) - x / math.tan(x)) < 1e-13
    assert abs(weight_f(u - 1e-12) - weight_f(u)) < 1e-12


@given(st.floats(min_value=0, max_value=1))
def test_weights_in_unit_interval(u):
    assert 0 <= weight_f(u) <= 1
    assert 0 <= weight_g(u) <= 1


def test_weight_g_values():
    assert weight_g(0.0) == 1.0
    assert weight_g(1.0) == 0.0
    assert weight_g(0.5) == pytest.approx(math.exp(-1), rel=1e-15)
    with pytest.raises(DomainError):
        weight_g(2.0)
    with pytest.raises(DomainError):
        weight_values("h", 0.5)


def test_euler_gamma_oracle():
    assert abs(EULER_GAMMA - float(euler_gamma_oracle())) < 1e-15
