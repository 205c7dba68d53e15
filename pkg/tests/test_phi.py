import math

import numpy as np
import pytest

from modprime.errors import ContractError, DomainError
from modprime.model import WeightedPrimeSystem, model_charfun_many
from modprime.phi import (
    c2_from_constants,
    gamma_f,
    gamma_f_estimate,
    gamma_f_integral,
    log_phi_coefficients,
    phi_partial,
    phi_reference,
    phi_weighted_partial,
)
from modprime.primes import mertens_constant_estimate, prime_reciprocal_sum
from modprime.specfun import EULER_GAMMA


def test_phi_at_zero(table6):
    for x in (10, 1000, 10**6):
        assert phi_partial(0, x, table6).value == 1
        assert phi_weighted_partial(0, x, table6, "f").value == 1


def test_phi_real_and_even(table6):
    for u in np.linspace(0.1, 2.5, 9):
        a = phi_partial(u, 10**5, table6)
        assert a.value.imag == 0
        assert phi_partial(-u, 10**5, table6).value == a.value
        b = phi_partial(1j * u, 10**5, table6).value
        c = phi_partial(-1j * u, 10**5, table6).value
        assert b == pytest.approx(c.conjugate(), rel=1e-14)


def test_phi_doubling(table6):
    for x in (10**4, 10**5, 5 * 10**5):
        a = phi_partial(1, x, table6)
        b = phi_partial(1, 2 * x, table6)
        assert abs(b.log_value - a.log_value) < a.tail_estimate


def test_phi_normal_convergence(table7):
    zs = np.linspace(-2, 2, 21)
    prev = math.inf
    for x in (10**4, 10**5, 10**6):
        sup = max(abs(phi_partial(z, 2 * x, table7).log_value - phi_partial(z, x, table7).log_value) for z in zs)
        assert sup < phi_partial(2, x, table7).tail_estimate
        assert sup < prev
        prev = sup


def test_phi_envelope(table_small):
    with pytest.raises(DomainError):
        phi_partial(3.5, 100, table_small)
    with pytest.raises(DomainError):
        phi_partial(1, 10**5, table_small)


def test_weighted_one_is_same_path(table6):
    a = phi_partial(1.3, 10**5, table6)
    b = phi_weighted_partial(1.3, 10**5, table6, "one")
    assert a.value == b.value


def test_weighted_trend(table7):
    ref = phi_reference(1, table7).value
    gaps = [abs(phi_weighted_partial(1, x, table7, "f").value - ref) for x in (10**3, 10**4, 10**5, 10**6)]
    assert gaps == sorted(gaps, reverse=True)
    assert gaps[-1] < 0.005


def test_mod_gaussian_limit(table7):
    x = 10**6
    sys = WeightedPrimeSystem.from_table(table7, x)
    u = np.linspace(-2, 2, 41)
    renorm = np.exp(u**2 * (math.log(math.log(x)) + EULER_GAMMA) / 4) * model_charfun_many(sys, u)
    ref = np.array([phi_reference(v, table7).value.real for v in u])
    assert np.max(np.abs(renorm - ref)) < 1e-3


def test_log_phi_coefficients(table6):
    c = log_phi_coefficients(8, 10**6, table6)
    assert c[1] == 0 and c[3] == 0 and c[5] == 0
    assert abs(c[2] - c2_from_constants()) < 1e-6
    assert c2_from_constants() == pytest.approx(-0.1578592, abs=1e-7)
    with pytest.raises(ContractError):
        log_phi_coefficients(13, 10**6, table6)


def test_c2_against_partial_sum(table6):
    # kappa_2 - (log log x + gamma)/2 = sum 1/(2p) - (log log x + gamma)/2 -> (M - gamma)/2
    x = 10**6
    approx = prime_reciprocal_sum(table6, x) / 2 - (math.log(math.log(x)) + EULER_GAMMA) / 2
    assert abs(approx - c2_from_constants()) < 1e-2


def test_gamma_f_extrapolation(table7):
    res = gamma_f([10**4, 10**5, 10**6, 10**7], table7)
    assert abs(res.extrapolated - (-0.108)) < 0.005
    assert list(res.residuals[:-1]) == sorted(res.residuals[:-1], reverse=True)


def test_gamma_f_control(table7):
    assert abs(gamma_f_estimate(10**6, table7, "one") - EULER_GAMMA) < 0.05
    res = gamma_f([10**4, 10**5, 10**6, 10**7], table7, weight="one")
    assert abs(res.extrapolated - EULER_GAMMA) < 0.01


def test_gamma_f_contracts(table_small):
    with pytest.raises(ContractError):
        gamma_f([100, 1000], table_small)
    with pytest.raises(ContractError):
        gamma_f([1000, 100, 10], table_small)
    with pytest.raises(DomainError):
        gamma_f([100, 1000, 10**6], table_small)


def test_gamma_f_integral():
    assert gamma_f_integral("one") == EULER_GAMMA
    assert gamma_f_integral("f") == pytest.approx(-0.1080676, abs=1e-7)


def test_mertens_estimate_consistent(table7):
    value, tail = mertens_constant_estimate(table7)
    assert abs(tail) < 1e-7
    assert abs((value - EULER_GAMMA) / 2 - c2_from_constants()) < 1e-9
