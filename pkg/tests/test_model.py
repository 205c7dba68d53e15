import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modprime.errors import ContractError, DomainError
from modprime.model import (
    WeightedPrimeSystem,
    model_charfun,
    model_charfun_many,
    model_log_correlation,
    model_log_second_moment,
    model_moment_bound,
    model_moment_exact,
    model_moments,
    sample_model,
)
from modprime.series import TruncatedSeries, moments_to_cumulants, series_exp
from modprime.specfun import bessel_j, log_j0_coefficients

SMALL_PRIMES = (2, 3, 5, 7, 11, 13)


def sin_moment(j):
    # E[sin^j theta] for theta uniform on the circle
    if j % 2:
        return Fraction(0)
    return Fraction(math.comb(j, j // 2), 4 ** (j // 2))


def composition_moment(primes, k):
    """E[(sum_p sin(theta_p)/sqrt p)^k] by enumerating k = k_1 + ... + k_n."""
    total = Fraction(0)
    for ks in itertools.product(range(k + 1), repeat=len(primes)):
        if sum(ks) != k or any(j % 2 for j in ks):
            continue
        coef = Fraction(math.factorial(k))
        for p, j in zip(primes, ks):
            coef *= sin_moment(j) * Fraction(1, p ** (j // 2)) / math.factorial(j)
        total += coef
    return total


def all_subsets(max_size=4):
    for r in range(1, max_size + 1):
        yield from itertools.combinations(SMALL_PRIMES, r)


@pytest.mark.parametrize("k", range(6))
def test_moment_matches_composition_enumeration(k):
    for subset in all_subsets():
        sys = WeightedPrimeSystem.from_primes(subset)
        assert model_moment_exact(sys, k) == composition_moment(subset, k)


def test_moments_x3():
    sys = WeightedPrimeSystem.from_primes([2, 3])
    assert model_moment_exact(sys, 2) == Fraction(5, 12)
    assert model_moment_exact(sys, 4) == Fraction(37, 96)
    assert model_moment_exact(sys, 3) == 0
    assert model_moment_bound(sys, 2) == Fraction(5, 12)
    assert model_moment_bound(sys, 4) == Fraction(25, 48)
    assert model_moment_bound(sys, 0) == 1
    with pytest.raises(ContractError):
        model_moment_bound(sys, 3)


def test_moments_share_table(table_small):
    sys = WeightedPrimeSystem.from_table(table_small, 50)
    ms = model_moments(sys, 6)
    assert ms == [model_moment_exact(sys, k) for k in range(1, 7)]
    fl = model_moments(sys, 6, exact=False)
    np.testing.assert_allclose(fl, [float(m) for m in ms], rtol=1e-13)


def test_weighted_moment_float(table_small):
    sys = WeightedPrimeSystem.from_table(table_small, 1000, weight="f")
    m2 = model_moment_exact(sys, 2)
    assert m2 == pytest.approx(math.fsum(sys.scales**2) / 2, rel=1e-13)


def test_cumulant_additivity_across_primes(table_small):
    sys = WeightedPrimeSystem.from_table(table_small, 30)
    kappa = moments_to_cumulants([model_moment_exact(sys, k) for k in range(1, 5)], 4)
    inv = [Fraction(1, int(p)) for p in sys.primes]
    assert kappa[1] == sum(inv) / 2
    assert kappa[3] == -Fraction(3, 8) * sum(q * q for q in inv)


def test_charfun_values():
    sys = WeightedPrimeSystem.from_primes([2, 3])
    assert model_charfun(sys, 0) == 1
    ref = bessel_j(0, 1 / math.sqrt(2)).value * bessel_j(0, 1 / math.sqrt(3)).value
    assert model_charfun(sys, 1) == pytest.approx(ref, rel=1e-15)


@given(st.floats(min_value=0, max_value=6))
@settings(deadline=None)
def test_charfun_real_bounded_even(u):
    sys = WeightedPrimeSystem.from_primes(SMALL_PRIMES)
    v = model_charfun(sys, u)
    assert v.imag == 0 and abs(v) <= 1
    assert model_charfun(sys, -u) == v


def test_charfun_routes_agree(table_small):
    sys = WeightedPrimeSystem.from_table(table_small, 10**4)
    u = np.linspace(-3, 3, 13)
    many = model_charfun_many(sys, u)
    single = [model_charfun(sys, v).real for v in u]
    np.testing.assert_allclose(many, single, rtol=1e-12, atol=1e-15)


def test_charfun_derivatives_are_moments():
    sys = WeightedPrimeSystem.from_primes([p for p in range(2, 51) if all(p % d for d in range(2, p))])
    K = 8
    ell = log_j0_coefficients(K // 2)
    s2 = sys.scales**2
    logc = [0.0] * (K + 1)
    for n, c in enumerate(ell, 1):
        logc[2 * n] = float(c) * math.fsum(s2**n)
    taylor = series_exp(TruncatedSeries(logc))
    for k in range(K + 1):
        deriv = taylor[k] * math.factorial(k)
        m = float(model_moment_exact(sys, k))
        expected = (-1) ** (k // 2) * m if k % 2 == 0 else 0.0
        assert deriv == pytest.approx(expected, rel=1e-10, abs=1e-15)


def test_system_validation(table_small):
    with pytest.raises(DomainError):
        WeightedPrimeSystem.from_table(table_small, 10**5)
    sys = WeightedPrimeSystem.from_table(table_small, 100, weight="g")
    assert np.all(sys.amplitudes >= 0) and np.all(sys.amplitudes <= 1)
    assert np.all(WeightedPrimeSystem.from_table(table_small, 100).amplitudes == 1)


def test_sampler_deterministic_and_chunk_free(table_small):
    sys = WeightedPrimeSystem.from_table(table_small, 50)
    a = sample_model(sys, 7, 1000, with_log_terms=True)
    b = sample_model(sys, 7, 1000, with_log_terms=True, threads=3)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.log_values, b.log_values)
    prefix = sample_model(sys, 7, 333)
    np.testing.assert_array_equal(prefix.values, a.values[:333])
    assert not np.array_equal(sample_model(sys, 8, 1000).values, a.values)
    text = a.to_csv()
    assert text.splitlines()[0] == "index,value,log_value"
    assert len(text.splitlines()) == 1001


def test_sampler_moments(table_small):
    sys = WeightedPrimeSystem.from_table(table_small, 50)
    n = 10**6
    v = sample_model(sys, 0, n).values
    sd = v.std()
    assert abs(v.mean()) < 4 * sd / math.sqrt(n)
    m2 = float(model_moment_exact(sys, 2))
    se = (v**2).std() / math.sqrt(n)
    assert abs((v**2).mean() - m2) < 4 * se


def test_log_correlation_zero_and_imaginary(table_small):
    sys = WeightedPrimeSystem.from_table(table_small, 20)
    assert model_log_correlation(sys, 0.0).value == 0
    res = model_log_correlation(sys, 1.0)
    assert abs(res.value.real) < 1e-12
    assert res.tail_bound < 1e-10
    with pytest.raises(ContractError):
        model_log_correlation(sys, 1.0, k_max=4)
    with pytest.raises(ContractError):
        model_log_correlation(WeightedPrimeSystem.from_table(table_small, 20, weight="f"), 1.0)


def test_log_correlation_monte_carlo(table_small):
    sys = WeightedPrimeSystem.from_table(table_small, 20)
    n = 2 * 10**5
    batch = sample_model(sys, 11, n, with_log_terms=True)
    w = batch.log_values * np.exp(1j * batch.values)
    ref = model_log_correlation(sys, 1.0).value
    assert abs(w.imag.mean() - ref.imag) < 4 * w.imag.std() / math.sqrt(n)
    assert abs(w.real.mean()) < 4 * w.real.std() / math.sqrt(n)


def test_log_second_moment(table6):
    two = WeightedPrimeSystem.from_primes([2])
    # sum_k 1/(2 k^2 2^k) = Li_2(1/2)/2 = (pi^2/12 - log(2)^2/2)/2
    closed = (math.pi**2 / 12 - math.log(2) ** 2 / 2) / 2
    res = model_log_second_moment(two)
    assert abs(res.value - closed) < 1e-14 + res.tail_bound
    big = model_log_second_moment(WeightedPrimeSystem.from_table(table6, 10**6)).value
    assert 0 <= big - math.log(math.log(10**6)) / 2 <= 1.5


def test_log_second_moment_monte_carlo(table_small):
    sys = WeightedPrimeSystem.from_table(table_small, 20)
    n = 2 * 10**5
    L = sample_model(sys, 5, n, with_log_terms=True).log_values
    ref = model_log_second_moment(sys).value
    assert abs((L**2).mean() - ref) < 4 * (L**2).std() / math.sqrt(n)
