import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modprime.errors import CacheError, DomainError
from modprime.primes import (
    load_bitset,
    mertens_constant_estimate,
    mertens_product,
    prime_reciprocal_sum,
    save_bitset,
    sieve,
    weighted_logp_sum,
)
from modprime.specfun import EULER_GAMMA, MERTENS_CONSTANT


def plain_sieve(n):
    # Unsegmented oracle, deliberately written differently from the library.
    flags = np.ones(n + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if flags[p]:
            flags[p * p :: p] = False
    return np.flatnonzero(flags)


def is_prime(n):
    return n >= 2 and all(n % d for d in range(2, math.isqrt(n) + 1))


def test_sieve_ten():
    tab = sieve(10)
    assert list(tab.primes) == [2, 3, 5, 7]
    assert list(tab.powers_n) == [2, 3, 4, 5, 7, 8, 9]


def test_sieve_two():
    assert list(sieve(2).primes) == [2]


def test_sieve_rejects_small_limit():
    with pytest.raises(DomainError):
        sieve(1)


def test_prime_count_million(table6):
    assert table6.primes.size == 78498
    np.testing.assert_array_equal(table6.primes, plain_sieve(10**6))


@given(st.integers(min_value=2, max_value=5000))
@settings(max_examples=40, deadline=None)
def test_sieve_matches_trial_division(n):
    tab = sieve(n)
    assert list(tab.primes) == [m for m in range(2, n + 1) if is_prime(m)]


def test_prime_powers_records(table_small):
    tab = table_small
    assert np.all(np.diff(tab.powers_n) > 0)
    assert np.all(np.diff(tab.primes) > 0)
    np.testing.assert_array_equal(tab.powers_p.astype(np.int64) ** tab.powers_k, tab.powers_n)
    np.testing.assert_allclose(tab.log_powers, np.log(tab.powers_n.astype(float)), rtol=1e-15)
    np.testing.assert_allclose(tab.inv_sqrt_powers, 1 / np.sqrt(tab.powers_n.astype(float)), rtol=1e-15)
    expected = sorted(p**k for p in range(2, 10**4 + 1) if is_prime(p) for k in range(1, 15) if p**k <= 10**4)
    assert list(tab.powers_n) == expected


def test_reciprocal_sum_small(table_small):
    assert Fraction(1, 2) + Fraction(1, 3) + Fraction(1, 5) + Fraction(1, 7) == Fraction(247, 210)
    assert prime_reciprocal_sum(table_small, 10) == pytest.approx(247 / 210, rel=1e-15)
    assert prime_reciprocal_sum(table_small, 2) == 0.5


def test_mertens_product_small(table_small):
    assert mertens_product(table_small, 10) == pytest.approx(8 / 35, rel=1e-14)
    assert mertens_product(table_small, 2) == pytest.approx(0.5, rel=1e-15)


def test_weighted_logp_sum(table_small):
    ref = math.log(2) / 2 + math.log(3) / 3 + math.log(5) / 5 + math.log(7) / 7
    assert weighted_logp_sum(table_small, 10) == pytest.approx(ref, rel=1e-15)
    assert weighted_logp_sum(table_small, 2) == pytest.approx(math.log(2) / 2, rel=1e-15)
    assert abs(weighted_logp_sum(table_small, 10**4) - math.log(10**4)) < 3


def test_out_of_range(table_small):
    with pytest.raises(DomainError):
        prime_reciprocal_sum(table_small, 10**5)
    with pytest.raises(DomainError):
        mertens_product(table_small, 1)


def test_chebyshev_bound(table6):
    counts = [table6.prime_count(10**k) for k in range(1, 7)]
    assert counts == sorted(counts)
    for k, c in zip(range(1, 7), counts):
        assert c <= 2 * 10**k / math.log(10**k)


def test_mertens_band(table6):
    for x in (10**4, 10**5, 10**6):
        d = prime_reciprocal_sum(table6, x) - math.log(math.log(x))
        assert 0.25 <= d <= 0.27
    assert abs(prime_reciprocal_sum(table6, 10**6) - math.log(math.log(10**6)) - 0.2615) < 0.05


def test_mertens_product_ratio(table6):
    ratios = [mertens_product(table6, 10.0**k) * math.log(10.0**k) * math.exp(EULER_GAMMA) for k in range(2, 7)]
    assert abs(ratios[-1] - 1) < 0.02
    assert abs(ratios[-1] - 1) < abs(ratios[0] - 1)


def test_mertens_constant_recomputed(table7):
    value, _ = mertens_constant_estimate(table7)
    assert abs(value - MERTENS_CONSTANT) < 1e-9


def test_cache_round_trip(tmp_path):
    tab = sieve(1000, cache_dir=tmp_path)
    assert (tmp_path / "sieve-1000.bin").exists()
    again = sieve(1000, cache_dir=tmp_path)
    np.testing.assert_array_equal(tab.primes, again.primes)
    flags = load_bitset(tmp_path / "sieve-1000.bin", 1000)
    assert flags.sum() == 168


def test_cache_header_validation(tmp_path):
    path = tmp_path / "x.bin"
    flags = np.zeros(101, dtype=bool)
    flags[[2, 3, 5]] = True
    save_bitset(path, flags)
    with pytest.raises(CacheError):
        load_bitset(path, 200)
    raw = path.read_bytes()
    path.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(CacheError):
        load_bitset(path)
    path.write_bytes(raw[:6])
    with pytest.raises(CacheError):
        load_bitset(path)
