import pytest

from modprime.primes import sieve


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("sieve-cache")


@pytest.fixture(scope="session")
def table_small():
    return sieve(10**4)


@pytest.fixture(scope="session")
def table6():
    return sieve(10**6)


@pytest.fixture(scope="session")
def table7():
    return sieve(10**7)
