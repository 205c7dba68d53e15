"""Segmented sieve, prime-power tables and the elementary prime sums."""

import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import exp1

from .errors import CacheError, DomainError

CACHE_MAGIC = b"MPRM"
CACHE_VERSION = 1
_HEADER = struct.Struct("<4sIQ")

SEGMENT_SIZE = 1 << 20


def _small_sieve(n):
    flags = np.ones(n + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if flags[p]:
            flags[p * p :: p] = False
    return flags


def _sieve_flags(limit, segment_size=SEGMENT_SIZE):
    """Primality flags for 0..limit, filled one segment at a time."""
    root = math.isqrt(limit)
    base = np.flatnonzero(_small_sieve(max(root, 2)))
    flags = np.zeros(limit + 1, dtype=bool)
    for low in range(0, limit + 1, segment_size):
        high = min(low + segment_size, limit + 1)
        seg = np.ones(high - low, dtype=bool)
        for p in base:
            p = int(p)
            if p * p >= high:
                break
            start = max(p * p, -(-low // p) * p)
            seg[start - low :: p] = False
        if low == 0:
            seg[: min(2, high)] = False
        flags[low:high] = seg
    return flags


@dataclass(frozen=True, eq=False)
class PrimeTable:
    """Primes and prime powers up to ``limit`` with cached logs.

    ``powers_n``, ``powers_p`` and ``powers_k`` describe every prime power
    ``n = p**k <= limit`` in increasing order of ``n``.
    """

    limit: int
    primes: np.ndarray
    powers_n: np.ndarray
    powers_p: np.ndarray
    powers_k: np.ndarray
    log_primes: np.ndarray = field(repr=False)
    inv_sqrt_primes: np.ndarray = field(repr=False)
    log_powers: np.ndarray = field(repr=False)
    inv_sqrt_powers: np.ndarray = field(repr=False)

    @classmethod
    def from_primes(cls, limit, primes):
        primes = np.asarray(primes, dtype=np.int64)
        ns, ps, ks = [primes], [primes], [np.ones_like(primes)]
        k = 2
        while True:
            cand = primes[primes <= int(round(limit ** (1.0 / k))) + 1]
            cand = cand[[int(p) ** k <= limit for p in cand]]
            if cand.size == 0:
                break
            ns.append(cand**k)
            ps.append(cand)
            ks.append(np.full_like(cand, k))
            k += 1
        n = np.concatenate(ns)
        order = np.argsort(n, kind="stable")
        n = n[order]
        pf = primes.astype(float)
        nf = n.astype(float)
        for arr in (primes, n):
            arr.setflags(write=False)
        return cls(
            limit=int(limit),
            primes=primes,
            powers_n=n,
            powers_p=np.concatenate(ps)[order],
            powers_k=np.concatenate(ks)[order],
            log_primes=np.log(pf),
            inv_sqrt_primes=1.0 / np.sqrt(pf),
            log_powers=np.log(nf),
            inv_sqrt_powers=1.0 / np.sqrt(nf),
        )

    @property
    def prime_powers(self):
        """Prime powers as a structured array with fields ``n``, ``p``, ``k``."""
        out = np.empty(self.powers_n.size, dtype=[("n", np.int64), ("p", np.int64), ("k", np.int64)])
        out["n"], out["p"], out["k"] = self.powers_n, self.powers_p, self.powers_k
        return out

    def prime_count(self, x):
        """pi(x) for x <= limit."""
        return int(np.searchsorted(self.primes, math.floor(x), side="right"))

    def primes_upto(self, x):
        return self.primes[: self.prime_count(x)]

    def _check(self, x):
        if not 2 <= x <= self.limit:
            raise DomainError(f"x={x} outside [2, {self.limit}]")
        return self.prime_count(x)


def sieve(limit, cache_dir=None):
    """Sieve all primes and prime powers up to ``limit``.

    When ``cache_dir`` is given (or ``MODPRIME_CACHE_DIR`` is set) the
    primality bitset is read from / written to ``sieve-<limit>.bin`` there.
    """
    limit = int(limit)
    if limit < 2:
        raise DomainError(f"sieve limit must be >= 2, got {limit}")
    cache_dir = cache_dir or os.environ.get("MODPRIME_CACHE_DIR")
    path = Path(cache_dir) / f"sieve-{limit}.bin" if cache_dir else None
    if path is not None and path.exists():
        flags = load_bitset(path, limit)
    else:
        flags = _sieve_flags(limit)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            save_bitset(path, flags)
    return PrimeTable.from_primes(limit, np.flatnonzero(flags))


def save_bitset(path, flags):
    limit = flags.size - 1
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, limit))
        fh.write(np.packbits(flags, bitorder="little").tobytes())


def load_bitset(path, limit=None):
    """Read a cached primality bitset, validating the header."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise CacheError(f"{path}: truncated header")
        magic, version, stored = _HEADER.unpack(head)
        if magic != CACHE_MAGIC:
            raise CacheError(f"{path}: bad magic {magic!r}")
        if version != CACHE_VERSION:
            raise CacheError(f"{path}: unsupported version {version}")
        if limit is not None and stored != limit:
            raise CacheError(f"{path}: cached limit {stored} != requested {limit}")
        raw = np.frombuffer(fh.read(), dtype=np.uint8)
    if raw.size != (stored + 1 + 7) // 8:
        raise CacheError(f"{path}: bitset length {raw.size} does not match limit {stored}")
    return np.unpackbits(raw, count=stored + 1, bitorder="little").astype(bool)


def prime_reciprocal_sum(table, x):
    """Sum of 1/p over p <= x, compensated."""
    n = table._check(x)
    return math.fsum(1.0 / table.primes[:n])


def mertens_product(table, x):
    """Product of (1 - 1/p) over p <= x, via a compensated log-sum."""
    n = table._check(x)
    return math.exp(math.fsum(np.log1p(-1.0 / table.primes[:n])))


def weighted_logp_sum(table, x):
    """Sum of log(p)/p over p <= x."""
    n = table._check(x)
    return math.fsum(table.log_primes[:n] / table.primes[:n])


def prime_power_sum(table, x, s):
    """Sum of p**(-s) over p <= x (s > 0)."""
    n = table._check(x)
    return math.fsum(np.exp(-s * table.log_primes[:n]))


def prime_tail_estimate(x, s=1.0):
    """Integral estimate of the sum of p**(-s) over primes p > x, s > 1.

    Uses the prime density 1/log t:  int_x^inf t**(-s) / log t dt = E1((s-1) log x).
    """
    return float(exp1((s - 1.0) * math.log(x)))


def mertens_constant_estimate(table):
    """Mertens' constant from the primes in ``table`` plus a tail integral.

    Returns ``(value, tail)`` where ``tail`` is the estimated contribution of
    the primes above ``table.limit`` to sum(log(1-1/p) + 1/p), which is about
    -sum 1/(2p^2) - sum 1/(3p^3).
    """
    from .specfun import EULER_GAMMA

    p = table.primes.astype(float)
    head = math.fsum(np.log1p(-1.0 / p) + 1.0 / p)
    x = float(table.limit)
    tail = -0.5 * prime_tail_estimate(x, 2.0) - prime_tail_estimate(x, 3.0) / 3.0
    return EULER_GAMMA + head + tail, tail
