"""The random model: independent uniform phases attached to primes.

For a prime system with scales ``s_p = a_p / sqrt(p)`` the model variable is
``Y = sum_p s_p sin(theta_p)`` with ``theta_p`` i.i.d. uniform on [0, 2pi).
Its characteristic function is ``prod_p J_0(z s_p)``.
"""

import csv
import io
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._parallel import ordered_map
from .errors import ContractError, DomainError, NearSingularWarning, ResourceError
from .specfun import bessel_j_array, j0_array, log_j0_coefficients, weight_values

_MASK64 = (1 << 64) - 1
_TAIL_STREAM = 1 << 63
_NEAR_ZERO = 1e-12
_EXACT_AUTO_LIMIT = 2000
_MOMENT_CELLS_MAX = 50_000_000


@dataclass(frozen=True, eq=False)
class WeightedPrimeSystem:
    """Primes ``p <= x`` with amplitudes ``a_p`` in [0, 1]."""

    x: float
    primes: np.ndarray
    amplitudes: np.ndarray
    weight: str = "one"

    def __post_init__(self):
        a = self.amplitudes
        if a.shape != self.primes.shape:
            raise ContractError("amplitudes and primes differ in length")
        if np.any(a < 0) or np.any(a > 1):
            raise DomainError("amplitudes must lie in [0, 1]")

    @classmethod
    def from_table(cls, table, x, weight="one"):
        if not 2 <= x <= table.limit:
            raise DomainError(f"x={x} outside [2, {table.limit}]")
        n = table.prime_count(x)
        return cls._build(float(x), table.primes[:n], table.log_primes[:n], weight)

    @classmethod
    def from_primes(cls, primes, weight="one", x=None):
        primes = np.asarray(sorted(int(p) for p in primes), dtype=np.int64)
        if x is None:
            x = float(primes[-1]) if primes.size else 2.0
        return cls._build(float(x), primes, np.log(primes.astype(float)), weight)

    @classmethod
    def _build(cls, x, primes, logs, weight):
        if weight == "one":
            amps = np.ones(primes.size)
        else:
            amps = weight_values(weight, logs / math.log(x))
        return cls(x=x, primes=primes, amplitudes=amps, weight=weight)

    @property
    def unit_weights(self):
        return self.weight == "one"

    @property
    def scales(self):
        return self.amplitudes / np.sqrt(self.primes.astype(float))

    @property
    def size(self):
        return int(self.primes.size)


def model_charfun(sys, z):
    """E[exp(i z Y)] = prod_p J_0(z s_p).

    The product is formed as exp of a compensated sum of logs. If a factor is
    within 1e-12 of zero the direct product is returned instead and a
    :class:`NearSingularWarning` is issued.
    """
    factors = j0_array(complex(z) * sys.scales)
    if factors.size == 0:
        return 1.0 + 0j
    if np.min(np.abs(factors)) < _NEAR_ZERO:
        warnings.warn("J_0 factor near zero; using direct product", NearSingularWarning, stacklevel=2)
        return complex(np.prod(factors))
    if complex(z).imag == 0.0:
        # real argument: keep the value real, carry the sign separately
        f = factors.real
        sign = -1.0 if np.count_nonzero(f < 0) % 2 else 1.0
        return complex(sign * math.exp(math.fsum(np.log(np.abs(f)))))
    logs = np.log(factors.astype(complex))
    return complex(np.exp(complex(math.fsum(logs.real), math.fsum(logs.imag))))


_SPLIT = 1000


def model_charfun_many(sys, u):
    """Characteristic function at many real points ``u`` (vectorised).

    Scales with ``s_p >= 1/sqrt(1000)`` or ``max|u| s_p > 1/2`` are multiplied
    directly, so sign changes of individual factors are kept; the rest enter
    through the power-sum expansion of log J_0.
    """
    u = np.asarray(u, dtype=float)
    s = sys.scales
    umax = float(np.max(np.abs(u))) if u.size else 0.0
    big = (s >= 1.0 / math.sqrt(_SPLIT)) | (umax * s > 0.5)
    out = np.ones_like(u)
    for sc in s[big]:
        out = out * j0_array(u * sc)
    small = s[~big]
    if small.size:
        s2 = small * small
        poly = [0.0] + [float(c) * math.fsum(s2**n) for n, c in enumerate(log_j0_coefficients(16), 1)]
        out = out * np.exp(np.polynomial.polynomial.polyval(u * u, poly))
    return out


def _moment_polys(sys, m, exact):
    """Per-prime factors sum_{j<=m} (s_p^2)^j w^j / (j!)^2 as rows of an array."""
    if exact:
        if not sys.unit_weights:
            raise ContractError("exact moments need the unit weight")
        rows = np.empty((sys.size, m + 1), dtype=object)
        for i, p in enumerate(sys.primes.tolist()):
            inv = Fraction(1, p)
            rows[i] = [inv**j / math.factorial(j) ** 2 for j in range(m + 1)]
        return rows
    s2 = sys.scales**2
    j = np.arange(m + 1)
    fact2 = np.array([float(math.factorial(i)) ** 2 for i in j])
    return s2[:, None] ** j[None, :] / fact2[None, :]


def _tree_product(rows, m, exact):
    """Truncated product of all rows, multiplied pairwise in a fixed order."""
    one = np.zeros((1, m + 1), dtype=object if exact else float)
    one[0, 0] = Fraction(1) if exact else 1.0
    if exact:
        one[0, 1:] = Fraction(0)
    while rows.shape[0] > 1:
        if rows.shape[0] % 2:
            rows = np.concatenate([rows, one])
        a, b = rows[0::2], rows[1::2]
        out = np.empty_like(a)
        for n in range(m + 1):
            acc = a[:, 0] * b[:, n]
            for j in range(1, n + 1):
                acc = acc + a[:, j] * b[:, n - j]
            out[:, n] = acc
        rows = out
    if rows.shape[0] == 0:
        return one[0]
    return rows[0]


def model_moment_exact(sys, k, exact=None):
    """E[Y^k] by coefficient extraction.

    ``E[Y^(2m)] = (2m)! / 4^m * [w^m] prod_p sum_j (s_p^2 w)^j / (j!)^2`` and odd
    moments vanish. With ``exact=None`` the rational engine is used for unit
    weights and at most 2000 primes; ``exact=False`` forces doubles.
    """
    k = int(k)
    if k < 0:
        raise ContractError("moment order must be >= 0")
    if exact is None:
        exact = sys.unit_weights and sys.size <= _EXACT_AUTO_LIMIT
    if k % 2:
        return Fraction(0) if exact else 0.0
    m = k // 2
    if sys.size * (m + 1) > _MOMENT_CELLS_MAX:
        raise ResourceError(f"moment table of {sys.size} x {m + 1} exceeds the budget")
    if m == 0:
        return Fraction(1) if exact else 1.0
    coeff = _tree_product(_moment_polys(sys, m, exact), m, exact)[m]
    if exact:
        return Fraction(math.factorial(2 * m), 4**m) * coeff
    return math.factorial(2 * m) / 4**m * float(coeff)


def model_moments(sys, K, exact=None):
    """Raw moments m_1..m_K sharing one product table."""
    if exact is None:
        exact = sys.unit_weights and sys.size <= _EXACT_AUTO_LIMIT
    M = K // 2
    if M == 0:
        coeffs = [Fraction(1) if exact else 1.0]
    else:
        if sys.size * (M + 1) > _MOMENT_CELLS_MAX:
            raise ResourceError(f"moment table of {sys.size} x {M + 1} exceeds the budget")
        coeffs = _tree_product(_moment_polys(sys, M, exact), M, exact)
    out = []
    for k in range(1, K + 1):
        if k % 2:
            out.append(Fraction(0) if exact else 0.0)
            continue
        m = k // 2
        if exact:
            out.append(Fraction(math.factorial(2 * m), 4**m) * coeffs[m])
        else:
            out.append(math.factorial(2 * m) / 4**m * float(coeffs[m]))
    return out


def model_moment_bound(sys, k):
    """((2m)! / (4^m m!)) (sum_p s_p^2)^m for k = 2m."""
    k = int(k)
    if k < 0 or k % 2:
        raise ContractError("the moment bound is defined for even k >= 0")
    m = k // 2
    if sys.unit_weights and sys.size <= _EXACT_AUTO_LIMIT:
        total = sum((Fraction(1, int(p)) for p in sys.primes), Fraction(0))
        return Fraction(math.factorial(2 * m), 4**m * math.factorial(m)) * total**m
    total = math.fsum(sys.scales**2)
    return math.factorial(2 * m) / (4**m * math.factorial(m)) * total**m


@dataclass(frozen=True, eq=False)
class SampleBatch:
    seed: int
    count: int
    values: np.ndarray
    log_values: np.ndarray = None

    def to_csv(self, fh=None):
        """Write ``index,value[,log_value]`` rows; returns the text if ``fh`` is None."""
        own = fh is None
        fh = io.StringIO() if own else fh
        writer = csv.writer(fh, lineterminator="\n")
        if self.log_values is None:
            writer.writerow(["index", "value"])
            for i, v in enumerate(self.values.tolist()):
                writer.writerow([i, repr(v)])
        else:
            writer.writerow(["index", "value", "log_value"])
            for i, (v, w) in enumerate(zip(self.values.tolist(), self.log_values.tolist())):
                writer.writerow([i, repr(v), repr(w)])
        return fh.getvalue() if own else None


def _uniform_column(seed, stream, start, n):
    """Uniforms for samples start..start+n-1 of one stream.

    Philox is counter-based: sample ``i`` always reads word ``i % 4`` of
    block ``i // 4`` under key ``(seed, stream)``, whatever the chunking.
    """
    key = np.array([seed & _MASK64, stream], dtype=np.uint64)
    counter = np.array([start // 4, 0, 0, 0], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key, counter=counter))
    skip = start % 4
    return gen.random(n + skip)[skip:]


def _chunk_rows(ncols):
    return max(4, ((1 << 21) // max(ncols, 1)) // 4 * 4)


def sample_model(sys, seed, count, with_log_terms=False, gaussian_tail_above=None, threads=None):
    """Draw ``count`` realisations of ``Y``.

    Phases come from a counter-based generator keyed by (seed, prime index)
    and addressed by sample index, so the output is a pure function of the
    inputs and independent of chunking and thread count.

    With ``gaussian_tail_above=P0`` primes above ``P0`` are pooled into one
    normal variable of matching variance ``sum s_p^2 / 2``.
    """
    count = int(count)
    if count < 1:
        raise ContractError("count must be >= 1")
    scales = sys.scales
    n_exact = sys.size
    tail_sd = 0.0
    if gaussian_tail_above is not None:
        if with_log_terms:
            raise ContractError("log terms need every prime sampled exactly")
        n_exact = int(np.searchsorted(sys.primes, gaussian_tail_above, side="right"))
        tail_sd = math.sqrt(math.fsum(scales[n_exact:] ** 2) / 2.0)
    s_exact = scales[:n_exact]
    inv_sqrt = 1.0 / np.sqrt(sys.primes[:n_exact].astype(float))
    rows = _chunk_rows(n_exact)
    starts = list(range(0, count, rows))

    def run(start):
        n = min(rows, count - start)
        theta = np.empty((n, n_exact))
        for j in range(n_exact):
            theta[:, j] = _uniform_column(seed, j, start, n)
        theta *= 2.0 * np.pi
        sin = np.sin(theta)
        vals = np.sum(sin * s_exact, axis=1)
        if tail_sd > 0.0:
            u1 = 1.0 - _uniform_column(seed, _TAIL_STREAM, start, n)
            u2 = _uniform_column(seed, _TAIL_STREAM + 1, start, n)
            vals = vals + tail_sd * np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        logs = None
        if with_log_terms:
            w = inv_sqrt
            logs = np.sum(np.arctan2(sin * w, 1.0 - np.cos(theta) * w), axis=1)
        return vals, logs

    parts = ordered_map(run, starts, threads)
    values = np.concatenate([p[0] for p in parts])
    log_values = np.concatenate([p[1] for p in parts]) if with_log_terms else None
    return SampleBatch(seed=int(seed), count=count, values=values, log_values=log_values)


@dataclass(frozen=True)
class LogCorrelation:
    value: complex
    tail_bound: float


def _require_unit(sys):
    if not sys.unit_weights:
        raise ContractError("this identity is stated for the unit weight")


def model_log_correlation(sys, u, k_max=9):
    """E[(-sum_p Im log(1 - X_p/sqrt p)) exp(i u Y)] by the Bessel expansion.

    Sums ``i / (k p^(k/2)) J_k(u/sqrt p) prod_{q != p} J_0(u/sqrt q)`` over
    odd ``k <= k_max``. The omitted odd orders are bounded with
    ``|J_k(v)| <= (|v|/2)^k / k!`` and ``|J_0| <= 1``.
    """
    _require_unit(sys)
    k_max = int(k_max)
    if k_max < 1 or k_max % 2 == 0:
        raise ContractError("k_max must be odd and >= 1")
    u = float(u)
    p = sys.primes.astype(float)
    v = u / np.sqrt(p)
    j0 = j0_array(v)
    # products over q != p via prefix and suffix products
    prefix = np.concatenate([[1.0], np.cumprod(j0)[:-1]])
    suffix = np.concatenate([np.cumprod(j0[::-1])[::-1][1:], [1.0]])
    others = prefix * suffix
    total = np.zeros_like(p)
    for k in range(1, k_max + 1, 2):
        total = total + bessel_j_array(k, v) / (k * p ** (k / 2.0))
    value = 1j * math.fsum(total * others)
    tail = 0.0
    for k in range(k_max + 2, k_max + 60, 2):
        tail += math.fsum((np.abs(v) / 2.0) ** k / math.factorial(k) / (k * p ** (k / 2.0)))
    return LogCorrelation(value=complex(value), tail_bound=tail)


@dataclass(frozen=True)
class LogSecondMoment:
    value: float
    tail_bound: float


def model_log_second_moment(sys, k_max=60):
    """E[(sum_p Im log(1 - X_p/sqrt p))^2] = sum_p sum_k 1/(2 k^2 p^k)."""
    _require_unit(sys)
    p = sys.primes.astype(float)
    logp = np.log(p)
    terms = [math.fsum(np.exp(-k * logp)) / (2.0 * k * k) for k in range(1, k_max + 1)]
    K = k_max + 1
    # sum_{k>=K} 1/(2k^2 p^k) <= p^-K / (2K^2 (1 - 1/p)), and sum_n n^-K <= 2^-K + 2^(1-K)/(K-1)
    tail = 2.0 * (2.0**-K + 2.0 ** (1 - K) / (K - 1)) / (2.0 * K * K)
    return LogSecondMoment(value=math.fsum(terms), tail_bound=tail)
