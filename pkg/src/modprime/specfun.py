"""Integer-order Bessel functions, the smoothing weights and constants."""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import DomainError, RangeError

EULER_GAMMA = 0.5772156649015329
# gamma + sum_p (log(1 - 1/p) + 1/p); recomputed from a 10**7 sieve in the tests.
MERTENS_CONSTANT = 0.2614972128476428

BESSEL_ENVELOPE = 50.0
_REL_STOP = 1e-18


@dataclass(frozen=True)
class BesselEval:
    order: int
    argument: complex
    value: complex
    truncation_bound: float


def bessel_j(k, z):
    """J_k(z) from its power series, with a bound on the dropped tail.

    Summation stops once the next term is below ``1e-18 * max(1, |partial|)``.
    The tail after the last kept term ``t_n`` is bounded by the geometric
    majorant ``|t_{n+1}| / (1 - r)``, where ``r`` bounds every later term ratio.
    """
    order = k = int(k)
    z = complex(z)
    if abs(z) > BESSEL_ENVELOPE:
        raise RangeError(f"|z|={abs(z):.3g} beyond the validated envelope {BESSEL_ENVELOPE}")
    sign = 1
    if k < 0:
        k = -k
        sign = -1 if k % 2 else 1
    real = z.imag == 0.0
    half = z.real / 2 if real else z / 2
    q = -(half * half)
    term = half**k / math.factorial(k) if k else (1.0 if real else 1.0 + 0j)
    total = term
    n = 0
    aq = abs(q)
    while True:
        n += 1
        nxt = term * q / (n * (n + k))
        if abs(nxt) <= _REL_STOP * max(1.0, abs(total)) and aq < (n + 1) * (n + 1 + k):
            r = aq / ((n + 1) * (n + 1 + k))
            bound = abs(nxt) / (1.0 - r)
            break
        total += nxt
        term = nxt
    return BesselEval(order=order, argument=z, value=complex(sign * total), truncation_bound=bound)


def _series_terms(amax, k=0):
    """Terms needed so the dropped J_k series tail is below 1e-18 for |z| <= amax."""
    half = amax / 2.0
    term = half**k / math.factorial(k)
    n = 0
    while True:
        n += 1
        term *= half * half / (n * (n + k))
        if term < 1e-18 and half * half < (n + 1) * (n + 1 + k):
            return n


def bessel_j_array(k, z):
    """Vectorised J_k(z) for integer k >= 0; the term count adapts to max |z|."""
    z = np.asarray(z)
    if z.size == 0:
        return np.zeros_like(z, dtype=float)
    amax = float(np.max(np.abs(z)))
    if amax > BESSEL_ENVELOPE:
        raise RangeError(f"|z|={amax:.3g} beyond the validated envelope {BESSEL_ENVELOPE}")
    half = z / 2.0
    q = -(half * half)
    term = half**k / math.factorial(k) if k else np.ones_like(half)
    total = term.copy() if k else np.ones_like(half)
    for n in range(1, _series_terms(amax, k) + 1):
        term = term * q / (n * (n + k))
        total = total + term
    return total


def j0_array(z):
    return bessel_j_array(0, z)


@lru_cache(maxsize=None)
def log_j0_coefficients(nmax):
    """Exact coefficients l_1..l_nmax with log J_0(w) = sum_n l_n w^(2n)."""
    from .series import TruncatedSeries, series_log

    j0 = TruncatedSeries([Fraction((-1) ** n, 4**n * math.factorial(n) ** 2) for n in range(nmax + 1)])
    return tuple(series_log(j0).coeffs[1:])


def weight_f(u):
    """f(u) = (pi u / 2) cot(pi u / 2) on [0, 1], with f(0) = 1 and f(1) = 0."""
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1) or np.any(np.isnan(arr)):
        raise DomainError("weight_f needs 0 <= u <= 1")
    x = np.pi * arr / 2.0
    small = arr < 1e-2
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = x / np.tan(x)
    x2 = x * x
    taylor = 1.0 - x2 * (1.0 / 3 + x2 * (1.0 / 45 + x2 * (2.0 / 945 + x2 / 4725)))
    out = np.where(small, taylor, direct)
    out = np.where(arr == 1.0, 0.0, out)
    return float(out) if np.ndim(u) == 0 else out


def weight_g(u):
    """Selberg's weight g(u) = exp(-2u) min(1, 2(1 - u)) on [0, 1]."""
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1) or np.any(np.isnan(arr)):
        raise DomainError("weight_g needs 0 <= u <= 1")
    out = np.exp(-2.0 * arr) * np.minimum(1.0, 2.0 * (1.0 - arr))
    return float(out) if np.ndim(u) == 0 else out


WEIGHTS = {"one": None, "f": weight_f, "g": weight_g}


def weight_values(tag, u):
    """Evaluate the weight named ``tag`` ('one', 'f' or 'g') on ``u``."""
    if tag not in WEIGHTS:
        raise DomainError(f"unknown weight tag {tag!r}")
    fn = WEIGHTS[tag]
    if fn is None:
        return np.ones_like(np.asarray(u, dtype=float))
    return fn(np.clip(np.asarray(u, dtype=float), 0.0, 1.0))


def euler_gamma():
    return EULER_GAMMA


def mertens_constant():
    return MERTENS_CONSTANT
