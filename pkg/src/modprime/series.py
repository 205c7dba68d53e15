"""Truncated power series over the rationals or the doubles.

A series is exact when every coefficient is an ``int`` or ``Fraction``;
otherwise all coefficients are promoted to ``float`` and the inner sums of
the recurrences are accumulated with ``math.fsum``.
"""

import math
from fractions import Fraction
from numbers import Rational

from .errors import ContractError


def _is_exact(c):
    return isinstance(c, Rational)


def _dot(terms, exact):
    if exact:
        return sum(terms, Fraction(0))
    return math.fsum(terms)


class TruncatedSeries:
    """Coefficients ``c_0..c_K`` of a power series modulo ``z**(K+1)``."""

    __slots__ = ("coeffs", "exact")

    def __init__(self, coeffs, degree=None, exact=None):
        coeffs = list(coeffs)
        if degree is not None:
            coeffs = coeffs[: degree + 1] + [0] * (degree + 1 - len(coeffs))
        if not coeffs:
            raise ContractError("a series needs at least one coefficient")
        if exact is None:
            exact = all(_is_exact(c) for c in coeffs)
        if exact:
            if not all(_is_exact(c) for c in coeffs):
                raise ContractError("exact series requires rational coefficients")
            coeffs = [Fraction(c) for c in coeffs]
        else:
            coeffs = [float(c) for c in coeffs]
        self.coeffs = tuple(coeffs)
        self.exact = exact

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def __getitem__(self, i):
        return self.coeffs[i]

    def __len__(self):
        return len(self.coeffs)

    def __iter__(self):
        return iter(self.coeffs)

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        mode = "exact" if self.exact else "real"
        return f"TruncatedSeries({list(self.coeffs)!r}, {mode})"

    def _coerce(self, other):
        if not isinstance(other, TruncatedSeries):
            other = TruncatedSeries([other], degree=self.degree)
        if other.degree != self.degree:
            raise ContractError(f"degree mismatch: {self.degree} vs {other.degree}")
        return other

    def __add__(self, other):
        other = self._coerce(other)
        exact = self.exact and other.exact
        return TruncatedSeries([a + b for a, b in zip(self.coeffs, other.coeffs)], exact=exact)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries([-c for c in self.coeffs], exact=self.exact)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __mul__(self, other):
        if isinstance(other, TruncatedSeries):
            return series_mul(self, other)
        return TruncatedSeries([c * other for c in self.coeffs], exact=self.exact and _is_exact(other))

    __rmul__ = __mul__

    def to_real(self):
        return TruncatedSeries(self.coeffs, exact=False)

    @classmethod
    def variable(cls, degree, exact=True):
        """The series ``z`` truncated at ``degree``."""
        return cls([0, 1], degree=degree, exact=exact)


def series_mul(a, b):
    """Cauchy product truncated at the common degree."""
    if a.degree != b.degree:
        raise ContractError(f"degree mismatch: {a.degree} vs {b.degree}")
    exact = a.exact and b.exact
    ca, cb = a.coeffs, b.coeffs
    out = [_dot([ca[j] * cb[n - j] for j in range(n + 1)], exact) for n in range(a.degree + 1)]
    return TruncatedSeries(out, exact=exact)


def series_log(a):
    """log(a) for a series with constant term 1.

    From ``a * b' = a'``:  n b_n = n a_n - sum_{j=1}^{n-1} j b_j a_{n-j}.
    """
    if a[0] != 1:
        raise ContractError(f"series_log needs c_0 = 1, got {a[0]}")
    c = a.coeffs
    b = [0 * c[0]] * (a.degree + 1)
    for n in range(1, a.degree + 1):
        acc = _dot([n * c[n]] + [-j * b[j] * c[n - j] for j in range(1, n)], a.exact)
        b[n] = acc / n
    return TruncatedSeries(b, exact=a.exact)


def series_exp(a):
    """exp(a) for a series with constant term 0.

    From ``b' = a' b``:  n b_n = sum_{j=1}^{n} j a_j b_{n-j}.
    """
    if a[0] != 0:
        raise ContractError(f"series_exp needs c_0 = 0, got {a[0]}")
    c = a.coeffs
    b = [0 * c[0]] * (a.degree + 1)
    b[0] = c[0] + 1
    for n in range(1, a.degree + 1):
        b[n] = _dot([j * c[j] * b[n - j] for j in range(1, n + 1)], a.exact) / n
    return TruncatedSeries(b, exact=a.exact)


def _egf(values, K):
    """Exponential generating series 1 + sum_{j<=K} v_j z^j / j!."""
    vals = list(values)[:K]
    exact = all(_is_exact(v) for v in vals)
    if exact:
        coeffs = [Fraction(1)] + [Fraction(v) / math.factorial(j) for j, v in enumerate(vals, 1)]
    else:
        coeffs = [1.0] + [float(v) / math.factorial(j) for j, v in enumerate(vals, 1)]
    return TruncatedSeries(coeffs, exact=exact)


def moments_to_cumulants(m, K):
    """Cumulants kappa_1..kappa_K from raw moments m_1..m_K."""
    K = int(K)
    if K < 1:
        raise ContractError("K must be >= 1")
    if len(m) < K:
        raise ContractError(f"need {K} moments, got {len(m)}")
    log_series = series_log(_egf(m, K))
    return [c * math.factorial(j) for j, c in enumerate(log_series.coeffs[1:], 1)]


def cumulants_to_moments(kappa, K):
    """Raw moments m_1..m_K from cumulants kappa_1..kappa_K."""
    K = int(K)
    if K < 1:
        raise ContractError("K must be >= 1")
    if len(kappa) < K:
        raise ContractError(f"need {K} cumulants, got {len(kappa)}")
    g = _egf(kappa, K)
    zero = Fraction(0) if g.exact else 0.0
    exp_series = series_exp(TruncatedSeries([zero] + list(g.coeffs[1:]), exact=g.exact))
    return [c * math.factorial(j) for j, c in enumerate(exp_series.coeffs[1:], 1)]
