"""The limit function Phi, its weighted partial products, the coefficients of
log Phi(-iz) and the weighted Euler constant gamma_f."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DomainError, NearSingularError
from .primes import prime_tail_estimate
from .specfun import EULER_GAMMA, MERTENS_CONSTANT, j0_array, log_j0_coefficients, weight_values

PHI_ENVELOPE = 3.0
_FUSED_TERMS = 12
_FUSED_MIN_P = 1000.0


@dataclass(frozen=True)
class PhiEvaluation:
    argument: complex
    cutoff: float
    value: complex
    tail_estimate: float
    log_value: complex = field(default=0j, repr=False)


def _fused_coefficients(z):
    """Coefficients d_n, n >= 2, with  -(z^2/4) log(1-r) + log J_0(z sqrt r) = sum d_n r^n.

    The n = 1 terms cancel exactly.
    """
    z2 = z * z
    ell = log_j0_coefficients(_FUSED_TERMS)
    return [z2 / (4 * n) + float(ell[n - 1]) * z2**n for n in range(2, _FUSED_TERMS + 1)]


def _log_factors(z, r):
    """Per-prime log of (1 - r)^(-z^2/4) J_0(z sqrt r) for r = a_p^2 / p."""
    z = complex(z)
    out = np.zeros(r.shape, dtype=complex)
    live = r > 0
    fused = live & (r * max(1.0, 100.0 * abs(z) ** 2) < 1.0) & (r < 1.0 / _FUSED_MIN_P)
    direct = live & ~fused
    if np.any(direct):
        rd = r[direct]
        j0 = j0_array(z * np.sqrt(rd))
        if np.min(np.abs(j0)) < 1e-12:
            raise NearSingularError(f"J_0(z/sqrt p) vanishes numerically at z={z}")
        out[direct] = -(z * z / 4.0) * np.log1p(-rd) + np.log(j0.astype(complex))
    if np.any(fused):
        rf = r[fused]
        poly = [0.0, 0.0] + _fused_coefficients(z)
        out[fused] = np.polynomial.polynomial.polyval(rf, poly)
    return out


def _tail_bound(z, x):
    """Bound on |log of the factors beyond x|: about (|z|^2/8 + |z|^4/64) sum_{p>x} p^-2.

    sum_{p>x} p^-2 <= 2.52 E1(log x) follows from pi(t) <= 1.26 t / log t.
    """
    a = abs(z)
    return 1.1 * (a * a / 8.0 + a**4 / 64.0) * 2.52 * prime_tail_estimate(x, 2.0)


def _partial(z, x, table, weight):
    if x > table.limit:
        raise DomainError(f"cutoff {x} beyond table limit {table.limit}")
    z = complex(z)
    if abs(z) > PHI_ENVELOPE:
        raise DomainError(f"|z|={abs(z):.3g} outside the envelope |z| <= {PHI_ENVELOPE}")
    n = table.prime_count(x)
    p = table.primes[:n].astype(float)
    if weight == "one":
        r = 1.0 / p
    else:
        a = weight_values(weight, table.log_primes[:n] / math.log(x))
        r = a * a / p
    logs = _log_factors(z, r)
    log_value = complex(math.fsum(logs.real), math.fsum(logs.imag))
    return PhiEvaluation(
        argument=z,
        cutoff=float(x),
        value=complex(np.exp(log_value)),
        tail_estimate=_tail_bound(z, x),
        log_value=log_value,
    )


def phi_partial(z, x, table):
    """prod_{p<=x} (1 - 1/p)^(-z^2/4) J_0(z/sqrt p) with a tail estimate.

    Factors with ``p > max(1000, 100|z|^2)`` are summed through the fused
    expansion of their logarithm, whose leading term is ``O(|z|^2/p^2)``.
    """
    return _partial(z, x, table, "one")


def phi_weighted_partial(z, x, table, weight="f"):
    """prod_{p<=x} (1 - a_p^2/p)^(-z^2/4) J_0(z a_p/sqrt p), a_p = w(log p / log x).

    ``weight='one'`` runs the same code path as :func:`phi_partial`.
    """
    return _partial(z, x, table, weight)


def phi_reference(z, table):
    """Phi(z) from the largest cutoff the table allows, with the tail added.

    The omitted factors contribute about ``(z^2/8 - z^4/64) sum_{p>x} p^-2``
    to the logarithm; the sum is taken as ``E1(log x)``.
    """
    ev = phi_partial(z, table.limit, table)
    z = complex(z)
    tail_log = (z * z / 8.0 - z**4 / 64.0) * prime_tail_estimate(table.limit, 2.0)
    log_value = ev.log_value + tail_log
    return PhiEvaluation(
        argument=z,
        cutoff=math.inf,
        value=complex(np.exp(log_value)),
        tail_estimate=ev.tail_estimate,
        log_value=log_value,
    )


@dataclass(frozen=True)
class LogPhiCoefficients:
    """c_1..c_K of log Phi(-iz) = sum c_m z^m / m!, with tail uncertainties."""

    values: tuple
    tail_bounds: tuple
    cutoff: float

    def __getitem__(self, m):
        return self.values[m - 1]


def log_phi_coefficients(K, x, table):
    """Taylor coefficients of log Phi(-iz) from the primes up to ``x``.

    Per prime, log of ``(1-1/p)^(z^2/4) I_0(z/sqrt p)`` contributes
    ``(log(1-1/p) + 1/p) z^2 / 4`` plus ``(-1)^n l_n p^-n z^(2n)`` for n >= 2,
    where ``l_n`` are the log J_0 coefficients. Sums over ``p > x`` are
    added from the integral estimate ``E1((n-1) log x)``, which is also
    reported as the uncertainty.
    """
    K = int(K)
    if not 1 <= K <= 12:
        raise ContractError("log_phi_coefficients supports 1 <= K <= 12")
    if x > table.limit:
        raise DomainError(f"cutoff {x} beyond table limit {table.limit}")
    n_p = table.prime_count(x)
    p = table.primes[:n_p].astype(float)
    logp = table.log_primes[:n_p]
    ell = log_j0_coefficients(K // 2 + 1)
    values, tails = [], []
    for m in range(1, K + 1):
        if m % 2:
            values.append(0.0)
            tails.append(0.0)
            continue
        n = m // 2
        fact = math.factorial(m)
        if n == 1:
            head = math.fsum(np.log1p(-1.0 / p) + 1.0 / p)
            tail = -0.5 * prime_tail_estimate(x, 2.0) - prime_tail_estimate(x, 3.0) / 3.0
            values.append(fact * (head + tail) / 4.0)
            tails.append(fact * abs(tail) / 4.0)
        else:
            coef = (-1) ** n * float(ell[n - 1])
            head = math.fsum(np.exp(-n * logp))
            tail = prime_tail_estimate(x, float(n))
            values.append(fact * coef * (head + tail))
            tails.append(fact * abs(coef) * tail)
    return LogPhiCoefficients(values=tuple(values), tail_bounds=tuple(tails), cutoff=float(x))


def c2_from_constants():
    """(M - gamma) / 2 from the embedded constants."""
    return (MERTENS_CONSTANT - EULER_GAMMA) / 2.0


@dataclass(frozen=True)
class GammaFResult:
    x_grid: tuple
    estimates: tuple
    extrapolated: float
    slope: float
    order: int
    weight: str

    @property
    def residuals(self):
        return tuple(abs(e - self.extrapolated) for e in self.estimates)


def gamma_f_estimate(x, table, weight="f"):
    """-log(log x * prod_{p<=x} (1 - w(log p/log x)^2 / p))."""
    if not 2 < x <= table.limit:
        raise DomainError(f"x={x} outside (2, {table.limit}]")
    n = table.prime_count(x)
    p = table.primes[:n].astype(float)
    a = weight_values(weight, table.log_primes[:n] / math.log(x))
    return -(math.log(math.log(x)) + math.fsum(np.log1p(-a * a / p)))


def gamma_f(x_grid, table, weight="f", order=2):
    """Finite-x estimates of gamma_f and their extrapolation.

    The estimates are fitted by least squares to ``gamma_f + b / (log x)^order``.
    ``order=2`` is the default because ``1 - f^2(u)`` vanishes to second
    order at u = 0, which removes the 1/log x term from the error.
    """
    xs = tuple(float(x) for x in x_grid)
    if list(xs) != sorted(xs):
        raise ContractError("x_grid must be ascending")
    if xs and xs[-1] > table.limit:
        raise DomainError(f"grid reaches {xs[-1]} beyond table limit {table.limit}")
    if len(xs) < 3:
        raise ContractError("extrapolation needs at least 3 grid points")
    est = tuple(gamma_f_estimate(x, table, weight) for x in xs)
    design = np.column_stack([np.ones(len(xs)), np.log(xs) ** (-float(order))])
    (g0, b), *_ = np.linalg.lstsq(design, np.array(est), rcond=None)
    return GammaFResult(x_grid=xs, estimates=est, extrapolated=float(g0), slope=float(b), order=order, weight=weight)


def gamma_f_integral(weight="f"):
    """gamma - int_0^1 (1 - w(u)^2) / u du.

    By partial summation with the prime number theorem the product defining
    gamma_w tends to this value; it serves as a reference for the
    extrapolation in :func:`gamma_f`.
    """
    from scipy.integrate import quad

    if weight == "one":
        return EULER_GAMMA
    val, _ = quad(lambda u: (1.0 - float(weight_values(weight, u)) ** 2) / u if u > 0 else 0.0, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    return EULER_GAMMA - val
