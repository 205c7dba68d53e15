"""Time averages over t in [T, 2T] of functionals of Dirichlet polynomials.

All averages use composite panels on [T, 2T]. Inside a panel starting at
``t0`` the phases are split as ``(t0 + tau) w = t0 w + tau w``, so each panel
costs one sine/cosine per term while the node offsets ``tau`` share a table.
Panels are grouped into fixed chunks that may run on several threads; chunk
sums are combined in order with ``math.fsum``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import ordered_map
from .errors import ContractError, DomainError, ResourceError
from .primes import weighted_logp_sum
from .specfun import weight_values

TWO_PI = 2.0 * math.pi
_ROUNDOFF = 1e-13


@dataclass(frozen=True)
class QuadratureConfig:
    """Resolution rule: panel width ``panel_order * h`` with ``h * omega <= 2 pi / nodes_per_period``."""

    nodes_per_period: int = 8
    rule: str = "gauss"
    panel_order: int = 16
    max_nodes: int = 400_000_000
    threads: int = None
    chunk_panels: int = 2048

    def __post_init__(self):
        if self.rule not in ("gauss", "midpoint"):
            raise ContractError(f"unknown quadrature rule {self.rule!r}")
        if self.nodes_per_period < 1 or self.panel_order < 1:
            raise ContractError("nodes_per_period and panel_order must be positive")


@dataclass(frozen=True)
class QuadResult:
    value: complex
    error: float
    nodes: int


@dataclass(frozen=True, eq=False)
class DirichletPolynomial:
    """Terms ``beta_n sin(t log n)``; ``ns`` keeps the integers when known.

    ``kind='prime_sum'`` realises Im Sigma_{w,y}(-t) and
    ``kind='prime_power_sum'`` realises Im Sigma*_{w,y}(-t).
    """

    frequencies: np.ndarray
    amplitudes: np.ndarray
    kind: str = "custom"
    weight: str = "one"
    cutoff: float = math.nan
    ns: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        f = self.frequencies
        if f.shape != self.amplitudes.shape:
            raise ContractError("frequencies and amplitudes differ in length")
        if f.size > 1 and np.any(np.diff(f) <= 0):
            raise ContractError("frequencies must be strictly increasing")

    @classmethod
    def prime_sum(cls, table, y, weight="one"):
        if not 2 <= y <= table.limit:
            raise DomainError(f"y={y} outside [2, {table.limit}]")
        n = table.prime_count(y)
        logs = table.log_primes[:n]
        w = weight_values(weight, logs / math.log(y))
        return cls(logs.copy(), w * table.inv_sqrt_primes[:n], "prime_sum", weight, float(y), table.primes[:n].copy())

    @classmethod
    def prime_power_sum(cls, table, y, weight="one", min_k=1):
        """Terms (1/k) w(log n / log y) / sqrt(n) over prime powers n = p^k <= y, k >= min_k."""
        if not 2 <= y <= table.limit:
            raise DomainError(f"y={y} outside [2, {table.limit}]")
        n = int(np.searchsorted(table.powers_n, math.floor(y), side="right"))
        keep = table.powers_k[:n] >= min_k
        logs = table.log_powers[:n][keep]
        w = weight_values(weight, logs / math.log(y))
        amps = w * table.inv_sqrt_powers[:n][keep] / table.powers_k[:n][keep]
        return cls(logs.copy(), amps, "prime_power_sum", weight, float(y), table.powers_n[:n][keep].copy())

    @classmethod
    def from_terms(cls, ns, amplitudes):
        ns = np.asarray(ns, dtype=np.int64)
        order = np.argsort(ns)
        return cls(np.log(ns[order].astype(float)), np.asarray(amplitudes, dtype=float)[order], ns=ns[order])

    def scaled(self, c):
        return DirichletPolynomial(self.frequencies, c * self.amplitudes, self.kind, self.weight, self.cutoff, self.ns)

    @property
    def size(self):
        return int(self.frequencies.size)

    @property
    def omega_max(self):
        return float(self.frequencies[-1]) if self.size else 0.0

    @property
    def phase_rate(self):
        """sum |beta_n| log n, a bound on |S'(t)|."""
        return math.fsum(np.abs(self.amplitudes) * self.frequencies)

    @property
    def amplitude_sum(self):
        return math.fsum(np.abs(self.amplitudes))


def eval_imag_sum(poly, t):
    """sum_n beta_n sin(t log n) at scalar or array ``t``."""
    t_arr = np.asarray(t, dtype=float)
    flat = t_arr.reshape(-1)
    out = np.empty(flat.size)
    step = max(1, (1 << 20) // max(poly.size, 1))
    for i in range(0, flat.size, step):
        block = flat[i : i + step]
        out[i : i + step] = np.sum(np.sin(np.outer(block, poly.frequencies)) * poly.amplitudes, axis=1)
    if t_arr.ndim == 0:
        return float(out[0])
    return out.reshape(t_arr.shape)


def _imag_sum_panels(freqs, amps, t0, offs):
    """S(t0[p] + offs[j]) as a (panels, nodes) array."""
    ph = np.outer(t0, freqs)
    a = np.sin(ph) * amps
    b = np.cos(ph) * amps
    c = np.cos(np.outer(offs, freqs))
    s = np.sin(np.outer(offs, freqs))
    return np.einsum("pm,jm->pj", a, c) + np.einsum("pm,jm->pj", b, s)


def _complex_sum_panels(freqs, coefs, t0, offs):
    """sum_m c_m exp(-i t w_m) at t0[p] + offs[j]."""
    a = np.exp(-1j * np.outer(t0, freqs)) * coefs
    e = np.exp(-1j * np.outer(offs, freqs))
    return np.einsum("pm,jm->pj", a, e)


def _rule(cfg):
    n = cfg.panel_order
    if cfg.rule == "gauss":
        x, w = np.polynomial.legendre.leggauss(n)
        return (x + 1.0) / 2.0, w / 2.0
    return (np.arange(n) + 0.5) / n, np.full(n, 1.0 / n)


def _layout(T, omega, cfg, coarsen):
    n = cfg.panel_order
    h = TWO_PI / (cfg.nodes_per_period * max(omega, 1e-12)) * coarsen
    panels = max(1, math.ceil(T / (n * h)))
    return panels, T / panels


def required_nodes(T, omega, cfg):
    panels, _ = _layout(T, omega, cfg, 1)
    return panels * cfg.panel_order


def _panel_sum(integrand, T, omega, cfg, coarsen):
    panels, width = _layout(T, omega, cfg, coarsen)
    nodes = panels * cfg.panel_order
    if nodes > cfg.max_nodes:
        raise ResourceError(f"quadrature needs {nodes} nodes, budget is {cfg.max_nodes}")
    offs, w = _rule(cfg)
    offs = offs * width
    bounds = [(i, min(i + cfg.chunk_panels, panels)) for i in range(0, panels, cfg.chunk_panels)]

    def run(bound):
        t0 = T + width * np.arange(bound[0], bound[1], dtype=float)
        vals = integrand(t0, offs)
        return np.sum(np.tensordot(w, vals, axes=([0], [1])), axis=0)

    parts = np.array(ordered_map(run, bounds, cfg.threads))
    if np.iscomplexobj(parts):
        tot = np.array([complex(math.fsum(c.real), math.fsum(c.imag)) for c in np.atleast_2d(parts.T)])
    else:
        tot = np.array([math.fsum(c) for c in np.atleast_2d(parts.T)])
    return tot * (width / T), nodes


def time_average(integrand, T, omega, cfg=None):
    """(1/T) int_T^{2T} integrand dt with a half-resolution error estimate.

    ``integrand(t0, offsets)`` returns values at ``t0[:, None] + offsets``,
    optionally with a trailing axis for several functionals at once.
    Returns an array of :class:`QuadResult`, one per trailing component.
    """
    cfg = cfg or QuadratureConfig()
    if T <= 0:
        raise DomainError("T must be positive")
    fine, nodes = _panel_sum(integrand, T, omega, cfg, 1)
    coarse, _ = _panel_sum(integrand, T, omega, cfg, 2)
    err = np.maximum(np.abs(fine - coarse), _ROUNDOFF * np.maximum(1.0, np.abs(fine)))
    return [QuadResult(value=v, error=float(e), nodes=nodes) for v, e in zip(fine, err)]


def _scalar(results, real):
    r = results[0]
    return QuadResult(float(r.value.real) if real else complex(r.value), r.error, r.nodes)


def time_average_charfun(poly, T, z, cfg=None):
    """(1/T) int_T^{2T} exp(i z S(t)) dt for one or several ``z``.

    The node density follows ``omega = max(|z| sum beta_n log n, log n_max)``.
    """
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.all(zs == 0):
        out = [QuadResult(1.0 + 0j, 0.0, 0) for _ in zs]
        return out[0] if np.ndim(z) == 0 else out
    omega = max(float(np.max(np.abs(zs))) * poly.phase_rate, poly.omega_max)

    def integrand(t0, offs):
        s = _imag_sum_panels(poly.frequencies, poly.amplitudes, t0, offs)
        return np.exp(1j * s[..., None] * zs)

    res = time_average(integrand, T, omega, cfg)
    res = [QuadResult(complex(r.value), r.error, r.nodes) if zz != 0 else QuadResult(1.0 + 0j, 0.0, r.nodes) for r, zz in zip(res, zs)]
    return res[0] if np.ndim(z) == 0 else res


def time_average_moment(poly, T, k, cfg=None):
    """(1/T) int_T^{2T} S(t)^k dt; S^k is band-limited to k log n_max."""
    k = int(k)
    if k < 0:
        raise ContractError("k must be >= 0")
    if k == 0:
        return QuadResult(1.0, 0.0, 0)

    def integrand(t0, offs):
        return _imag_sum_panels(poly.frequencies, poly.amplitudes, t0, offs) ** k

    return _scalar(time_average(integrand, T, k * poly.omega_max, cfg), real=True)


def time_average_moments(poly, T, ks, cfg=None):
    """Several moments from one pass over the nodes."""
    ks = [int(k) for k in ks]
    kmax = max(max(ks), 1)

    def integrand(t0, offs):
        s = _imag_sum_panels(poly.frequencies, poly.amplitudes, t0, offs)
        return np.stack([s**k for k in ks], axis=-1)

    return [QuadResult(float(r.value.real), r.error, r.nodes) for r in time_average(integrand, T, kmax * poly.omega_max, cfg)]


def time_average_expmoment(poly, T, h, cfg=None):
    """(1/T) int_T^{2T} exp(h S(t)) dt."""
    h = float(h)
    if h == 0.0:
        return QuadResult(1.0, 0.0, 0)
    omega = max(abs(h) * poly.phase_rate, poly.omega_max)

    def integrand(t0, offs):
        return np.exp(h * _imag_sum_panels(poly.frequencies, poly.amplitudes, t0, offs))

    return _scalar(time_average(integrand, T, omega, cfg), real=True)


def _grid_step(poly, T, cfg, coarsen):
    omega = max(poly.phase_rate, poly.omega_max, 1e-12)
    n = cfg.panel_order
    h = TWO_PI / (cfg.nodes_per_period * omega) * coarsen
    panels = max(1, math.ceil(T / (n * h)))
    return panels, T / (panels * n), omega


def sample_on_grid(poly, T, cfg=None, coarsen=1):
    """S on the uniform grid T, T + h, ..., 2T - h (h from the resolution rule)."""
    cfg = cfg or QuadratureConfig()
    panels, h, _ = _grid_step(poly, T, cfg, coarsen)
    n = cfg.panel_order
    if panels * n > cfg.max_nodes:
        raise ResourceError(f"grid needs {panels * n} nodes, budget is {cfg.max_nodes}")
    offs = h * np.arange(n)
    bounds = [(i, min(i + cfg.chunk_panels, panels)) for i in range(0, panels, cfg.chunk_panels)]

    def run(bound):
        t0 = T + (n * h) * np.arange(bound[0], bound[1], dtype=float)
        return _imag_sum_panels(poly.frequencies, poly.amplitudes, t0, offs).reshape(-1)

    return np.concatenate(ordered_map(run, bounds, cfg.threads)), h


def _tail_measure(poly, T, threshold, cfg, coarsen):
    panels, h, omega = _grid_step(poly, T, cfg, coarsen)
    n = cfg.panel_order
    if panels * n > cfg.max_nodes:
        raise ResourceError(f"grid needs {panels * n} nodes, budget is {cfg.max_nodes}")
    offs = h * np.arange(n)
    tol = 1e-6 / omega
    iters = max(1, math.ceil(math.log2(max(h / tol, 2.0))))
    bounds = [(i, min(i + cfg.chunk_panels, panels)) for i in range(0, panels, cfg.chunk_panels)]

    def run(bound):
        t0 = T + (n * h) * np.arange(bound[0], bound[1], dtype=float)
        g = _imag_sum_panels(poly.frequencies, poly.amplitudes, t0, offs).reshape(-1) - threshold
        t_end = T + (n * h) * bound[1]
        g = np.append(g, eval_imag_sum(poly, t_end) - threshold)
        ts = T + h * np.arange(bound[0] * n, bound[1] * n + 1, dtype=float)
        left, right = g[:-1] >= 0, g[1:] >= 0
        full = np.count_nonzero(left & right) * h
        mixed = np.flatnonzero(left != right)
        if mixed.size == 0:
            return full, 0
        lo, hi = ts[mixed], ts[mixed + 1]
        glo_pos = left[mixed]
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            gm_pos = eval_imag_sum(poly, mid) - threshold >= 0
            same = gm_pos == glo_pos
            lo = np.where(same, mid, lo)
            hi = np.where(same, hi, mid)
        root = 0.5 * (lo + hi)
        part = np.where(glo_pos, root - ts[mixed], ts[mixed + 1] - root)
        return full + math.fsum(part), mixed.size

    parts = ordered_map(run, bounds, cfg.threads)
    measure = math.fsum(p[0] for p in parts)
    crossings = sum(p[1] for p in parts)
    return measure / T, crossings, tol, panels * n


def empirical_tail(poly, T, threshold, cfg=None):
    """Fraction of t in [T, 2T] with S(t) >= threshold.

    Sign changes of S - threshold between grid nodes are refined by bisection
    to 1e-6 / omega. The error estimate is the change against the grid with
    twice the step plus the bisection tolerance over all crossings.
    """
    cfg = cfg or QuadratureConfig()
    fine, crossings, tol, nodes = _tail_measure(poly, T, float(threshold), cfg, 1)
    coarse, _, _, _ = _tail_measure(poly, T, float(threshold), cfg, 2)
    err = abs(fine - coarse) + crossings * tol / T
    return QuadResult(fine, err, nodes)


@dataclass(frozen=True)
class MVCheck:
    empirical: complex
    main_term: complex
    remainder: complex
    bound_form: float
    d_est: float
    quadrature_error: float


def _mv_integrand(a, b):
    """Integrand for rows of coefficients ``a[d]``, ``b[d]`` (m = 1..M), one component per row."""
    freqs = np.log(np.arange(1, a.shape[1] + 1, dtype=float))

    def integrand(t0, offs):
        # einsum rather than BLAS keeps the reduction order fixed
        e = np.exp(-1j * np.outer(t0, freqs))[:, None, :] * np.exp(-1j * np.outer(offs, freqs))[None, :, :]
        return np.einsum("pjm,dm->pjd", e, a) * np.conj(np.einsum("pjm,dm->pjd", e, b))

    return integrand


def mv_check_batch(a, b, T, cfg=None):
    """:func:`mv_check` for several coefficient rows sharing one pass over the nodes."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    b = np.atleast_2d(np.asarray(b, dtype=complex))
    if a.shape[0] != b.shape[0]:
        raise ContractError("a and b need the same number of rows")
    M = max(a.shape[1], b.shape[1])
    if M < 1:
        raise ContractError("empty coefficient sequence")
    a = np.pad(a, ((0, 0), (0, M - a.shape[1])))
    b = np.pad(b, ((0, 0), (0, M - b.shape[1])))
    m = np.arange(1, M + 1, dtype=float)
    results = time_average(_mv_integrand(a, b), T, max(math.log(M), 1.0), cfg)
    out = []
    for ar, br, res in zip(a, b, results):
        prod = ar * np.conj(br)
        main = complex(math.fsum(prod.real), math.fsum(prod.imag))
        bound = 2.0 / T * math.sqrt(math.fsum(m * np.abs(ar) ** 2)) * math.sqrt(math.fsum(m * np.abs(br) ** 2))
        rem = complex(res.value) - main
        out.append(MVCheck(complex(res.value), main, rem, bound, abs(rem) / bound if bound else 0.0, res.error))
    return out


def mv_check(a, b, T, cfg=None):
    """Compare the mean of (sum a_m m^-it) conj(sum b_m m^-it) with sum a_m conj(b_m).

    ``a[i]`` and ``b[i]`` are the coefficients of m = i + 1. ``bound_form`` is
    ``(2/T) sqrt(sum m |a_m|^2) sqrt(sum m |b_m|^2)`` and ``d_est`` the ratio
    |remainder| / bound_form.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim != 1 or b.ndim != 1:
        raise ContractError("mv_check takes one sequence each; use mv_check_batch for several")
    return mv_check_batch(a[None, :], b[None, :], T, cfg)[0]


def time_average_abs_power(freqs, coefs, T, k, cfg=None):
    """(1/T) int |sum_m c_m exp(-i t w_m)|^(2k) dt."""
    k = int(k)
    if k == 0:
        return QuadResult(1.0, 0.0, 0)
    freqs = np.asarray(freqs, dtype=float)
    coefs = np.asarray(coefs, dtype=complex)

    def integrand(t0, offs):
        d = _complex_sum_panels(freqs, coefs, t0, offs)
        return (np.abs(d) ** 2) ** k

    omega = 2 * k * float(np.max(freqs)) if freqs.size else 1.0
    return _scalar(time_average(integrand, T, max(omega, 1.0), cfg), real=True)


@dataclass(frozen=True)
class AppendixBRow:
    name: str
    empirical: float
    main_bound: float
    slack: float
    allowance: float
    d_est: float
    quadrature_error: float


def _coefficients(primes, mode, rng, scale=None):
    if mode == "extremal":
        c = np.ones(primes.size, dtype=complex)
    elif mode == "random":
        c = np.exp(2j * math.pi * rng.random(primes.size)) * np.sqrt(rng.random(primes.size))
    else:
        raise ContractError(f"unknown coefficient mode {mode!r}")
    return c if scale is None else c * scale


def appendix_b_suite(table, x, y, k, T, mode="extremal", seed=0, cfg=None):
    """The three mean-value families against their main bounds.

    Rows: |sum_{p<=x} a_p p^(-1-2it)|^2k, |sum_{y<p<=x} a_p p^(-1/2-it)|^2k and
    |sum_{p<=x} b_p p^(-1/2-it)|^2k with |a_p| <= 1, |b_p| <= log p / log x.
    ``allowance`` is the remainder 2 k! pi(x)^k / T with the constant D set
    to 1, and ``d_est = max(slack, 0) / allowance``.
    """
    k = int(k)
    if k < 0:
        raise ContractError("k must be >= 0")
    if k > 0 and x > T ** (1.0 / k):
        raise ContractError(f"regime x <= T^(1/k) violated: x={x}, T^(1/k)={T ** (1.0 / k):.4g}")
    if not 2 <= y < x <= table.limit:
        raise DomainError("need 2 <= y < x <= table limit")
    rng = np.random.Generator(np.random.Philox(key=seed & ((1 << 64) - 1)))
    n_x, n_y = table.prime_count(x), table.prime_count(y)
    p = table.primes[:n_x].astype(float)
    logp = table.log_primes[:n_x]
    fk = math.factorial(k)
    lx = math.log(x)
    a = _coefficients(p, mode, rng)
    b = _coefficients(p, mode, rng, logp / lx)
    fams = [
        ("p^(-1-2it)", 2 * logp, a / p, fk * math.fsum(p**-2.0) ** k, n_x),
        ("y<p<=x", logp[n_y:], a[n_y:] / np.sqrt(p[n_y:]), fk * math.fsum(1.0 / p[n_y:]) ** k, n_x - n_y),
        ("b_p", logp, b / np.sqrt(p), fk * (weighted_logp_sum(table, x) / lx) ** k, n_x),
    ]
    rows = []
    for name, freqs, coefs, main, count in fams:
        res = time_average_abs_power(freqs, coefs, T, k, cfg)
        slack = res.value - main
        allowance = 2.0 * fk * count**k / T
        rows.append(AppendixBRow(name, res.value, main, slack, allowance, max(slack, 0.0) / allowance, res.error))
    return rows


@dataclass(frozen=True)
class CombinedBound:
    V: float
    y: float
    empirical: float
    a_fit: float
    quadrature_error: float


def appendix_b_combined(table, V, T, weight="g", cfg=None):
    """Mean of |(1/log y) sum_{n<=y} Lambda(n) n^(-1/2-it) w(log n/log y)|^(2 floor V), y = T^(1/V).

    ``a_fit`` is the smallest A with ``empirical <= 3^(2V) 2 (A V)^V``.
    """
    y = T ** (1.0 / V)
    if y > table.limit:
        raise DomainError(f"y={y:.4g} beyond table limit")
    n = int(np.searchsorted(table.powers_n, math.floor(y), side="right"))
    ly = math.log(y)
    logn = table.log_powers[:n]
    lam = table.log_primes[np.searchsorted(table.primes, table.powers_p[:n])]
    w = weight_values(weight, logn / ly)
    coefs = lam * table.inv_sqrt_powers[:n] * w / ly
    k = int(math.floor(V))
    res = time_average_abs_power(logn, coefs, T, k, cfg)
    a_fit = (res.value / (2.0 * 3.0 ** (2 * V))) ** (1.0 / V) / V
    return CombinedBound(V, y, res.value, a_fit, res.error)


@dataclass(frozen=True)
class SigmaStarDifference:
    max_difference: float
    bound: float
    c_slack: float
    x: float


def sigma_star_difference(table, x, t_grid, weight="f"):
    """Max over ``t_grid`` of |Im Sigma_{w,x}(-t) - Im Sigma*_{w,x}(-t)|.

    The difference is the prime-power part with k >= 2; ``bound`` is the sum
    of its absolute amplitudes, and ``c_slack = bound - (log log x)/2``.
    """
    if x < 4:
        if x < 2:
            raise DomainError("x must be >= 2")
        return SigmaStarDifference(0.0, 0.0, -0.5 * math.log(math.log(x)), float(x))
    diff = DirichletPolynomial.prime_power_sum(table, x, weight, min_k=2)
    vals = eval_imag_sum(diff, np.asarray(t_grid, dtype=float))
    bound = diff.amplitude_sum
    return SigmaStarDifference(float(np.max(np.abs(vals))), bound, bound - 0.5 * math.log(math.log(x)), float(x))
