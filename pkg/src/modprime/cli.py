"""Command-line front end: ``modprime <command> [options]``.

Every command writes one table (CSV or JSON) to stdout or ``--output`` and a
short pass/fail summary to stderr. Exit codes: 0 success, 2 usage error,
3 numeric or contract error.
"""

import argparse
import math
import shlex
import sys
from dataclasses import dataclass, field

from . import __version__
from . import experiments as ex
from ._parallel import set_default_threads
from .errors import ModPrimeError
from .model import WeightedPrimeSystem, model_charfun, model_moment_exact
from .phi import gamma_f, gamma_f_integral, phi_reference, phi_weighted_partial
from .primes import mertens_product, prime_reciprocal_sum, sieve
from .specfun import EULER_GAMMA, MERTENS_CONSTANT
from .timeavg import DirichletPolynomial, QuadratureConfig, time_average_charfun


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list of numbers, got {text!r}")


def _number(text):
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")


class _Parser(argparse.ArgumentParser):
    """Prints the full help, not just the usage line, on a usage error."""

    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(2, f"\n{self.prog}: error: {message}\n")


_FMT = argparse.ArgumentDefaultsHelpFormatter


def _common(p, seed=False, quad=False):
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="output format")
    p.add_argument("--output", default=None, help="output file (default: stdout)")
    p.add_argument("--threads", type=int, default=None, help="worker cap; results do not depend on it")
    if seed:
        p.add_argument("--seed", type=int, default=0, help="generator seed")
    if quad:
        p.add_argument("--nodes-per-period", type=int, default=8, help="quadrature nodes per fastest period")
        p.add_argument("--rule", choices=("gauss", "midpoint"), default="gauss", help="panel rule")
        p.add_argument("--panel-order", type=int, default=16, help="nodes per panel")
        p.add_argument("--max-nodes", type=int, default=400_000_000, help="quadrature node budget")


def build_parser():
    parser = _Parser(prog="modprime", description="Prime-sum convergence experiments.", formatter_class=_FMT)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)
    parser.commands = {}

    def add(name, help_text, **kw):
        p = sub.add_parser(name, help=help_text, description=help_text, formatter_class=_FMT)
        _common(p, **kw)
        parser.commands[name] = p
        return p

    p = add("sieve", "prime count, reciprocal sum and Mertens product up to x")
    p.add_argument("--x", type=_number, default=1e6)

    p = add("phi", "partial product Phi_x(z) against the reference Phi(z)")
    p.add_argument("--z", type=_number, default=1.0, help="real part of z")
    p.add_argument("--zi", type=_number, default=0.0, help="imaginary part of z")
    p.add_argument("--x", type=_number, default=1e6, help="cutoff")
    p.add_argument("--weight", choices=("one", "f", "g"), default="one")
    p.add_argument("--ref-limit", type=_number, default=1e7, help="sieve limit for the reference value")

    p = add("gamma-f", "finite-x estimates of gamma_w and their extrapolation")
    p.add_argument("--grid", type=_floats, default=[1e4, 1e5, 1e6, 1e7])
    p.add_argument("--weight", choices=("one", "f", "g"), default="f")
    p.add_argument("--order", type=int, default=2, help="fit gamma + b/(log x)^order")

    p = add("moments", "moment E[Y^k] of the random model")
    p.add_argument("--x", type=_number, default=3.0)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--weight", choices=("one", "f", "g"), default="one")
    p.add_argument("--float", dest="exact", action="store_false", help="floating-point engine")

    p = add("charfun", "time-averaged characteristic function against the model", quad=True)
    p.add_argument("--x", type=_number, default=30.0)
    p.add_argument("--T", type=_number, default=1e5)
    p.add_argument("--u", type=_floats, default=[0.5, 1.0, 2.0], help="comma list")
    p.add_argument("--weight", choices=("one", "f", "g"), default="one")

    p = add("cumulants", "model cumulants against the coefficients of log Phi")
    p.add_argument("--grid", type=_floats, default=[1e4, 1e5, 1e6])
    p.add_argument("--K", type=int, default=8)

    p = add("truncation", "Taylor reconstruction of the model characteristic function")
    p.add_argument("--x", type=_number, default=100.0)
    p.add_argument("--N", type=int, default=4)
    p.add_argument("--u", type=_floats, default=[0.0, 0.5, 1.0, 2.0])

    p = add("clt", "distance of the normalised sum from the normal law", seed=True, quad=True)
    p.add_argument("--grid", type=_floats, default=[1e2, 1e4, 1e6])
    p.add_argument("--mode", choices=("monte_carlo", "time_average"), default="monte_carlo")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--gaussian-tail-above", type=_number, default=1e4, help="pool primes above this into one normal")
    p.add_argument("--alpha", type=_number, default=1.5, help="T rule exponent")

    p = add("ldp", "large-deviation rows at speed 2/log log x", seed=True, quad=True)
    p.add_argument("--grid", type=_floats, default=[1e4, 1e5, 1e6])
    p.add_argument("--mode", choices=("exact_cgf", "monte_carlo", "time_average"), default="exact_cgf")
    p.add_argument("--h", type=_floats, default=[0.5, 1.0, 1.5])
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--alpha", type=_number, default=1.5, help="T rule exponent")

    p = add("mv-check", "mean-value remainders under doubling of T", seed=True, quad=True)
    p.add_argument("--T", type=_floats, default=[1e5, 2e5, 4e5])
    p.add_argument("--M", type=int, default=50)
    p.add_argument("--draws", type=int, default=20)

    p = add("appendix-b", "mean-value families against their main bounds", seed=True, quad=True)
    p.add_argument("--x", type=_number, default=100.0)
    p.add_argument("--y", type=_number, default=10.0)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--T", type=_floats, default=[1e5, 2e5, 4e5])
    p.add_argument("--mode", choices=("extremal", "random"), default="extremal")
    p.add_argument("--V", type=_floats, default=[1.0, 2.0, 3.0])
    p.add_argument("--T-fit", type=_number, default=1e4)
    p.add_argument("--weight", choices=("one", "f", "g"), default="g")

    p = add("sigma-star", "prime-power part of the weighted sum on random t", seed=True)
    p.add_argument("--grid", type=_floats, default=[1e4, 2e4, 4e4])
    p.add_argument("--t-count", type=int, default=1000)
    p.add_argument("--t-range", type=_floats, default=[1e5, 2e5])
    p.add_argument("--weight", choices=("one", "f", "g"), default="f")
    return parser


_IO_KEYS = ("command", "format", "output", "threads")
_QUAD_KEYS = ("nodes_per_period", "rule", "panel_order", "max_nodes")


@dataclass(frozen=True)
class RunConfig:
    """A parsed command line; :meth:`canonical` reparses to an equal config."""

    command: str
    params: tuple = field(default_factory=tuple)
    format: str = "csv"
    output: str = None
    threads: int = None

    @classmethod
    def from_namespace(cls, ns):
        d = vars(ns)
        params = tuple(sorted((k, _freeze(v)) for k, v in d.items() if k not in _IO_KEYS))
        return cls(ns.command, params, ns.format, ns.output, ns.threads)

    @classmethod
    def parse(cls, argv):
        return cls.from_namespace(build_parser().parse_args(argv))

    def get(self, key, default=None):
        return dict(self.params).get(key, default)

    def argv(self):
        out = [self.command]
        for k, v in self.params:
            flag = "--" + k.replace("_", "-")
            if k == "exact":
                if not v:
                    out.append("--float")
                continue
            if isinstance(v, tuple):
                out += [flag, ",".join(_fmt_num(x) for x in v)]
            else:
                out += [flag, _fmt_num(v)]
        out += ["--format", self.format]
        if self.output is not None:
            out += ["--output", self.output]
        if self.threads is not None:
            out += ["--threads", str(self.threads)]
        return out

    def canonical(self):
        return shlex.join(self.argv())

    @classmethod
    def from_canonical(cls, text):
        return cls.parse(shlex.split(text))

    def quadrature(self):
        kw = {k: self.get(k) for k in _QUAD_KEYS if self.get(k) is not None}
        return QuadratureConfig(threads=self.threads, **kw)


def _freeze(v):
    return tuple(v) if isinstance(v, list) else v


def _fmt_num(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _table_for(limit):
    return sieve(int(math.ceil(limit)))


def _cmd_sieve(cfg):
    x = cfg.get("x")
    tab = _table_for(x)
    loglog = math.log(math.log(x))
    out = ex.ConvergenceTable("sieve", {"x": x})
    out.add("pi(x)", tab.prime_count(x), None)
    out.add("sum 1/p - log log x", prime_reciprocal_sum(tab, x) - loglog, MERTENS_CONSTANT)
    out.add("e^gamma log x prod(1-1/p)", math.exp(EULER_GAMMA) * math.log(x) * mertens_product(tab, x), 1.0)
    return out


def _cmd_phi(cfg):
    x, z = cfg.get("x"), complex(cfg.get("z"), cfg.get("zi"))
    tab = _table_for(max(x, cfg.get("ref_limit")))
    ev = phi_weighted_partial(z, x, tab, cfg.get("weight"))
    ref = phi_reference(z, tab)
    out = ex.ConvergenceTable("phi", {"x": x, "z": z, "weight": cfg.get("weight"), "ref_limit": cfg.get("ref_limit")})
    # for real z every factor is real
    value, refv = (ev.value, ref.value) if z.imag else (ev.value.real, ref.value.real)
    out.add(f"x={x:g},z={ex._zlabel(z)}", value, refv, budget=ev.tail_estimate)
    return out


def _cmd_gamma_f(cfg):
    grid, weight, order = list(cfg.get("grid")), cfg.get("weight"), cfg.get("order")
    tab = _table_for(max(grid))
    res = gamma_f(grid, tab, weight, order)
    ref = gamma_f_integral(weight)
    out = ex.ConvergenceTable("gamma-f", {"grid": grid, "weight": weight, "order": order})
    for x, e in zip(res.x_grid, res.estimates):
        out.add(f"x={x:g}", e, ref)
    out.add("extrapolated", res.extrapolated, ref, budget=res.residuals[-1])
    return out


def _cmd_moments(cfg):
    x, k, weight = cfg.get("x"), cfg.get("k"), cfg.get("weight")
    tab = _table_for(max(x, 2))
    sys_ = WeightedPrimeSystem.from_table(tab, x, weight)
    exact = cfg.get("exact") and sys_.unit_weights
    m = model_moment_exact(sys_, k, exact=exact)
    out = ex.ConvergenceTable("moments", {"x": x, "k": k, "weight": weight, "exact": bool(exact)})
    out.add(f"k={k}", m, None)
    return out


def _cmd_charfun(cfg):
    x, T, us, weight = cfg.get("x"), cfg.get("T"), list(cfg.get("u")), cfg.get("weight")
    tab = _table_for(x)
    poly = DirichletPolynomial.prime_sum(tab, x, weight)
    sys_ = WeightedPrimeSystem.from_table(tab, x, weight)
    res = time_average_charfun(poly, T, us, cfg.quadrature())
    out = ex.ConvergenceTable("charfun", {"x": x, "T": T, "u": us, "weight": weight, "quadrature": _quad_params(cfg)})
    for u, r in zip(us, res):
        out.add(f"u={u:g}", r.value, model_charfun(sys_, u), budget=r.error)
    return out


def _quad_params(cfg):
    return {k: cfg.get(k) for k in _QUAD_KEYS}


def _cmd_cumulants(cfg):
    grid = list(cfg.get("grid"))
    return ex.cumulant_experiment(_table_for(max(max(grid), 1e6)), grid, cfg.get("K"))


def _cmd_truncation(cfg):
    x = cfg.get("x")
    return ex.truncation_experiment(_table_for(x), x, list(cfg.get("u")), cfg.get("N"))


def _cmd_clt(cfg):
    grid = list(cfg.get("grid"))
    out = ex.clt_error_experiment(
        _table_for(max(grid)), grid, mode=cfg.get("mode"), samples=cfg.get("samples"), seed=cfg.get("seed"),
        gaussian_tail_above=cfg.get("gaussian_tail_above"), t_rule=ex.TRule(cfg.get("alpha")),
        cfg=cfg.quadrature(), threads=cfg.threads,
    )
    return out


def _cmd_ldp(cfg):
    grid = list(cfg.get("grid"))
    return ex.ldp_experiment(
        _table_for(max(grid)), grid, mode=cfg.get("mode"), h_grid=list(cfg.get("h")), samples=cfg.get("samples"),
        seed=cfg.get("seed"), t_rule=ex.TRule(cfg.get("alpha")), cfg=cfg.quadrature(), threads=cfg.threads,
    )


def _cmd_mv(cfg):
    return ex.mv_doubling_experiment(list(cfg.get("T")), cfg.get("M"), cfg.get("draws"), cfg.get("seed"), cfg.quadrature())


def _cmd_appendix_b(cfg):
    T_fit, V = cfg.get("T_fit"), list(cfg.get("V"))
    limit = max(cfg.get("x"), T_fit ** (1.0 / min(V)) if V else 2.0)
    return ex.appendix_b_experiment(
        _table_for(limit), cfg.get("x"), cfg.get("y"), cfg.get("k"), list(cfg.get("T")), cfg.get("mode"),
        cfg.get("seed"), V, T_fit, cfg.get("weight"), cfg.quadrature(),
    )


def _cmd_sigma_star(cfg):
    grid = list(cfg.get("grid"))
    t_range = cfg.get("t_range")
    if len(t_range) != 2:
        raise argparse.ArgumentTypeError("--t-range takes two numbers")
    return ex.sigma_star_experiment(_table_for(max(grid)), grid, cfg.get("t_count"), tuple(t_range), cfg.get("seed"), cfg.get("weight"))


COMMANDS = {
    "sieve": _cmd_sieve,
    "phi": _cmd_phi,
    "gamma-f": _cmd_gamma_f,
    "moments": _cmd_moments,
    "charfun": _cmd_charfun,
    "cumulants": _cmd_cumulants,
    "truncation": _cmd_truncation,
    "clt": _cmd_clt,
    "ldp": _cmd_ldp,
    "mv-check": _cmd_mv,
    "appendix-b": _cmd_appendix_b,
    "sigma-star": _cmd_sigma_star,
}


def run(cfg):
    """Execute a :class:`RunConfig` and return its table."""
    if cfg.threads is not None:
        if cfg.threads < 1:
            raise argparse.ArgumentTypeError("--threads must be >= 1")
        set_default_threads(cfg.threads)
    return COMMANDS[cfg.command](cfg)


def main(argv=None):
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    sub = parser.commands[args.command]
    if extra:
        sub.error(f"unrecognized arguments: {' '.join(extra)}")
    cfg = RunConfig.from_namespace(args)
    try:
        table = run(cfg)
    except argparse.ArgumentTypeError as exc:
        sub.error(str(exc))
    except ModPrimeError as exc:
        print(f"modprime {cfg.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    text = table.render(cfg.format)
    if cfg.output is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    print(table.summary(), file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
