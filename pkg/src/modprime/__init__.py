"""Numerical companion for mod-Gaussian convergence of prime sums.

Primes and prime tables, Bessel and weight functions, truncated series, the
random model, the limit function Phi, time averages of Dirichlet
polynomials and the convergence experiments built on them.
"""

__version__ = "0.1.0"

from .errors import (
    CacheError,
    ContractError,
    DomainError,
    ModPrimeError,
    NearSingularError,
    NearSingularWarning,
    RangeError,
    ResourceError,
)
from .primes import PrimeTable, sieve
from .model import WeightedPrimeSystem, model_charfun, model_moment_exact, model_moments, sample_model
from .phi import gamma_f, log_phi_coefficients, phi_partial, phi_reference, phi_weighted_partial
from .timeavg import DirichletPolynomial, QuadratureConfig

__all__ = [
    "CacheError",
    "ContractError",
    "DirichletPolynomial",
    "DomainError",
    "ModPrimeError",
    "NearSingularError",
    "NearSingularWarning",
    "PrimeTable",
    "QuadratureConfig",
    "RangeError",
    "ResourceError",
    "WeightedPrimeSystem",
    "gamma_f",
    "log_phi_coefficients",
    "model_charfun",
    "model_moment_exact",
    "model_moments",
    "phi_partial",
    "phi_reference",
    "phi_weighted_partial",
    "sample_model",
    "sieve",
]
