"""Exception hierarchy shared by all modules.

The CLI maps every :class:`ModPrimeError` to exit status 3.
"""


class ModPrimeError(Exception):
    """Base class for numeric and contract failures."""


class DomainError(ModPrimeError, ValueError):
    """An argument lies outside the domain of the operation."""


class ContractError(ModPrimeError, ValueError):
    """A precondition on the shape or kind of the inputs is violated."""


class RangeError(ModPrimeError, ValueError):
    """An argument lies outside the envelope where error control is validated."""


class ResourceError(ModPrimeError, RuntimeError):
    """The requested computation exceeds the configured budget."""


class NearSingularError(ModPrimeError, ArithmeticError):
    """A Bessel factor is numerically indistinguishable from zero."""


class CacheError(ModPrimeError, OSError):
    """A sieve cache file is malformed or does not match the request."""


class NearSingularWarning(RuntimeWarning):
    """Emitted when a product falls back to direct multiplication."""
