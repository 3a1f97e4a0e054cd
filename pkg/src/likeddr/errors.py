"""Exception types shared across the package.

The CLI maps these onto exit codes: input/config problems exit 2,
numeric divergence exits 3, anything else exits 1.
"""


class LikeDDRError(Exception):
    """Base class for all package errors."""


class InputError(LikeDDRError, ValueError):
    """Malformed or inconsistent input data."""


class FormatError(InputError):
    """A file does not follow its documented format."""


class EmptyCorpusError(InputError):
    """A corpus would end up with no users or no pairs."""


class AlignmentError(InputError):
    """Rows of two artifacts cannot be matched up."""


class ConfigError(LikeDDRError, ValueError):
    """Invalid configuration or parameter combination."""


class DomainError(LikeDDRError, ValueError):
    """A numeric argument lies outside the function's domain."""


class UndefinedCorrelationError(LikeDDRError, ValueError):
    """Pearson correlation is undefined (a constant vector)."""


class ConvergenceError(LikeDDRError, RuntimeError):
    """An iterative solver hit its iteration cap."""


class DivergenceError(LikeDDRError, ArithmeticError):
    """Training produced a non-finite objective."""
