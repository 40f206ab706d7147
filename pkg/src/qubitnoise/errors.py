"""Exception hierarchy.

Everything raised deliberately by the package derives from
:class:`QubitNoiseError`, so callers (and the CLI) can separate numerical
failures from schema problems without string matching.
"""


class QubitNoiseError(Exception):
    """Base class for all package errors."""


class DomainError(QubitNoiseError, ValueError):
    """An argument lies outside the domain of an operation."""


class DegenerateRegimeError(DomainError):
    """Transmon formula used where E_J(flux) is too small for it to hold."""


class ExtrapolationError(DomainError):
    """Query outside the tabulated range of an empirical curve."""


class NumericalError(QubitNoiseError, ArithmeticError):
    """Quadrature or solver did not reach the requested tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ResourceError(QubitNoiseError, MemoryError):
    """Requested resolution would need an unreasonable amount of memory."""


class FitError(NumericalError):
    """Nonlinear or linear fit failed."""


class UnidentifiableError(FitError):
    """Data carry no information about a fitted parameter."""


class DegeneracyError(FitError):
    """Design matrix is rank deficient."""


class EmptyEstimateError(QubitNoiseError, ValueError):
    """No data point survived the inclusion rules."""


class SchemaError(QubitNoiseError, ValueError):
    """Input file or config does not match the expected layout."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line
