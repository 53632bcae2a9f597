"""Exception hierarchy shared by all legnet modules."""


class LegNetError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(LegNetError, ValueError):
    """Malformed input: bad table, unknown variable, invalid structure."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line

    def __str__(self):
        msg = super().__str__()
        if self.line is not None:
            return f"line {self.line}: {msg}"
        return msg


class ConfigError(ValidationError):
    """Invalid scenario or command configuration."""


class NumericError(LegNetError):
    """Base for failures that arise while computing (exit code 2 in the CLI)."""


class UnreachableMarginError(NumericError):
    """A target margin cannot be reached by ratio updating (frozen at 0/1)."""


class ImpossibleEvidenceError(NumericError):
    """Conditioning on an event of probability zero."""


class ConvergenceError(NumericError):
    """An iterative procedure did not reach its tolerance.

    ``last`` carries the final iterate (or partial report) and ``residual``
    the error at the point of giving up.
    """

    def __init__(self, message, last=None, residual=None):
        super().__init__(message)
        self.last = last
        self.residual = residual


class InfeasibleConstraintsError(NumericError):
    """Prior constraints that no distribution can satisfy."""
