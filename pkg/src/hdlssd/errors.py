"""Exception hierarchy shared by the library and the command-line front end."""


class HdlssdError(Exception):
    """Base class for all errors raised by this package."""


class DataError(HdlssdError, ValueError):
    """Invalid or inconsistent input data (shapes, labels, files)."""


class DegenerateError(DataError):
    """A fit is undefined for the given data (e.g. zero discriminant direction)."""


class ConvergenceError(HdlssdError, RuntimeError):
    """An iterative solver hit its iteration cap.

    The achieved residuals are kept on the exception so callers can report
    them instead of silently accepting a poor solution.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = dict(residuals or {})


class ConfigError(HdlssdError, ValueError):
    """Bad command-line configuration."""
