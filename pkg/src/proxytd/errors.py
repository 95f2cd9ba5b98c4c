"""Exception types raised across the package."""


class ProxyTDError(Exception):
    """Base class for all package errors."""


class ShapeError(ProxyTDError, ValueError):
    pass


class InsufficientWorkersError(ProxyTDError, ValueError):
    pass


class NonTransitiveError(ProxyTDError, ValueError):
    pass


class InvalidFaultError(ProxyTDError, ValueError):
    pass


class InvalidParameterError(ProxyTDError, ValueError):
    pass


class ConfigError(ProxyTDError, ValueError):
    pass


class SingularInversionError(ProxyTDError, ArithmeticError):
    pass


class DegenerateWeightsError(ProxyTDError, ValueError):
    pass


class ExceedsExactSearchError(ProxyTDError, ValueError):
    pass


class OracleUnavailableError(ProxyTDError, ValueError):
    pass


class IngestionError(ProxyTDError, ValueError):
    pass


class ParseError(IngestionError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatVersionError(ProxyTDError, ValueError):
    pass
