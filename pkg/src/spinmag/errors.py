"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A physical or numerical parameter violates its contract."""


class ConfigError(Exception):
    """A configuration file could not be parsed or validated.

    ``location`` identifies the offending table/key (dotted path) when known.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class AnalysisError(RuntimeError):
    """A numerical analysis step failed (fit degeneracy, no crossing, ...)."""
