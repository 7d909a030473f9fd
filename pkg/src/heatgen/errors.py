"""Exception hierarchy shared by all pipeline stages."""


class HeatgenError(Exception):
    """Base class for engine errors."""


class InputError(HeatgenError):
    """Input file is missing or structurally unusable (CLI exit code 2)."""


class ParseError(InputError):
    """A file could not be parsed; ``location`` names the line or feature."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class ConfigError(InputError):
    pass


class EmptyDatasetError(HeatgenError):
    """No valid records survived validation (CLI exit code 1)."""

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class ValidationError(HeatgenError):
    """A single record violates an invariant."""


class ClassificationError(HeatgenError):
    pass


class CalibrationError(HeatgenError):
    pass


class DimensioningError(HeatgenError):
    pass


class SimulationError(HeatgenError):
    pass
