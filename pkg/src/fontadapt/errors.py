"""Shared exception types for the engine."""


class FontAdaptError(Exception):
    """Base class for all engine errors."""


class NonPositiveInput(FontAdaptError):
    pass


class InsufficientSamples(FontAdaptError):
    pass


class EmptyWindow(InsufficientSamples):
    pass


class TraceFormatError(FontAdaptError):
    """Malformed line in a sensor trace file; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class LabelerUnavailable(FontAdaptError):
    pass


class MalformedLabelerOutput(FontAdaptError):
    pass


class InsufficientData(FontAdaptError):
    pass


class SingularSystem(FontAdaptError):
    pass


class StorageError(FontAdaptError):
    pass


class InvalidSpec(FontAdaptError):
    pass


class CalibrationFailed(FontAdaptError):
    def __init__(self, message: str, best_deviation: float):
        super().__init__(message)
        self.best_deviation = best_deviation


class LengthMismatch(FontAdaptError):
    pass


class DegenerateInput(FontAdaptError):
    pass


class InsufficientGroups(FontAdaptError):
    pass


class InvalidCalibration(FontAdaptError):
    pass


class UnknownSession(FontAdaptError):
    pass
