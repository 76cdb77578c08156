"""Exception and warning types shared across the package."""


class NldegreeError(Exception):
    """Base class for all errors raised by this package."""


class GridMismatchError(NldegreeError):
    """Two sampled series do not share the same (t0, dt, length) grid."""


class IntegrationBlowupError(NldegreeError):
    """ODE integration produced a non-finite state."""

    def __init__(self, time, message=None):
        self.time = time
        super().__init__(message or f"integration blew up at t={time:.6g}")


class DegenerateFrequencyError(NldegreeError):
    """Instantaneous frequency fell below the positivity tolerance."""


class InsufficientOscillationError(NldegreeError):
    """Phase span covers less than one full oscillation."""


class PhaseInitError(NldegreeError):
    """Signal has too few local maxima to seed a phase estimate."""


class DecompositionError(NldegreeError):
    """No component could be extracted from the signal."""


class IllConditionedShapeError(NldegreeError):
    """Shape-function design matrix is numerically rank deficient."""


class WindowTooShortError(NldegreeError):
    """Analysis window is too short for the requested test functions."""


class NoOscillationError(NldegreeError):
    """Analysis window contains essentially no phase progression."""


class SkippedWindowError(NldegreeError):
    """A per-point analysis window had to be skipped."""

    def __init__(self, reason):
        self.reason = reason
        super().__init__(reason)


class CsvFormatError(NldegreeError):
    """A CSV input file could not be parsed."""

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class IllConditionedPhaseWarning(UserWarning):
    """Frequency clipping was active on a large share of samples."""


class NonConvergenceWarning(UserWarning):
    """An iterative solve hit its iteration budget before its tolerance."""


class TruncatedWindowWarning(UserWarning):
    """Analysis window extends beyond the signal domain."""
