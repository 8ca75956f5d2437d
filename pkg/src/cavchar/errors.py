"""Exception hierarchy shared by all cavchar modules."""


class CavcharError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class DomainError(CavcharError, ValueError):
    """Input outside the mathematical domain of a model or conversion."""

    exit_code = 4


class ParseError(CavcharError, ValueError):
    """Malformed input file or schema mismatch."""

    exit_code = 2


class ValidationError(CavcharError, ValueError):
    """Structurally valid input that violates a documented invariant."""

    exit_code = 2


class DegenerateDataError(ValidationError):
    """Data cannot identify the requested model parameters."""


class FitError(CavcharError, RuntimeError):
    """Least-squares solve failed to produce a usable result."""

    exit_code = 3


class EvaluationError(FitError):
    """Residual function raised or returned non-finite values."""


class NoResonanceError(FitError):
    """Trace contains no detectable resonance."""


class MultipleResonanceError(FitError):
    """Trace contains more than one resonance candidate."""


class NonDecayingTraceError(ValidationError):
    """Ring-down trace does not decay (late samples not below early ones)."""


class WindowTooNarrowError(ValidationError):
    """Spectrum does not cover the energy window the requested fit needs."""
