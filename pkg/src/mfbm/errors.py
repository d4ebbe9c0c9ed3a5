"""Exception hierarchy shared across the package."""


class MfbmError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(MfbmError, ValueError):
    """Structurally inconsistent inputs (shape or index out of range)."""


class AdmissibilityError(MfbmError):
    """Parameter set does not define a valid process."""


class UnsupportedCaseError(MfbmError):
    """Requested a branch that is deliberately not supported."""


class InsufficientDataError(MfbmError):
    """Sample too short for the requested operation."""


class SynthesisError(MfbmError):
    """Path synthesis failed (factorization failure or size guard)."""


class DegenerateFilterError(MfbmError):
    """A filter-dependent normalization constant vanished."""


class EstimationError(MfbmError):
    """Estimation cannot proceed on the given input."""
