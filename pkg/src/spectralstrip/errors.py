"""Exception taxonomy shared across the package."""


class SpectralStripError(Exception):
    """Base class for all package errors."""


class ParameterError(SpectralStripError):
    """Invalid argument or configuration value."""


class DecayError(SpectralStripError):
    """A field does not decay inside the computational domain."""


class BracketError(SpectralStripError):
    """A root bracket does not straddle a sign change."""


class NumericalError(SpectralStripError):
    """Arithmetic breakdown (non-finite values, unrecoverable pivots)."""


class InvalidStateError(SpectralStripError):
    """Operation applied to an object in the wrong state (e.g. blown-up field)."""


class EmptySpectrumSignal(SpectralStripError):
    """No negative eigenvalue present; normal termination for stripping loops."""
