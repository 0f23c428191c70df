"""Exception and warning classes shared by all modules."""


class FanoDiagError(Exception):
    """Base class for package errors."""


class SingularityError(FanoDiagError):
    """A numerical singularity was hit (undamped resonance, vanishing Wronskian, ...)."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class LosslessPointError(FanoDiagError):
    """An operation needing absorption (Im chi > 0) was asked for a lossless point."""


class StabilityError(FanoDiagError):
    """The discrete Hamiltonian is not positive definite."""


class ConfigError(FanoDiagError):
    """Invalid experiment configuration."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class TruncationWarning(UserWarning):
    """A frequency integral was cut off while its integrand is still significant."""


class ResolutionWarning(UserWarning):
    """The spatial grid under-resolves the local wavelength."""


class EdgeWarning(UserWarning):
    """A principal-value integral was evaluated at a mesh edge with nonzero weight."""
