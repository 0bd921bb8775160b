"""Exception hierarchy.

The CLI maps these onto its exit-code contract:
user/config problems -> 1, tolerance failures -> 2, numerical
non-convergence (truncation, quadrature, eigensolver) -> 3.
"""


class OptogravError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(OptogravError):
    """Malformed or incomplete configuration input (carries line numbers)."""


class ParameterError(OptogravError):
    """Physically invalid parameter value; message names the offending field."""


class DegenerateFrequencyError(OptogravError):
    """Closed-form first-order visibility requested at (near-)equal mode
    frequencies; the quadrature form handles that regime."""


class DimensionLimitError(OptogravError):
    """Requested Hilbert-space dimension exceeds the desk-scale guard."""


class TruncationError(OptogravError):
    """Fock truncation too small for the requested coherent amplitudes."""

    def __init__(self, message, suggested_n_max=None):
        super().__init__(message)
        self.suggested_n_max = suggested_n_max


class QuadratureError(OptogravError):
    """Time-integral refinement failed to converge; carries diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ToleranceError(OptogravError):
    """A verification run measured a value outside its allowed tolerance."""
