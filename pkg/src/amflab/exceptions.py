"""Exception hierarchy shared across the package.

Configuration problems map to CLI exit code 1, numerical failures to exit
code 2 (see `amflab.cli`).
"""


class AmfLabError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(AmfLabError):
    """Invalid, unknown, or unusable experiment configuration."""


class UnknownExperimentError(ConfigError):
    """Experiment name not present in the registry."""


class NumericalError(AmfLabError):
    """Base class for numerical failures (CLI exit code 2)."""


class DimensionMismatchError(NumericalError):
    """Operands have incompatible shapes."""


class NonHermitianError(NumericalError):
    """Matrix fails the Hermitian symmetry check."""


class NotPositiveDefiniteError(NumericalError):
    """Cholesky-style factorization failed."""


class NonFiniteError(NumericalError):
    """NaN or Inf appeared where finite values are required."""


class EmptyInputError(NumericalError):
    """Empty vector or matrix where data is required."""


class DegenerateDelayError(NumericalError):
    """A clutter delay coincides with the target delay."""


class UnsupportedOrderError(NumericalError):
    """Constellation order outside the supported set."""


class SingularCovarianceError(NumericalError):
    """Covariance is singular (zero noise floor misconfiguration)."""


class ZeroSignalError(NumericalError):
    """All-zero signal where a nonzero waveform is required."""


class ZeroPayloadError(NumericalError):
    """All-zero data payload where a nonzero payload is required."""


class ZeroMatrixError(NumericalError):
    """All-zero (or negative semidefinite) matrix cannot be retracted."""


class DegenerateSpectrumError(NumericalError):
    """Dominant eigenvalue is not separated enough to define a projector."""


class BisectionFailureError(NumericalError):
    """Bracketing of the multiplier failed within the doubling limit."""


class TooLargeError(NumericalError):
    """Exhaustive enumeration would exceed the configured budget."""


class NoConvergenceError(NumericalError):
    """Iterative solve did not reach the required residual."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations
