"""Exception types raised across the package."""


class DPKError(Exception):
    """Base class for all package errors."""


class ConstantSeriesError(DPKError, ValueError):
    """Raised when a series has zero variance and cannot be standardized."""


class SupportError(DPKError, ValueError):
    """Observation outside the support of a distribution family.

    ``indices`` lists the offending positions in the input.
    """

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = list(indices)


class ParameterError(DPKError, ValueError):
    """Distribution parameters violate their constraints."""


class ConvergenceError(DPKError, RuntimeError):
    """An iterative numerical routine did not converge.

    ``residual`` carries the last observed error estimate.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class BracketError(DPKError, RuntimeError):
    """A root-finding bracket does not contain the target."""


class DivergenceError(DPKError, FloatingPointError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message, epoch=None):
        if epoch is not None:
            message = f"{message} at epoch {epoch}"
        super().__init__(message)
        self.epoch = epoch


class NonUniformSamplingError(DPKError, ValueError):
    """A routine requiring uniform time spacing received irregular data."""
