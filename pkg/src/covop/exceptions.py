"""Exception hierarchy shared by all covop modules."""


class CovopError(Exception):
    """Base class for errors raised by covop."""


class KernelOverflowError(CovopError, OverflowError):
    """A kernel exponent exceeds the float64 range."""


class NotPSDError(CovopError, ValueError):
    """Cholesky failed even at the largest permitted jitter."""


class DegenerateDiagonalError(CovopError, ValueError):
    """A sample variance is too small to normalize by."""


class DegenerateTruthError(CovopError, ValueError):
    """The reference covariance has zero operator norm."""


class NoConvergenceError(CovopError, RuntimeError):
    """An iterative eigensolver hit its iteration cap."""


class ConfigError(CovopError, ValueError):
    """An experiment configuration is malformed."""
