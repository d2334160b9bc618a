"""Exception types raised across the package."""


class GibbsNLSError(Exception):
    """Base class for every error raised by gibbsnls."""


class GridMismatch(GibbsNLSError, ValueError):
    pass


class NonSummableTail(GibbsNLSError, ValueError):
    pass


class DegenerateData(GibbsNLSError, ValueError):
    pass


class EnsembleTooSmall(GibbsNLSError, ValueError):
    pass


class AllWeightsZero(GibbsNLSError, FloatingPointError):
    pass


class LowESS(GibbsNLSError):
    pass


class BlowupDetected(GibbsNLSError, FloatingPointError):
    pass


class BadWindow(GibbsNLSError, ValueError):
    pass


class NoSnapshots(GibbsNLSError, ValueError):
    pass


class QuadratureNotConverged(GibbsNLSError, ArithmeticError):
    pass


class PreconditionViolated(GibbsNLSError, ValueError):
    pass


class WindowTooLarge(GibbsNLSError, ValueError):
    pass


class GridEmbeddingMismatch(GibbsNLSError, ValueError):
    pass


class ConfigInvalid(GibbsNLSError, ValueError):
    """Bad run configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class IoFailure(GibbsNLSError, OSError):
    pass
