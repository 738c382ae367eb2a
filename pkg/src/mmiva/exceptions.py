"""Exception hierarchy shared by every mmiva module."""


class IVAError(Exception):
    """Base class of all errors raised by mmiva."""


class DimensionMismatch(IVAError, ValueError):
    pass


class ShapeMismatch(IVAError, ValueError):
    pass


class NotPositiveDefinite(IVAError, ValueError):
    pass


class SingularMatrix(IVAError, ValueError):
    pass


class ConvergenceFailure(IVAError, RuntimeError):
    pass


class NumericalBreakdown(IVAError, RuntimeError):
    pass


class DomainError(IVAError, ValueError):
    pass


class OddChannelCount(IVAError, ValueError):
    pass


class IndivisibleBlock(IVAError, ValueError):
    pass


class SignalTooShort(IVAError, ValueError):
    pass


class LengthMismatch(IVAError, ValueError):
    pass


class ZeroReference(IVAError, ValueError):
    pass


class UnsupportedFormat(IVAError, ValueError):
    pass


class CorruptHeader(IVAError, ValueError):
    pass


class IoFailure(IVAError, OSError):
    pass


class ConfigError(IVAError, ValueError):
    pass
