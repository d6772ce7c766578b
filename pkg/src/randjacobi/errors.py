"""Exception hierarchy shared by all modules."""


class JacobiError(Exception):
    """Base class for every error raised by this package."""


class NonPositiveOffDiagonal(JacobiError, ValueError):
    pass


class LengthMismatch(JacobiError, ValueError):
    pass


class NotContained(JacobiError, ValueError):
    pass


class RangeError(JacobiError, IndexError):
    """A site index falls outside the range where data is defined."""


class ConvergenceFailure(JacobiError, RuntimeError):
    pass


class ZeroVector(JacobiError, ValueError):
    pass


class NullAtom(JacobiError, ValueError):
    """Radon-Nikodym density requested at a point carrying no mass."""


class InvalidSpec(JacobiError, ValueError):
    pass


class CoverageError(JacobiError, ValueError):
    pass


class ConfigError(JacobiError, ValueError):
    pass
