"""Exception and warning types shared by the numerical modules.

Every hard failure derives from :class:`AlmgrenLabError` and carries the
process exit code the command-line runner maps it to.
"""


class AlmgrenLabError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class InvalidArgumentError(AlmgrenLabError, ValueError):
    pass


class UnsupportedDimensionError(AlmgrenLabError, ValueError):
    pass


class InvalidPotentialError(AlmgrenLabError, ValueError):
    pass


class InvalidExponent(InvalidArgumentError):
    """The leading exponent violates 2 gamma + N - 2 > 0."""


class DiscretizationFailure(AlmgrenLabError, ArithmeticError):
    pass


class PositivityViolation(AlmgrenLabError, ArithmeticError):
    """The angular operator fails ``mu_1 > -((N-2)/2)**2``."""

    exit_code = 2


class UnsupportedResonance(AlmgrenLabError, ValueError):
    pass


class NonintegrableForcing(AlmgrenLabError, ArithmeticError):
    pass


class InvalidNonlinearity(AlmgrenLabError, ValueError):
    pass


class Nonconvergence(AlmgrenLabError, RuntimeError):
    exit_code = 3

    def __init__(self, message, last_residual=None):
        super().__init__(message)
        self.last_residual = last_residual


class DegenerateHeight(AlmgrenLabError, ArithmeticError):
    pass


class NoLimitDetected(AlmgrenLabError, ArithmeticError):
    exit_code = 4


class NumericFailure(AlmgrenLabError, ArithmeticError):
    pass


class InconclusiveFit(AlmgrenLabError, ArithmeticError):
    pass


class ConfigError(AlmgrenLabError, ValueError):
    pass


class AccuracyWarning(UserWarning):
    """Quadrature or basis too coarse for the requested accuracy."""


class TailWarning(UserWarning):
    """Power-law extrapolation below the inner radius is unstable."""
