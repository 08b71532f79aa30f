"""Exception hierarchy shared by all modules."""


class FracFueterError(Exception):
    """Base class for every error raised by this package."""


class NotOrthonormal(FracFueterError, ValueError):
    pass


class MixedBasis(FracFueterError, ValueError):
    pass


class DomainError(FracFueterError, ValueError):
    pass


class QuadratureFailure(FracFueterError, ArithmeticError):
    pass


class DerivativeStepError(FracFueterError, ValueError):
    pass


class DegenerateBox(FracFueterError, ValueError):
    pass


class CalibrationFailure(FracFueterError):
    pass


class NonFiniteIntegrand(FracFueterError, ArithmeticError):
    pass


class BoundaryProximity(FracFueterError, ValueError):
    pass


class SingularPoint(FracFueterError, ValueError):
    pass


class KernelPathSingularity(FracFueterError, ValueError):
    """A quadrature node lies on (or too close to) a fractional kernel's pole path."""


class HypothesisNotMet(FracFueterError):
    pass


class MissingSecondDerivative(FracFueterError, ValueError):
    pass


class ConfigError(FracFueterError, ValueError):
    pass
