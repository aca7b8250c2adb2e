"""Exception hierarchy shared by every module."""


class HdldevError(Exception):
    """Base class for all package errors."""


class ValidationError(HdldevError, ValueError):
    pass


class ConfigError(HdldevError, ValueError):
    """Malformed or incomplete run configuration."""


class OverflowRisk(HdldevError, OverflowError):
    """Particle counts would leave the safe range of 64-bit integers."""


class NonFiniteRate(HdldevError, FloatingPointError):
    pass


class EventBudgetExceeded(HdldevError, RuntimeError):
    pass


class IncompletePath(HdldevError, ValueError):
    """A trajectory does not cover the requested time window."""


class NegativeTime(HdldevError, ValueError):
    pass


class TooLarge(HdldevError, ValueError):
    pass


class QuadratureBudget(HdldevError, ValueError):
    pass


class Instability(HdldevError, FloatingPointError):
    pass


class PositivityViolated(HdldevError, ValueError):
    pass


class SingularJacobian(HdldevError, ArithmeticError):
    pass


class NoConvergence(HdldevError, ArithmeticError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateReaction(HdldevError, ValueError):
    pass


class DomainError(HdldevError, ValueError):
    pass
