"""Exception hierarchy shared by all modules."""


class QsynError(Exception):
    """Base class for toolkit errors."""


class DimensionError(QsynError, ValueError):
    pass


class ValidationError(QsynError, ValueError):
    pass


class SingularEquationError(QsynError, ArithmeticError):
    pass


class PoleEvaluationError(QsynError, ArithmeticError):
    pass


class IllPosedInterconnectionError(QsynError, ArithmeticError):
    pass


class DegenerateSpectrumError(QsynError, ArithmeticError):
    pass


class NotPhysicallyRealizableError(QsynError, ValueError):
    pass


class UncontrollableError(QsynError, ValueError):
    pass


class ConditioningError(QsynError, ArithmeticError):
    pass


class WellPosednessError(QsynError, ArithmeticError):
    pass


class WeightingError(QsynError, ValueError):
    pass


class ProjectionSingularError(QsynError, ArithmeticError):
    pass


class InitializationError(QsynError, RuntimeError):
    pass


class ConfigError(QsynError, ValueError):
    pass
