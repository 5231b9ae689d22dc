"""Exception types shared across the toolkit."""


class SwitchOptError(Exception):
    """Base class for all toolkit errors."""


class InvalidProblemError(SwitchOptError, ValueError):
    """A problem definition violates a structural requirement."""


class DomainError(SwitchOptError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DivergenceError(SwitchOptError, ArithmeticError):
    """A trajectory or iterate became non-finite during integration."""


class EvaluationError(SwitchOptError, ArithmeticError):
    """A user-supplied evaluator returned a non-finite value."""


class MeshError(SwitchOptError, ValueError):
    """A collocation mesh is too coarse or not strictly increasing."""


class ConfigError(SwitchOptError, ValueError):
    """A configuration object or file is inconsistent."""
