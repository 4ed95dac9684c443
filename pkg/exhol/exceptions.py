"""
Error types raised by the exhol package.

Everything derives from ValueError so callers that only guard against bad
input keep working; obstructions are returned as data and never raised.
"""

from typing import Optional


class ExholError(ValueError):
    """Base class for all exhol errors."""


class ExpressionSyntaxError(ExholError):
    """Malformed expression text."""

    def __init__(self, message: str, offset: int, source: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.source = source


class UnknownIdentifierError(ExholError):
    """Variable name outside the declared scope."""

    def __init__(self, name: str, scope: Optional[list] = None):
        super().__init__(f"Unknown identifier '{name}' (scope: {scope or []})")
        self.name = name


class UnknownFunctionError(ExholError):
    """Function name that the expression language does not define."""

    def __init__(self, name: str):
        super().__init__(f"Unknown function '{name}'")
        self.name = name


class JetDomainError(ExholError):
    """Function evaluated outside its domain at the base point."""


class JetOrderError(ExholError):
    """Jet order too small for the requested construction."""


class SingularJacobianError(ExholError):
    """Jacobian of a jet map is singular at the base point."""


class SceneError(ExholError):
    """Scene data is inconsistent or degenerate."""


class IndexKindError(ExholError):
    """Tensor indices of incompatible kinds were combined."""


class ExcludedWeightError(ExholError):
    """Operator requested at a weight where it is undefined."""


class DimensionError(ExholError):
    """Dimension or codimension outside the supported range."""
