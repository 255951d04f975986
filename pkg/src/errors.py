# src/errors.py
"""
Exception hierarchy for the KAM Workbench.

Validation errors (bad input, malformed configuration, structural problems)
map to exit code 2; numerical errors (failed gates, violated bounds,
non-convergence) map to exit code 3.
"""
from typing import Any, Optional


class WorkbenchError(Exception):
    """Base exception for all workbench errors"""

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.context = context


class ValidationError(WorkbenchError, ValueError):
    """Raised when input data or configuration is invalid"""

    pass


class NumericalError(WorkbenchError):
    """Raised when a numerical check, gate, or iteration fails"""

    pass


# =============================================================================
# Validation errors
# =============================================================================
class ConfigValidationError(ValidationError):
    """Raised when a configuration section fails validation"""

    pass


class ConfigFileError(ValidationError):
    """Raised when a configuration file is missing or not valid JSON"""

    def __init__(
        self, message: str, line: Optional[int] = None, column: Optional[int] = None
    ):
        super().__init__(message, line=line, column=column)
        self.line = line
        self.column = column


class NoCoveringSet(ValidationError):
    """Raised when no subset of a structure covers a support"""

    pass


class CapTooLarge(ValidationError):
    """Raised when an enumeration would exceed the configured budget"""

    pass


class DomainViolation(ValidationError):
    """Raised when a point lies outside the analyticity domain"""

    pass


class OriginExcluded(ValidationError):
    """Raised when action-angle variables are requested at the origin"""

    pass


class SupportOverflow(ValidationError):
    """Raised when a product support is covered by no component"""

    pass


# =============================================================================
# Numerical errors
# =============================================================================
class NoConvergence(NumericalError):
    """Raised when a supremum search fails to bracket its maximizer"""

    pass


class Divergence(NumericalError):
    """Raised when an infinite product does not converge"""

    pass


class Violation(NumericalError):
    """Raised when a nonresonance inequality fails"""

    def __init__(self, message: str, key: Any = None, lhs: float = 0.0, rhs: float = 0.0):
        super().__init__(message, key=key, lhs=lhs, rhs=rhs)
        self.key = key
        self.lhs = lhs
        self.rhs = rhs


class BoundViolated(NumericalError):
    """Raised when a measured quantity exceeds its analytic bound"""

    pass


class ZeroDivisor(NumericalError):
    """Raised when a retained small divisor vanishes"""

    pass


class SmallnessViolated(NumericalError):
    """Raised when a smallness precondition does not hold"""

    pass


class FlowEscape(NumericalError):
    """Raised when a flow trajectory leaves its domain"""

    pass


class NewtonDiverged(NumericalError):
    """Raised when a Newton iteration fails to converge"""

    pass


class ErrorBoundExceeded(NumericalError):
    """Raised when a measured error norm exceeds the step bound"""

    def __init__(self, message: str, step: Optional[int] = None, **context: Any):
        super().__init__(message, step=step, **context)
        self.step = step


class GateFailed(NumericalError):
    """Raised when the entry smallness gate fails"""

    def __init__(self, message: str, inequality: str = "", **context: Any):
        super().__init__(message, inequality=inequality, **context)
        self.inequality = inequality


class DegenerateJacobian(NumericalError):
    """Raised when a frequency map is not locally invertible"""

    pass


class QuadratureStall(NumericalError):
    """Raised when two independent period computations disagree"""

    pass


class PropertyViolation(NumericalError):
    """Raised when a tabulated function violates a defining identity"""

    pass


class StepRejected(NumericalError):
    """Raised when an integrator fails its tolerance"""

    pass
