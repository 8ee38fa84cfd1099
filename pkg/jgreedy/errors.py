from typing import Any, Optional, Sequence, Tuple
from django.core.exceptions import ValidationError


class SingularSupportError(ValidationError):
    """Restricted least squares system is rank deficient (or has a numerically zero column)."""

    def __init__(self, message: Any, support: Sequence[int]):
        super().__init__(message, code="singular")
        self.support: Tuple[int, ...] = tuple(int(i) for i in support)


class CapacityError(ValidationError):
    """Combinatorial enumeration would exceed the configured subset guard."""

    def __init__(self, message: Any, count: int, limit: int):
        super().__init__(message, code="capacity")
        self.count = count
        self.limit = limit


class DomainError(ValidationError):
    def __init__(self, message: Any):
        super().__init__(message, code="domain")


class RootNotFoundError(ValidationError):
    def __init__(self, message: Any, endpoints: Tuple[Tuple[float, float], Tuple[float, float]]):
        super().__init__(message, code="root_not_found")
        self.endpoints = endpoints


class RecoveryError(ValidationError):
    def __init__(self, message: Any, iteration: int, cause: Optional[Exception] = None):
        super().__init__(message, code="recovery")
        self.iteration = iteration
        self.cause = cause


class PropertyViolation(Exception):
    """A checked mathematical property failed. This is a finding, not a usage error."""

    def __init__(self, message: str, violations: int = 0):
        super().__init__(message)
        self.violations = violations
