"""Exception types shared across the package."""

from __future__ import annotations


class HbrdError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(HbrdError):
    pass


class NonPositiveDefinite(HbrdError):
    pass


class OrderingViolation(HbrdError):
    """A required Loewner ordering between two matrices does not hold."""


class ValidationError(HbrdError):
    """Raised by operations that require a validated problem instance.

    Carries the structured issue list produced by ``model.validate``.
    """

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


class MseRequiresDiagonal(HbrdError):
    """MSE distortion is only supported for diagonal conditional covariances."""


class CanonicalizationError(HbrdError):
    pass


class MRequiresKx(HbrdError):
    """The explicit observation matrix needs the source covariance."""


class InvariantViolation(HbrdError):
    pass


class SchemeInfeasible(HbrdError):
    pass


class InfeasibleConstruction(HbrdError):
    pass


class FamilyMismatch(HbrdError):
    """Distortion family does not match the requested operation."""


class SingularCorrection(HbrdError):
    """Corrected precision in a bound's feasibility check is not positive definite."""


class NoFeasiblePointFound(HbrdError):
    pass


class DomainViolation(HbrdError):
    """A log/ratio argument left its valid domain."""


class DimensionTooLarge(HbrdError):
    pass


class NonConvergence(HbrdError):
    pass
