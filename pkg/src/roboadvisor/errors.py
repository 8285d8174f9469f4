"""Exception hierarchy shared across the package."""

from __future__ import annotations


class AdvisorError(Exception):
    """Base class for all package errors."""


class ValidationError(AdvisorError):
    """A domain object or input file violates its invariants."""


class DomainError(AdvisorError):
    """A numeric argument falls outside the domain it must lie in."""


class ModelError(AdvisorError):
    """A malformed optimization model (unknown variable, bad shape)."""


class SolverFailureError(AdvisorError):
    """The solver stopped without a usable optimal solution."""

    def __init__(self, message: str, status: str = "numeric-failure"):
        super().__init__(message)
        self.status = status


class SingularMatrixError(AdvisorError):
    """A matrix that must be inverted is singular."""


class InconsistentAnswersError(AdvisorError):
    """No admissible utility is consistent with the recorded choices.

    ``conflicting_answers`` holds the indices of an irreducible infeasible
    subset of the answer constraints when one could be isolated cheaply,
    otherwise ``None`` (the solver certificate is in the message).
    """

    def __init__(self, message: str, conflicting_answers: tuple[int, ...] | None = None):
        super().__init__(message)
        self.conflicting_answers = conflicting_answers


class NotFoundError(AdvisorError):
    """A referenced record does not exist."""


class ConflictError(AdvisorError):
    """A stale-version update or an out-of-order state transition."""
