"""Exception types shared across the package."""

from __future__ import annotations


class HoroflowError(Exception):
    """Base class for all package-specific failures."""


class DomainError(HoroflowError, ValueError):
    """An argument left the mathematical domain of an operation."""


class SingularityError(DomainError):
    """A quantity was requested exactly at a pole of its formula."""


class ConfigurationError(HoroflowError, ValueError):
    """A run configuration failed validation.

    Carries the full list of offending fields so a user can fix a config
    file in one pass instead of replaying the parser error by error.
    """

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration: " + "; ".join(self.problems))


class ParabolicityLostError(HoroflowError):
    """The m-th mean curvature dropped to or below zero at some node."""

    def __init__(self, message: str, node_index: int | None = None):
        super().__init__(message)
        self.node_index = node_index


class HConvexityLostError(HoroflowError):
    """The shifted spectrum lost positivity where positivity was required."""


class StiffnessError(HoroflowError):
    """The stable step size pinned at dt_min for too many consecutive steps."""


class NumericalBlowupError(HoroflowError):
    """Non-finite values appeared in the evolving state."""

    def __init__(self, message: str, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class RootFindingError(HoroflowError):
    """An iterative solve (bisection / safeguarded Newton) failed to converge."""


class FeasibilityError(HoroflowError):
    """A sampling oracle found no feasible points in its constraint set."""
