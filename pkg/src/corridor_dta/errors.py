"""Exception hierarchy shared by all modules."""
from __future__ import annotations


class CorridorError(Exception):
    """Base class for every error raised by the package."""


class DomainError(CorridorError, ValueError):
    """A time argument lies outside the schedule domain."""


class AmbiguityError(CorridorError, ValueError):
    """An undirected slope was requested exactly at a kink."""


class HorizonError(CorridorError, ValueError):
    """A time window does not fit inside the horizon."""


class PreconditionError(CorridorError, ValueError):
    """Input violates a documented precondition (e.g. network not reduced)."""


class DueInfeasibleError(CorridorError):
    """Closed-form DUE refused because a slope feasibility condition fails."""

    def __init__(self, report):
        self.report = report
        super().__init__(str(report))


class InfeasibleProblemError(CorridorError):
    """An optimisation problem was detected infeasible or unbounded."""


class NonConvergenceError(CorridorError):
    """An iterative solver stopped without meeting its residual targets."""

    def __init__(self, message: str, residuals: dict | None = None):
        self.residuals = dict(residuals or {})
        super().__init__(message)


class InternalConsistencyError(CorridorError, AssertionError):
    """A state that valid inputs should never reach."""


class ConfigError(CorridorError, ValueError):
    """A scenario file could not be parsed or validated."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{loc}{message}")
