"""Exception types shared across the planner."""

from __future__ import annotations


class PlannerError(Exception):
    """Base class for all planner errors."""


class PddlSyntaxError(PlannerError):
    """Malformed PPDDL input; carries file/line/column for diagnostics."""

    def __init__(self, message: str, *, filename: str = "<input>", line: int = 0, column: int = 0):
        super().__init__(message)
        self.message = message
        self.filename = filename
        self.line = line
        self.column = column

    def __str__(self) -> str:
        return f"{self.filename}:{self.line}:{self.column}: {self.message}"


class UnsupportedConstruct(PddlSyntaxError):
    """Input uses a PPDDL feature outside the supported subset."""


class BlowupLimitExceeded(PlannerError):
    """Normalizing one schema produced more split copies than the configured cap."""


class ProbabilitySumError(PlannerError):
    """A probability distribution does not sum to 1 within tolerance (or exceeds 1)."""


class EmptyGoal(PlannerError):
    """The ground goal contains no literals."""


class CapacityExceeded(PlannerError):
    """The state arena exhausted its address space."""


class DeadEnd(PlannerError):
    """A greedy action was requested at a state with no applicable operators."""


class BudgetExceeded(PlannerError):
    """A bounded search exhausted its node budget before finishing."""


class NoPatternsFound(PlannerError):
    """No exactly-one invariant group could be verified for a pattern database."""


class AdditivityViolation(PlannerError):
    """Pattern groups do not satisfy the conditions for an additive combination."""


class UnknownHeuristic(PlannerError):
    """A heuristic stack spec names an evaluator that is not registered."""


class InvalidStack(PlannerError):
    """A heuristic stack spec violates the composition rules."""


class SolverFailure(PlannerError):
    """An offline solve did not converge within its wall-clock budget."""
