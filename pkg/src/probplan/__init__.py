"""Goal-based probabilistic planner.

Parses a PPDDL subset, grounds probabilistic operators into canonical outcome
form, and computes epsilon-consistent value functions and proper policies via
heuristic-search dynamic programming seeded by admissible lower bounds from
deterministic relaxations.
"""

from . import errors
from .grounding import GroundOperator, GroundProblem, Outcome, build_ground_problem, ground
from .solver import (
    Asp,
    AspTrace,
    BellmanSolver,
    Hdp,
    Lrtdp,
    SolveResult,
    SolverConfig,
    ValueIteration,
    ValueTable,
    asp,
    hdp,
    lrtdp,
    vi,
)
from .states import StateStore, hash64, state_atoms, state_from_atoms

__all__ = [
    "Asp",
    "AspTrace",
    "BellmanSolver",
    "GroundOperator",
    "GroundProblem",
    "Hdp",
    "Lrtdp",
    "Outcome",
    "SolveResult",
    "SolverConfig",
    "StateStore",
    "ValueIteration",
    "ValueTable",
    "asp",
    "build_ground_problem",
    "errors",
    "ground",
    "hash64",
    "hdp",
    "lrtdp",
    "state_atoms",
    "state_from_atoms",
    "vi",
]
