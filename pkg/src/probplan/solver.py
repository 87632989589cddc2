"""Bellman machinery and the planning algorithms.

Four solvers over one shared core:

* ``ValueIteration``  - sweeps over everything reachable from the start state.
* ``Lrtdp``           - sampled trials with bottom-up solved labeling.
* ``Hdp``             - depth-first passes over the greedy envelope with a
                        labeling scheme built on Tarjan's strongly-connected
                        components bookkeeping (iterative, no recursion).
* ``Asp``             - real-time action selection with bounded lookahead,
                        driven by an environment that samples outcomes.

Values evolve by backups ``V(s) <- min(min_a q(s, a), dead_end_value)``; the
finite dead-end value keeps the operator well defined in the presence of
unavoidable dead ends.  Residuals compare against the same clamped operator so
dead-end-dominated regions can be labeled solved.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass
from random import Random
from typing import TYPE_CHECKING, Callable

from .errors import BudgetExceeded, DeadEnd, SolverFailure
from .states import StateStore, applicable, is_goal, sample_outcome, successors

if TYPE_CHECKING:
    from .grounding import GroundProblem


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by every algorithm."""

    epsilon: float = 1e-3
    weight: float = 1.0
    dead_end_value: float = 1e6
    trial_cap: int = 10_000
    lookahead: int = 0
    seed: int = 0
    verbosity: int = 0
    deadline: float | None = None  # absolute time.perf_counter() timestamp
    backup_budget: int | None = None  # raises BudgetExceeded when exhausted

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.weight < 1:
            raise ValueError("weight must be >= 1")
        if self.dead_end_value <= 0:
            raise ValueError("dead_end_value must be positive")
        if self.trial_cap < 1:
            raise ValueError("trial_cap must be >= 1")
        if self.lookahead < 0:
            raise ValueError("lookahead must be >= 0")


@dataclass(frozen=True)
class SolveResult:
    """Outcome of an offline solve."""

    v0: float
    policy: dict[int, int]
    states_expanded: int
    backups: int
    iterations: int
    converged: bool


@dataclass(frozen=True)
class AspTrace:
    """One real-time run: executed actions and the states they visited."""

    actions: tuple[int, ...]
    states: tuple[int, ...]
    reached_goal: bool
    total_cost: float

    @property
    def steps(self) -> int:
        return len(self.actions)


class ValueTable:
    """Per-state value, solved flag and greedy-action cache.

    Values are initialized lazily on first touch: goal states at 0 (and
    solved), everything else at ``weight * h(s)`` capped by the dead-end
    value.
    """

    def __init__(
        self,
        problem: GroundProblem,
        store: StateStore,
        heuristic: Callable[[int], float] | None,
        weight: float,
        dead_end_value: float,
    ):
        self._problem = problem
        self._store = store
        self._heuristic = heuristic
        self._weight = weight
        self._dead_end_value = dead_end_value
        self._values: dict[int, float] = {}
        self._solved: set[int] = set()
        self._best: dict[int, int] = {}

    def value(self, ref: int) -> float:
        v = self._values.get(ref)
        if v is not None:
            return v
        if is_goal(self._problem, self._store.mask(ref)):
            self._values[ref] = 0.0
            self._solved.add(ref)
            return 0.0
        h = self._heuristic(ref) if self._heuristic is not None else 0.0
        v = min(self._weight * h, self._dead_end_value)
        self._values[ref] = v
        return v

    def set(self, ref: int, value: float, best: int | None) -> None:
        self._values[ref] = value
        if best is not None:
            self._best[ref] = best

    def best_action(self, ref: int) -> int | None:
        return self._best.get(ref)

    def is_solved(self, ref: int) -> bool:
        if ref in self._solved:
            return True
        if ref not in self._values and is_goal(self._problem, self._store.mask(ref)):
            self._values[ref] = 0.0
            self._solved.add(ref)
            return True
        return False

    def mark_solved(self, ref: int) -> None:
        self._solved.add(ref)

    def known(self) -> dict[int, float]:
        return dict(self._values)


class BellmanSolver:
    """Shared expansion cache and backup operations."""

    def __init__(
        self,
        problem: GroundProblem,
        heuristic=None,
        config: SolverConfig | None = None,
        store: StateStore | None = None,
    ):
        self.problem = problem
        self.config = config or SolverConfig()
        self.store = store or StateStore(problem.atom_count)
        evaluate = getattr(heuristic, "evaluate", heuristic)
        self.values = ValueTable(
            problem, self.store, evaluate, self.config.weight, self.config.dead_end_value
        )
        self.rng = Random(self.config.seed)
        self.s0 = self.store.intern(problem.init_mask)
        self.backups = 0
        self.iterations = 0
        self._transitions: dict[int, list[tuple[int, float, tuple[tuple[float, int], ...]]]] = {}

    # -- transition structure ------------------------------------------------

    def expand(self, ref: int) -> list[tuple[int, float, tuple[tuple[float, int], ...]]]:
        """Applicable operators with merged successor distributions, cached."""
        cached = self._transitions.get(ref)
        if cached is None:
            mask = self.store.mask(ref)
            cached = []
            for op_id in applicable(self.problem, mask):
                dist = tuple(successors(self.problem, self.store, mask, op_id))
                cached.append((op_id, self.problem.operators[op_id].cost, dist))
            self._transitions[ref] = cached
        return cached

    @property
    def states_expanded(self) -> int:
        return len(self._transitions)

    def is_goal_ref(self, ref: int) -> bool:
        return is_goal(self.problem, self.store.mask(ref))

    def is_dead_end(self, ref: int) -> bool:
        return not self.is_goal_ref(ref) and not self.expand(ref)

    # -- Bellman operations ----------------------------------------------

    def qvalue(self, ref: int, op_id: int) -> float:
        """c(s, a) plus the probability-weighted value of the successors."""
        for oid, cost, dist in self.expand(ref):
            if oid == op_id:
                return cost + sum(p * self.values.value(r) for p, r in dist)
        raise ValueError(f"operator {op_id} not applicable at state {ref}")

    def _bellman(self, ref: int) -> tuple[float, int | None]:
        """Clamped one-step lookahead target and the minimizing operator."""
        dead_end_value = self.config.dead_end_value
        best_q = None
        best_op = None
        for op_id, cost, dist in self.expand(ref):
            q = cost
            value = self.values.value
            for p, r in dist:
                q += p * value(r)
            if best_q is None or q < best_q:
                best_q = q
                best_op = op_id
        if best_q is None:
            return dead_end_value, None
        if best_q > dead_end_value:
            return dead_end_value, best_op
        return best_q, best_op

    def residual(self, ref: int) -> float:
        """Bellman residual |V(s) - min_a q(s, a)|; 0 for goal states."""
        if self.is_goal_ref(ref):
            return 0.0
        target, _ = self._bellman(ref)
        return abs(self.values.value(ref) - target)

    def greedy(self, ref: int) -> int:
        """Minimizing operator id, ties broken toward the lowest id."""
        _, best = self._bellman(ref)
        if best is None:
            raise DeadEnd(f"no applicable operator at state {ref}")
        return best

    def backup(self, ref: int) -> tuple[float, float]:
        """Make V(s) consistent with its successors; returns (value, |change|)."""
        if self.is_goal_ref(ref):
            return 0.0, 0.0
        if self.config.backup_budget is not None and self.backups >= self.config.backup_budget:
            raise BudgetExceeded("backup budget exhausted")
        self.backups += 1
        old = self.values.value(ref)
        target, best = self._bellman(ref)
        self.values.set(ref, target, best)
        if best is None:
            self.values.mark_solved(ref)  # dead end: no action will ever apply
        return target, abs(target - old)

    # -- shared plumbing ---------------------------------------------------

    def _check_deadline(self) -> None:
        if self.config.deadline is not None and time.perf_counter() >= self.config.deadline:
            raise SolverFailure("wall-clock budget exhausted before convergence")

    def _log_iteration(self) -> None:
        if self.config.verbosity >= 1:
            v0 = self.values.value(self.s0)
            r0 = self.residual(self.s0)
            print(f"iter={self.iterations} v0={v0:.6f} residual={r0:.6f}", file=sys.stderr)

    def extract_policy(self) -> dict[int, int]:
        """Greedy policy over the closure reachable from s0 under itself."""
        policy: dict[int, int] = {}
        queue = [self.s0]
        seen = {self.s0}
        while queue:
            ref = queue.pop(0)
            if self.is_goal_ref(ref):
                continue
            trans = self.expand(ref)
            if not trans:
                continue
            op = self.greedy(ref)
            policy[ref] = op
            for oid, _, dist in trans:
                if oid == op:
                    for _, r in dist:
                        if r not in seen:
                            seen.add(r)
                            queue.append(r)
                    break
        return policy

    def _result(self, converged: bool) -> SolveResult:
        return SolveResult(
            v0=self.values.value(self.s0),
            policy=self.extract_policy(),
            states_expanded=self.states_expanded,
            backups=self.backups,
            iterations=self.iterations,
            converged=converged,
        )


class ValueIteration(BellmanSolver):
    """Gauss-Seidel sweeps over every state reachable from s0 under all operators."""

    def solve(self) -> SolveResult:
        order: list[int] = []
        queue = [self.s0]
        seen = {self.s0}
        while queue:
            ref = queue.pop(0)
            if self.is_goal_ref(ref):
                continue
            order.append(ref)
            for _, _, dist in self.expand(ref):
                for _, r in dist:
                    if r not in seen:
                        seen.add(r)
                        queue.append(r)
        while True:
            self._check_deadline()
            sweep_delta = 0.0
            for ref in order:
                _, delta = self.backup(ref)
                if delta > sweep_delta:
                    sweep_delta = delta
            self.iterations += 1
            self._log_iteration()
            if sweep_delta <= self.config.epsilon:
                break
        return self._result(True)


class Lrtdp(BellmanSolver):
    """Labeled real-time dynamic programming.

    Trials walk greedily from the start state, sampling successors, until a
    solved state or the trial cap; the visited stack is then checked bottom-up
    and every state whose greedy descendants are all epsilon-consistent is
    labeled solved.  The solve loop ends when the start state is labeled.
    """

    def solve(self, start: int | None = None) -> SolveResult:
        root = self.s0 if start is None else start
        while not self.values.is_solved(root):
            self._check_deadline()
            self._trial(root)
            self.iterations += 1
            self._log_iteration()
        return self._result(True)

    def solved_value(self, ref: int) -> float:
        """Converged value of one state (drives solve from that state)."""
        if not self.values.is_solved(ref):
            self.solve(start=ref)
        return self.values.value(ref)

    def _trial(self, root: int) -> None:
        visited: list[int] = []
        ref = root
        while not self.values.is_solved(ref) and len(visited) < self.config.trial_cap:
            visited.append(ref)
            self.backup(ref)
            best = self.values.best_action(ref)
            if best is None:
                break  # dead end, labeled by the backup
            ref = sample_outcome(self.problem, self.store, self.store.mask(ref), best, self.rng)
        while visited:
            if not self.check_solved(visited.pop()):
                break

    def check_solved(self, ref: int) -> bool:
        """Label the greedy envelope of ``ref`` if it is epsilon-consistent."""
        eps = self.config.epsilon
        consistent = True
        open_list: list[int] = []
        closed: list[int] = []
        enqueued = {ref}
        if not self.values.is_solved(ref):
            open_list.append(ref)
        while open_list:
            s = open_list.pop()
            closed.append(s)
            target, best = self._bellman(s)
            if abs(self.values.value(s) - target) > eps:
                consistent = False
                continue
            if best is None:
                continue  # dead end within tolerance of the cap value
            for oid, _, dist in self.expand(s):
                if oid == best:
                    for _, r in dist:
                        if r not in enqueued and not self.values.is_solved(r):
                            enqueued.add(r)
                            open_list.append(r)
                    break
        if consistent:
            for s in closed:
                self.values.mark_solved(s)
        else:
            while closed:
                self.backup(closed.pop())
        return consistent


class Hdp(BellmanSolver):
    """Heuristic dynamic programming: DFS passes with SCC-based labeling.

    Each pass walks the greedy envelope depth first.  A state whose residual
    exceeds epsilon is backed up and its branch cut; a completed strongly
    connected component whose states are all consistent (and below which
    nothing was updated) is labeled solved.
    """

    def solve(self) -> SolveResult:
        while not self.values.is_solved(self.s0):
            self._check_deadline()
            self._dfs_pass(self.s0)
            self.iterations += 1
            self._log_iteration()
        return self._result(True)

    def _dfs_pass(self, root: int) -> bool:
        eps = self.config.epsilon
        values = self.values
        counter = 0
        idx: dict[int, int] = {}
        low: dict[int, int] = {}
        scc_stack: list[int] = []
        on_scc: set[int] = set()
        # frame: [state, successor list, next child index, subtree-updated flag]
        frames: list[list] = []
        updated_any = False

        def enter(s: int) -> bool | None:
            """Expand s (returns None) or resolve it immediately (returns flag)."""
            nonlocal counter, updated_any
            if values.is_solved(s):
                return False
            target, best = self._bellman(s)
            if abs(values.value(s) - target) > eps:
                self.backup(s)
                updated_any = True
                return True
            idx[s] = low[s] = counter
            counter += 1
            scc_stack.append(s)
            on_scc.add(s)
            succs: list[int] = []
            if best is not None:
                for oid, _, dist in self.expand(s):
                    if oid == best:
                        seen_children = set()
                        for _, r in dist:
                            if r not in seen_children:
                                seen_children.add(r)
                                succs.append(r)
                        break
            frames.append([s, succs, 0, False])
            return None

        if enter(root) is not None:
            return updated_any
        while frames:
            frame = frames[-1]
            s, succs, i, flag = frame
            if i < len(succs):
                frame[2] += 1
                child = succs[i]
                if child in idx:
                    if child in on_scc:
                        low[s] = min(low[s], idx[child])
                    continue
                res = enter(child)
                if res is not None:
                    frame[3] = frame[3] or res
                continue
            frames.pop()
            flag = frame[3]
            if flag:
                self.backup(s)
                updated_any = True
                # s stays on the SCC stack: nothing that reaches it may label
            elif low[s] == idx[s]:
                while True:
                    t = scc_stack.pop()
                    on_scc.discard(t)
                    values.mark_solved(t)
                    if t == s:
                        break
            if frames:
                parent = frames[-1]
                parent[3] = parent[3] or flag
                low[parent[0]] = min(low[parent[0]], low[s])
        return updated_any


class Asp(BellmanSolver):
    """Real-time action selection with bounded lookahead.

    Keeps its value table across steps and across runs.  At each step the
    action minimizing the depth-``lookahead`` backed-up q-value is executed
    through the environment; the visited state is backed up with that value,
    so repeated visits keep raising values and the walk cannot loop forever.
    """

    def run(self, env, max_steps: int | None = None) -> AspTrace:
        cap = self.config.trial_cap if max_steps is None else max_steps
        actions: list[int] = []
        states: list[int] = [env.state]
        total_cost = 0.0
        reached_goal = False
        for _ in range(cap):
            ref = env.state
            if self.is_goal_ref(ref):
                reached_goal = True
                break
            trans = self.expand(ref)
            if not trans:
                self.backup(ref)  # labels the dead end
                break
            best_q = None
            best_op = None
            for op_id, cost, dist in trans:
                q = cost + sum(p * self._lookahead(r, self.config.lookahead) for p, r in dist)
                if best_q is None or q < best_q:
                    best_q = q
                    best_op = op_id
            assert best_q is not None and best_op is not None
            self.values.set(ref, min(best_q, self.config.dead_end_value), best_op)
            self.backups += 1
            actions.append(best_op)
            total_cost += self.problem.operators[best_op].cost
            states.append(env.step(best_op))
        if not reached_goal and self.is_goal_ref(env.state):
            reached_goal = True  # goal entered on the capped final step
        return AspTrace(tuple(actions), tuple(states), reached_goal, total_cost)

    def _lookahead(self, ref: int, depth: int) -> float:
        if self.values.is_solved(ref):
            return self.values.value(ref)
        if depth == 0:
            return self.values.value(ref)
        trans = self.expand(ref)
        if not trans:
            return self.config.dead_end_value
        best = min(
            cost + sum(p * self._lookahead(r, depth - 1) for p, r in dist)
            for _, cost, dist in trans
        )
        return min(best, self.config.dead_end_value)


# ---------------------------------------------------------------------------
# Convenience entry points
# ---------------------------------------------------------------------------


def vi(problem, heuristic=None, config=None, store=None) -> SolveResult:
    return ValueIteration(problem, heuristic, config, store).solve()


def lrtdp(problem, heuristic=None, config=None, store=None) -> SolveResult:
    return Lrtdp(problem, heuristic, config, store).solve()


def hdp(problem, heuristic=None, config=None, store=None) -> SolveResult:
    return Hdp(problem, heuristic, config, store).solve()


def asp(problem, heuristic, config, env, store=None) -> AspTrace:
    return Asp(problem, heuristic, config, store).run(env)
