"""Ground problem representation and the schema-to-operator grounding pass.

A ground problem holds an interned atom table, canonical-form probabilistic
operators (conjunctive literal precondition, one flat outcome distribution),
the initial state and a literal-conjunction goal.  Bitmask mirrors of every
atom-id set are precomputed here so the search core can test applicability
with a couple of integer operations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Sequence

from .errors import EmptyGoal, PddlSyntaxError, ProbabilitySumError

Term = tuple[str, ...]  # predicate name followed by ground argument names

# |sum(p) - 1| beyond this is an input error; below it we silently renormalize.
PROBABILITY_TOLERANCE = 1e-6


def _mask(ids: Iterable[int]) -> int:
    m = 0
    for i in ids:
        m |= 1 << i
    return m


@dataclass(frozen=True)
class Outcome:
    """One probabilistic effect branch: add/delete atom-id sets with a probability."""

    probability: float
    add: frozenset[int]
    delete: frozenset[int]
    add_mask: int
    del_mask: int


@dataclass(frozen=True)
class GroundOperator:
    """Instantiated operator in canonical probabilistic form."""

    id: int
    name: str
    pre_pos: frozenset[int]
    pre_neg: frozenset[int]
    cost: float
    outcomes: tuple[Outcome, ...]
    pre_pos_mask: int
    pre_neg_mask: int


@dataclass(frozen=True, eq=False)
class GroundProblem:
    """Atoms, operators, initial state and goal of one planning instance."""

    name: str
    domain_name: str
    atoms: tuple[str, ...]
    atom_terms: tuple[Term, ...]
    atom_index: dict[str, int] = field(repr=False)
    operators: tuple[GroundOperator, ...] = field(repr=False)
    init: frozenset[int] = frozenset()
    goal_pos: frozenset[int] = frozenset()
    goal_neg: frozenset[int] = frozenset()
    init_mask: int = 0
    goal_pos_mask: int = 0
    goal_neg_mask: int = 0

    @property
    def atom_count(self) -> int:
        return len(self.atoms)

    @property
    def operator_count(self) -> int:
        return len(self.operators)

    def atom_name(self, atom_id: int) -> str:
        return self.atoms[atom_id]


def _display_name(term: Term) -> str:
    return "(" + " ".join(term) + ")"


def _normalize_outcome_probabilities(probs: Sequence[float]) -> list[float]:
    """Check the distribution and rescale it so the plain sum is exactly 1.0."""
    total = sum(probs)
    if abs(total - 1.0) > PROBABILITY_TOLERANCE:
        raise ProbabilitySumError(
            f"outcome probabilities sum to {total!r}, off by more than {PROBABILITY_TOLERANCE}"
        )
    scaled = [p / total for p in probs]
    # Pin the last entry so sum(scaled) == 1.0 bit-exactly.
    scaled[-1] = 1.0 - sum(scaled[:-1])
    return scaled


def build_ground_problem(
    *,
    name: str,
    domain_name: str = "",
    atom_terms: Sequence[Term | str],
    operators: Sequence[tuple],
    init: Iterable[int],
    goal_pos: Iterable[int],
    goal_neg: Iterable[int] = (),
) -> GroundProblem:
    """Assemble a GroundProblem from id-level pieces, validating its invariants.

    Each operator is a tuple ``(name, pre_pos, pre_neg, cost, outcomes)`` with
    ``outcomes`` a sequence of ``(probability, add_ids, del_ids)``.  Outcome
    probabilities must sum to 1 within tolerance; they are renormalized to sum
    to exactly 1.  Raises EmptyGoal when both goal sets are empty.
    """
    terms: list[Term] = []
    for t in atom_terms:
        terms.append((t,) if isinstance(t, str) else tuple(t))
    names = tuple(_display_name(t) for t in terms)
    n = len(terms)
    atom_index = {nm: i for i, nm in enumerate(names)}
    if len(atom_index) != n:
        raise ValueError("duplicate atom terms in atom table")

    def check_ids(ids: Iterable[int]) -> frozenset[int]:
        s = frozenset(ids)
        for i in s:
            if not 0 <= i < n:
                raise ValueError(f"atom id {i} outside [0, {n})")
        return s

    ops: list[GroundOperator] = []
    for op_id, (op_name, pre_pos, pre_neg, cost, raw_outcomes) in enumerate(operators):
        pp = check_ids(pre_pos)
        pn = check_ids(pre_neg)
        if pp & pn:
            raise ValueError(f"operator {op_name!r}: contradictory precondition")
        if not raw_outcomes:
            raise ValueError(f"operator {op_name!r}: empty outcome list")
        if cost < 0:
            raise ValueError(f"operator {op_name!r}: negative cost")
        probs = _normalize_outcome_probabilities([float(p) for p, _, _ in raw_outcomes])
        outcomes = []
        for p, (_, add, dele) in zip(probs, raw_outcomes):
            add_s = check_ids(add)
            del_s = check_ids(dele)
            if add_s & del_s:
                raise ValueError(f"operator {op_name!r}: outcome adds and deletes the same atom")
            if not 0.0 < p <= 1.0:
                raise ProbabilitySumError(f"operator {op_name!r}: probability {p} outside (0, 1]")
            outcomes.append(Outcome(p, add_s, del_s, _mask(add_s), _mask(del_s)))
        ops.append(
            GroundOperator(
                id=op_id,
                name=op_name,
                pre_pos=pp,
                pre_neg=pn,
                cost=float(cost),
                outcomes=tuple(outcomes),
                pre_pos_mask=_mask(pp),
                pre_neg_mask=_mask(pn),
            )
        )

    init_s = check_ids(init)
    gp = check_ids(goal_pos)
    gn = check_ids(goal_neg)
    if not gp and not gn:
        raise EmptyGoal("goal has no literals")

    return GroundProblem(
        name=name,
        domain_name=domain_name,
        atoms=names,
        atom_terms=tuple(terms),
        atom_index=atom_index,
        operators=tuple(ops),
        init=init_s,
        goal_pos=gp,
        goal_neg=gn,
        init_mask=_mask(init_s),
        goal_pos_mask=_mask(gp),
        goal_neg_mask=_mask(gn),
    )


# ---------------------------------------------------------------------------
# Grounding of normalized schemas
# ---------------------------------------------------------------------------


def ground(domain, problem, *, blowup_limit: int = 10_000, prune: bool = True) -> GroundProblem:
    """Instantiate every normalized schema over the object table.

    Emits all type-consistent bindings, evaluates equality literals, resolves
    add/delete conflicts per outcome (add wins), prunes operators whose
    positive preconditions can never hold under delete-relaxed reachability
    from init, and assigns dense atom ids in first-seen order
    (init, goal, then operators).
    """
    from . import ppddl  # local import: ppddl has no dependency on this module
    from .normalize import normalize

    objects = ppddl.ObjectTable.from_asts(domain, problem)

    grounded: list[tuple[str, frozenset[Term], frozenset[Term], float, list]] = []
    for schema in domain.schemas:
        for flat in normalize(schema, objects, blowup_limit=blowup_limit):
            grounded.extend(_instantiate(flat, objects))

    goal_pos_terms, goal_neg_terms = ppddl.ground_goal(problem, objects)
    init_terms = list(dict.fromkeys(problem.init))

    if prune:
        grounded = _prune_unreachable(grounded, init_terms)

    # Dense atom ids in first-seen order: init, goal, then operator structure.
    index: dict[Term, int] = {}

    def see(term: Term) -> int:
        if term not in index:
            index[term] = len(index)
        return index[term]

    for t in init_terms:
        see(t)
    for t in list(goal_pos_terms) + list(goal_neg_terms):
        see(t)
    op_specs = []
    for op_name, pre_pos, pre_neg, cost, outcomes in grounded:
        pp = [see(t) for t in pre_pos]
        pn = [see(t) for t in pre_neg]
        ocs = []
        for prob, add, dele in outcomes:
            ocs.append((float(prob), [see(t) for t in add], [see(t) for t in dele]))
        op_specs.append((op_name, pp, pn, float(cost), ocs))

    terms_in_order = [t for t, _ in sorted(index.items(), key=lambda kv: kv[1])]
    return build_ground_problem(
        name=problem.name,
        domain_name=domain.name,
        atom_terms=terms_in_order,
        operators=op_specs,
        init=[index[t] for t in init_terms],
        goal_pos=[index[t] for t in goal_pos_terms],
        goal_neg=[index[t] for t in goal_neg_terms],
    )


def _instantiate(flat, objects):
    """Yield ground operator specs for all type-consistent bindings of a flat schema."""
    from .normalize import FlatSchema, Lit  # noqa: F401  (typing reference)

    param_names = [p for p, _ in flat.params]
    candidate_lists = [objects.objects_of(t) for _, t in flat.params]
    results = []
    for combo in product(*candidate_lists):
        binding = dict(zip(param_names, combo))
        ok = True
        pre_pos: dict[Term, None] = {}
        pre_neg: dict[Term, None] = {}
        for lit in flat.pre:
            if lit.pred == "=":
                a = binding.get(lit.args[0], lit.args[0])
                b = binding.get(lit.args[1], lit.args[1])
                if (a == b) == lit.negated:
                    ok = False
                    break
                continue
            term = (lit.pred,) + tuple(binding.get(a, a) for a in lit.args)
            (pre_neg if lit.negated else pre_pos)[term] = None
        if not ok:
            continue
        if set(pre_pos) & set(pre_neg):
            continue  # unsatisfiable instantiation
        outcomes: list = []
        seen: dict[tuple[frozenset[Term], frozenset[Term]], int] = {}
        for prob, add_atoms, del_atoms in flat.outcomes:
            add = {(lit[0],) + tuple(binding.get(a, a) for a in lit[1:]) for lit in add_atoms}
            dele = {(lit[0],) + tuple(binding.get(a, a) for a in lit[1:]) for lit in del_atoms}
            dele -= add  # simultaneous add and delete: add wins
            key = (frozenset(add), frozenset(dele))
            if key in seen:  # bindings can collapse lifted-distinct outcomes
                i = seen[key]
                outcomes[i] = (outcomes[i][0] + prob, key[0], key[1])
            else:
                seen[key] = len(outcomes)
                outcomes.append((prob, key[0], key[1]))
        name = "(" + " ".join([flat.name, *combo]) + ")" if combo else f"({flat.name})"
        results.append((name, frozenset(pre_pos), frozenset(pre_neg), flat.cost, outcomes))
    return results


def _prune_unreachable(grounded, init_terms):
    """Drop operators whose positive preconditions are delete-relaxed unreachable."""
    reachable: set[Term] = set(init_terms)
    remaining = list(range(len(grounded)))
    applied: set[int] = set()
    changed = True
    while changed:
        changed = False
        for i in remaining:
            if i in applied:
                continue
            _, pre_pos, _, _, outcomes = grounded[i]
            if pre_pos <= reachable:
                applied.add(i)
                for _, add, _ in outcomes:
                    if not add <= reachable:
                        reachable |= add
                        changed = True
                changed = True
    return [grounded[i] for i in sorted(applied)]
