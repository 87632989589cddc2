"""Interned state representation and the system-wide state table.

A state is the set of ground atoms that hold, stored as a fixed-width bitset
(a Python int) over the problem's atom table.  The store interns each
distinct state once and hands out a small integer reference; every other
table in the planner (value entries, heuristic memos, search bookkeeping)
keys its data by that reference, so one state never has two copies.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

if TYPE_CHECKING:
    from random import Random

    from .grounding import GroundProblem

DEFAULT_SIZE_HINT = 49_999
_MAX_LOAD = 0.75


def state_from_atoms(ids: Iterable[int]) -> int:
    """Pack atom ids into a bitset mask."""
    m = 0
    for i in ids:
        m |= 1 << i
    return m


def state_atoms(mask: int) -> tuple[int, ...]:
    """Unpack a bitset mask into the strictly increasing atom-id sequence."""
    ids = []
    i = 0
    while mask:
        if mask & 1:
            ids.append(i)
        mask >>= 1
        i += 1
    return tuple(ids)


def hash64(mask: int, atom_count: int) -> int:
    """64-bit high-diffusion hash of a state.

    Hashes the fixed-width bitset encoding of the sorted atom-id sequence
    with BLAKE2b, which gives cryptographic-quality avalanche behaviour at a
    fraction of the cost of the classic MD-family digests.
    """
    nbytes = (atom_count + 7) // 8 or 1
    digest = hashlib.blake2b(mask.to_bytes(nbytes, "little"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def next_prime(n: int) -> int:
    """Smallest prime >= n."""
    c = max(2, n)
    while not _is_prime(c):
        c += 1
    return c


@dataclass(frozen=True)
class BucketStats:
    """Collision census of the store's bucket array."""

    entries: int
    capacity: int
    used_buckets: int
    max_chain: int

    @property
    def mean_chain(self) -> float:
        return self.entries / self.used_buckets if self.used_buckets else 0.0


class StateStore:
    """System-wide interning table with prime-sized bucket array.

    Buckets chain colliding entries; when the load factor passes 0.75 the
    table grows to the next prime at least twice its size and rehashes.
    References returned by intern() stay valid for the store's lifetime.
    """

    def __init__(self, atom_count: int, size_hint: int = DEFAULT_SIZE_HINT):
        self.atom_count = atom_count
        self._nbytes = (atom_count + 7) // 8 or 1
        self.capacity = next_prime(size_hint)
        self._buckets: list[list[int] | None] = [None] * self.capacity
        self._masks: list[int] = []
        self._hashes: list[int] = []

    def __len__(self) -> int:
        return len(self._masks)

    def intern(self, mask: int) -> int:
        """Return the reference for the state, storing it on first sight."""
        if mask < 0 or mask >> self.atom_count:
            raise ValueError("state mask has bits outside the atom table")
        h = int.from_bytes(
            hashlib.blake2b(mask.to_bytes(self._nbytes, "little"), digest_size=8).digest(),
            "little",
        )
        bucket = self._buckets[h % self.capacity]
        if bucket is not None:
            masks = self._masks
            hashes = self._hashes
            for ref in bucket:
                if hashes[ref] == h and masks[ref] == mask:
                    return ref
        ref = len(self._masks)
        self._masks.append(mask)
        self._hashes.append(h)
        if bucket is None:
            self._buckets[h % self.capacity] = [ref]
        else:
            bucket.append(ref)
        if len(self._masks) > _MAX_LOAD * self.capacity:
            self._grow()
        return ref

    def intern_atoms(self, ids: Iterable[int]) -> int:
        return self.intern(state_from_atoms(ids))

    def mask(self, ref: int) -> int:
        return self._masks[ref]

    def atoms(self, ref: int) -> tuple[int, ...]:
        return state_atoms(self._masks[ref])

    def __contains__(self, mask: int) -> bool:
        h = hash64(mask, self.atom_count)
        bucket = self._buckets[h % self.capacity]
        if not bucket:
            return False
        return any(self._hashes[r] == h and self._masks[r] == mask for r in bucket)

    def _grow(self) -> None:
        self.capacity = next_prime(2 * self.capacity)
        buckets: list[list[int] | None] = [None] * self.capacity
        for ref, h in enumerate(self._hashes):
            b = buckets[h % self.capacity]
            if b is None:
                buckets[h % self.capacity] = [ref]
            else:
                b.append(ref)
        self._buckets = buckets

    def bucket_stats(self) -> BucketStats:
        used = 0
        longest = 0
        for b in self._buckets:
            if b:
                used += 1
                if len(b) > longest:
                    longest = len(b)
        return BucketStats(entries=len(self._masks), capacity=self.capacity,
                           used_buckets=used, max_chain=longest)


# ---------------------------------------------------------------------------
# Transition structure over ground problems
# ---------------------------------------------------------------------------


def is_goal(problem: GroundProblem, mask: int) -> bool:
    return (mask & problem.goal_pos_mask) == problem.goal_pos_mask and not (
        mask & problem.goal_neg_mask
    )


def applicable(problem: GroundProblem, mask: int) -> list[int]:
    """Ids of operators whose precondition holds at the state, ascending."""
    out = []
    for op in problem.operators:
        if (mask & op.pre_pos_mask) == op.pre_pos_mask and not (mask & op.pre_neg_mask):
            out.append(op.id)
    return out


def apply_outcome(mask: int, outcome) -> int:
    return (mask & ~outcome.del_mask) | outcome.add_mask


def successors(
    problem: GroundProblem, store: StateStore, mask: int, op_id: int
) -> list[tuple[float, int]]:
    """Successor distribution of (state, operator) with equal states merged."""
    merged: dict[int, float] = {}
    for oc in problem.operators[op_id].outcomes:
        ref = store.intern(apply_outcome(mask, oc))
        merged[ref] = merged.get(ref, 0.0) + oc.probability
    return [(p, ref) for ref, p in merged.items()]


def sample_outcome(
    problem: GroundProblem, store: StateStore, mask: int, op_id: int, rng: Random
) -> int:
    """Sample a successor by inverse CDF over the outcome list in declaration order."""
    r = rng.random()
    acc = 0.0
    outcomes = problem.operators[op_id].outcomes
    for oc in outcomes:
        acc += oc.probability
        if r < acc:
            return store.intern(apply_outcome(mask, oc))
    return store.intern(apply_outcome(mask, outcomes[-1]))
