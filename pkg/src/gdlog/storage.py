"""In-memory tuple storage: relations with hash indexes, the per-rule chosen
tables, and the theta candidate tables (hash-keyed, optionally heap-ordered
by cost).  Everything lives in main memory; tables are single-writer and
owned by one fixpoint run at a time.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .analysis import FD, ChoiceInfo, RuleKind
from .lang import Const, GdlogError

Tup = tuple  # fixed-arity tuple of constants


class StorageError(GdlogError):
    pass


class FDViolation(GdlogError):
    pass


def const_key(c: Const):
    """Total order over mixed int/symbol constants: integers first, then
    symbols lexicographically."""
    if isinstance(c, int):
        return (0, c)
    return (1, c)


def tuple_key(t: Tup):
    return tuple(const_key(c) for c in t)


def project(t: Tup, cols: tuple[int, ...]) -> Tup:
    return tuple(t[i] for i in cols)


@dataclass
class Counters:
    """Machine-independent operation counters.

    work is the master counter: one tick per elementary engine operation
    (join probe, table insert/delete, selection scan step, heap sift swap,
    conflict check, derived tuple).  The benchmark slope checks run on these
    counters; wall time is reported only informationally.
    """

    firings: int = 0
    derived: int = 0
    join_probes: int = 0
    theta_inserts: int = 0
    theta_deletes: int = 0
    pq_ops: int = 0
    conflict_checks: int = 0
    iterations: int = 0
    work: int = 0
    wall_time_s: float = 0.0

    def as_dict(self) -> dict[str, float]:
        return {
            "iterations": self.iterations,
            "firings": self.firings,
            "derived": self.derived,
            "join_probes": self.join_probes,
            "theta_inserts": self.theta_inserts,
            "theta_deletes": self.theta_deletes,
            "pq_ops": self.pq_ops,
            "conflict_checks": self.conflict_checks,
            "work": self.work,
            "wall_time_s": self.wall_time_s,
        }


# ---------------------------------------------------------------------------
# Relations


class Relation:
    """Set of same-arity tuples with insertion order and hash indexes.

    Insertion order is what makes differential evaluation cheap: a delta is
    just a suffix of the row list, addressed by position.
    """

    __slots__ = ("name", "arity", "rows", "_pos", "_indexes")

    def __init__(self, name: str, arity: int):
        self.name = name
        self.arity = arity
        self.rows: list[Tup] = []
        self._pos: dict[Tup, int] = {}
        self._indexes: dict[tuple[int, ...], dict[Tup, list[Tup]]] = {}

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[Tup]:
        return iter(self.rows)

    def __contains__(self, t: Tup) -> bool:
        return t in self._pos

    def insert(self, t: Tup) -> bool:
        """Add a tuple; False when it is a duplicate.  Amortized constant
        time, indexes included."""
        if len(t) != self.arity:
            raise StorageError(f"{self.name}: arity mismatch, expected {self.arity} got {len(t)}")
        if t in self._pos:
            return False
        self._pos[t] = len(self.rows)
        self.rows.append(t)
        for cols, index in self._indexes.items():
            index.setdefault(project(t, cols), []).append(t)
        return True

    def ensure_index(self, cols: tuple[int, ...]) -> None:
        if cols in self._indexes or not cols:
            return
        index: dict[Tup, list[Tup]] = {}
        for t in self.rows:
            index.setdefault(project(t, cols), []).append(t)
        self._indexes[cols] = index

    def lookup(self, cols: tuple[int, ...], key: Tup) -> list[Tup]:
        """Exactly the tuples matching key on the given columns."""
        return self._indexes[cols].get(key, _EMPTY)

    def rows_since(self, pos: int) -> list[Tup]:
        return self.rows[pos:]


_EMPTY: list = []


# ---------------------------------------------------------------------------
# Chosen tables


class ChosenTable:
    """Memo of the chosen_r tuples of one choice rule, with one hash index per
    FD left side.  The FDs hold at all times; a violating insert raises."""

    def __init__(self, info: ChoiceInfo):
        self.info = info
        self.rows: list[Tup] = []
        self._set: set[Tup] = set()
        # one index per FD left side; FD invariant means key -> single tuple
        self._fd_index: list[dict[Tup, Tup]] = [dict() for _ in info.fds]

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[Tup]:
        return iter(self.rows)

    def __contains__(self, t: Tup) -> bool:
        return t in self._set

    def fd_key(self, fd_idx: int, t: Tup) -> Tup:
        return project(t, self.info.fds[fd_idx].left)

    def conflicts(self, t: Tup) -> bool:
        """True when t agrees with some stored tuple on the left side of at
        least one FD (an equal tuple conflicts with its own keys)."""
        for i, index in enumerate(self._fd_index):
            if self.fd_key(i, t) in index:
                return True
        return False

    def insert(self, t: Tup) -> None:
        if t in self._set:
            return
        for i, fd in enumerate(self.info.fds):
            key = project(t, fd.left)
            other = self._fd_index[i].get(key)
            if other is not None and project(other, fd.right) != project(t, fd.right):
                raise FDViolation(
                    f"{self.info.chosen_pred}: FD {fd.left}->{fd.right} violated by {t} against {other}"
                )
        for i, fd in enumerate(self.info.fds):
            self._fd_index[i][project(t, fd.left)] = t
        self._set.add(t)
        self.rows.append(t)


def conflict(fds: Iterable[FD], s: Iterable[Tup], against, counters: Counters | None = None) -> list[Tup]:
    """Tuples of s agreeing with some tuple of `against` on the left side of
    at least one FD.  `against` may be a ChosenTable (whose own FD indexes
    make each check constant time) or any iterable of tuples over the same
    schema."""
    if isinstance(against, ChosenTable):
        out = []
        for t in s:
            if counters is not None:
                counters.conflict_checks += 1
                counters.work += 1
            if against.conflicts(t):
                out.append(t)
        return out
    fds = tuple(fds)
    rows = list(against)
    keysets = [{project(t, fd.left) for t in rows} for fd in fds]
    out = []
    for t in s:
        if counters is not None:
            counters.conflict_checks += 1
            counters.work += 1
        if any(project(t, fd.left) in keysets[i] for i, fd in enumerate(fds)):
            out.append(t)
    return out


# ---------------------------------------------------------------------------
# Binary heap with handle-based interior deletion


class _Heap:
    """Min-heap over (key, tuple) pairs; each stored tuple keeps its heap
    position so conflicting candidates can be deleted from the middle in
    O(log m).  Sift swaps are counted as priority-queue operations."""

    __slots__ = ("items", "pos", "counters")

    def __init__(self, counters: Counters):
        self.items: list[tuple[object, Tup]] = []
        self.pos: dict[Tup, int] = {}
        self.counters = counters

    def __len__(self):
        return len(self.items)

    def push(self, key, t: Tup) -> None:
        self.items.append((key, t))
        self.pos[t] = len(self.items) - 1
        self.counters.pq_ops += 1
        self.counters.work += 1
        self._sift_up(len(self.items) - 1)

    def peek(self) -> Tup:
        return self.items[0][1]

    def pop(self) -> Tup:
        t = self.items[0][1]
        self.delete(t)
        return t

    def delete(self, t: Tup) -> None:
        i = self.pos.pop(t)
        self.counters.pq_ops += 1
        self.counters.work += 1
        last = self.items.pop()
        if i < len(self.items):
            self.items[i] = last
            self.pos[last[1]] = i
            i = self._sift_up(i)
            self._sift_down(i)

    def _swap(self, i: int, j: int) -> None:
        self.items[i], self.items[j] = self.items[j], self.items[i]
        self.pos[self.items[i][1]] = i
        self.pos[self.items[j][1]] = j
        self.counters.pq_ops += 1
        self.counters.work += 1

    def _sift_up(self, i: int) -> int:
        while i > 0:
            parent = (i - 1) // 2
            if self.items[i][0] < self.items[parent][0]:
                self._swap(i, parent)
                i = parent
            else:
                break
        return i

    def _sift_down(self, i: int) -> None:
        n = len(self.items)
        while True:
            left = 2 * i + 1
            right = left + 1
            smallest = i
            if left < n and self.items[left][0] < self.items[smallest][0]:
                smallest = left
            if right < n and self.items[right][0] < self.items[smallest][0]:
                smallest = right
            if smallest == i:
                return
            self._swap(i, smallest)
            i = smallest

    def audit(self) -> bool:
        """Structural check: every element's key is >= its parent's."""
        for i in range(1, len(self.items)):
            if self.items[i][0] < self.items[(i - 1) // 2][0]:
                return False
        return all(self.items[p][1] == t for t, p in self.pos.items())


# ---------------------------------------------------------------------------
# Theta tables


class Effect(enum.Enum):
    ADDED = "added"
    REPLACED_WORSE = "replaced-worse"
    REJECTED_WORSE = "rejected-worse"
    REJECTED_DUPLICATE = "rejected-duplicate"


class ThetaTable:
    """Future candidates for one choice rule.

    Hash-keyed on every FD left side; for choice-least/most rules the union
    of the FD left sides is a unique key and only the best-cost tuple per key
    value is retained.  With the priority queue enabled, selection of the
    extreme tuple is O(log m) instead of a linear scan.

    tie_policy governs selection among pure-choice candidates (and is baked
    into the heap key for cost ties):
      lex    deterministic, lexicographically least tuple (linear for pure)
      fifo   oldest surviving candidate, constant time
      random seeded uniform choice, constant time
    """

    def __init__(
        self,
        info: ChoiceInfo,
        counters: Counters | None = None,
        use_pq: bool = False,
        tie_policy: str = "lex",
        rng: random.Random | None = None,
        treat_as_pure: bool = False,
    ):
        self.info = info
        self.counters = counters if counters is not None else Counters()
        self.tie_policy = tie_policy
        self.rng = rng if rng is not None else random.Random(0)
        # treat_as_pure drops cost-based retention and selection: the plain
        # choice fixpoint reads least/most goals as ordinary choice goals
        self.greedy = info.cost_pos is not None and not treat_as_pure
        self._entries: dict[Tup, int] = {}  # tuple -> insertion sequence
        self._seq = 0
        self._fd_index: list[dict[Tup, set[Tup]]] = [dict() for _ in info.fds]
        self._ukey_index: dict[Tup, Tup] = {}
        self._heap: Optional[_Heap] = _Heap(self.counters) if (use_pq and self.greedy) else None
        self._rand_list: list[Tup] = []
        self._rand_pos: dict[Tup, int] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[Tup]:
        return iter(self._entries)

    def __contains__(self, t: Tup) -> bool:
        return t in self._entries

    # -- cost / ordering ----------------------------------------------------

    def cost_of(self, t: Tup) -> int:
        c = t[self.info.cost_pos]
        if not isinstance(c, int):
            raise StorageError(
                f"{self.info.chosen_pred}: cost argument must be an integer, got {c!r}"
            )
        return c

    def _order_key(self, t: Tup):
        # heap/selection key: extreme cost first, then lexicographic tuple
        # order so equal-cost ties break deterministically
        c = self.cost_of(t)
        if self.info.kind is RuleKind.CHOICE_MOST:
            c = -c
        return (c, tuple_key(t))

    def better(self, a: Tup, b: Tup) -> bool:
        """True when a wins over b under this rule's cost sense."""
        return self._order_key(a) < self._order_key(b)

    # -- mutation -----------------------------------------------------------

    def insert(self, t: Tup) -> Effect:
        """Add a candidate; the caller has already filtered tuples conflicting
        with the chosen table.  Restores the unique-key invariant for greedy
        rules, retaining only the better-cost tuple per key value."""
        self.counters.theta_inserts += 1
        self.counters.work += 1
        if self.greedy:
            self.cost_of(t)  # surface non-integer costs at insertion time
        if t in self._entries:
            return Effect.REJECTED_DUPLICATE
        if self.greedy and self.info.unique_key is not None:
            key = project(t, self.info.unique_key)
            cur = self._ukey_index.get(key)
            if cur is not None:
                if self.better(t, cur):
                    self._remove(cur)
                    self._add(t)
                    return Effect.REPLACED_WORSE
                return Effect.REJECTED_WORSE
        self._add(t)
        return Effect.ADDED

    def _add(self, t: Tup) -> None:
        self._entries[t] = self._seq
        self._seq += 1
        for i, fd in enumerate(self.info.fds):
            self._fd_index[i].setdefault(project(t, fd.left), set()).add(t)
        if self.greedy and self.info.unique_key is not None:
            self._ukey_index[project(t, self.info.unique_key)] = t
        if self._heap is not None:
            self._heap.push(self._order_key(t), t)
        if self.tie_policy == "random" and not self.greedy:
            self._rand_pos[t] = len(self._rand_list)
            self._rand_list.append(t)

    def _remove(self, t: Tup) -> None:
        del self._entries[t]
        self.counters.theta_deletes += 1
        self.counters.work += 1
        for i, fd in enumerate(self.info.fds):
            key = project(t, fd.left)
            bucket = self._fd_index[i][key]
            bucket.discard(t)
            if not bucket:
                del self._fd_index[i][key]
        if self.greedy and self.info.unique_key is not None:
            key = project(t, self.info.unique_key)
            if self._ukey_index.get(key) == t:
                del self._ukey_index[key]
        if self._heap is not None:
            self._heap.delete(t)
        if self.tie_policy == "random" and not self.greedy:
            i = self._rand_pos.pop(t)
            last = self._rand_list.pop()
            if last != t:
                self._rand_list[i] = last
                self._rand_pos[last] = i

    # -- selection ----------------------------------------------------------

    def select_extreme(self, mode: str = "auto") -> Optional[Tup]:
        """Remove and return the minimal (least) / maximal (most) cost tuple,
        or an arbitrary one; None when the table is empty.

        mode "auto" resolves to this rule's kind.  With the priority queue the
        extreme selection costs O(log m); without it, a linear scan.
        """
        if mode not in ("auto", "least", "most", "arbitrary"):
            raise StorageError(f"unknown selection mode {mode!r}")
        if not self._entries:
            return None
        if mode == "auto":
            mode = "arbitrary" if not self.greedy else (
                "least" if self.info.kind is RuleKind.CHOICE_LEAST else "most"
            )
        if mode in ("least", "most"):
            if self.info.cost_pos is None:
                raise StorageError(f"{self.info.chosen_pred}: rule has no cost column")
            if self._heap is not None:
                t = self._heap.peek()
                self._remove(t)
                return t
            best = None
            best_key = None
            for t in self._entries:
                self.counters.work += 1
                k = self._order_key(t)
                if best_key is None or k < best_key:
                    best, best_key = t, k
            self._remove(best)
            return best
        # arbitrary (pure choice)
        if self.tie_policy == "fifo":
            t = next(iter(self._entries))
        elif self.tie_policy == "random":
            t = self._rand_list[self.rng.randrange(len(self._rand_list))]
        else:  # lex
            t = None
            best_key = None
            for cand in self._entries:
                self.counters.work += 1
                k = tuple_key(cand)
                if best_key is None or k < best_key:
                    t, best_key = cand, k
        self._remove(t)
        return t

    def purge_conflicting(self, delta: Tup) -> int:
        """Drop every candidate agreeing with delta on the left side of some
        FD; each removal is constant time through the FD indexes (plus heap
        maintenance)."""
        removed = 0
        for i, fd in enumerate(self.info.fds):
            key = project(delta, fd.left)
            bucket = self._fd_index[i].get(key)
            while bucket:
                t = next(iter(bucket))
                self._remove(t)
                removed += 1
                bucket = self._fd_index[i].get(key)
        return removed

    def conflicts_with(self, delta: Tup, t: Tup) -> bool:
        self.counters.conflict_checks += 1
        self.counters.work += 1
        return any(
            project(t, fd.left) == project(delta, fd.left) for fd in self.info.fds
        )

    def audit_heap(self) -> bool:
        return self._heap is None or self._heap.audit()
