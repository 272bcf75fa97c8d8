import random
import time

import pytest
from hypothesis import given, settings, strategies as st

from gdlog.analysis import choice_info
from gdlog.corpus import get_program
from gdlog.lang import parse_program
from gdlog.storage import (
    ChosenTable,
    Counters,
    Effect,
    FDViolation,
    Relation,
    StorageError,
    ThetaTable,
    _Heap,
    conflict,
    tuple_key,
)


def _info(src: str):
    return choice_info(parse_program(src).rules[0])

# FDs X -> Y and Y -> X over a two-column schema
PAIR = _info("p(X,Y) :- q(X,Y), choice((X),(Y)), choice((Y),(X)).")
# Prim-shaped: W = (X, Y, C), FDs Y -> X and Y -> C, unique key Y, cost C
LEAST = _info("p(X,Y,C) :- q(X,Y,C), choice((Y),(X)), choice_least((Y),(C)).")
MOST = _info("p(X,Y,C) :- q(X,Y,C), choice((Y),(X)), choice_most((Y),(C)).")
# TSP-shaped: unique key is the union (X, Y)
UNION = _info(
    "p(X,Y,C) :- q(X,Y,C), choice((X),(Y)), choice((Y),(X)), choice_least((Y),(C))."
)


# Relation --------------------------------------------------------------------


def test_relation_duplicate_insert():
    r = Relation("p", 2)
    assert r.insert(("a", "b")) is True
    assert r.insert(("a", "b")) is False
    assert len(r) == 1


def test_relation_index_lookup():
    r = Relation("p", 2)
    r.ensure_index((0,))
    r.insert(("a", "b"))
    r.insert(("a", "c"))
    r.insert(("d", "b"))
    assert sorted(r.lookup((0,), ("a",)), key=tuple_key) == [("a", "b"), ("a", "c")]
    assert r.lookup((0,), ("zzz",)) == []


def test_relation_arity_mismatch():
    r = Relation("p", 2)
    with pytest.raises(StorageError, match="arity"):
        r.insert(("a",))


def test_relation_insert_amortized_constant():
    # 10^6 random inserts must cost no more than 3x of 10 batches of 10^5
    rng = random.Random(0)
    big = [(rng.randrange(10**9), rng.randrange(10**9)) for _ in range(10**6)]

    r = Relation("p", 2)
    r.ensure_index((0,))
    t0 = time.perf_counter()
    for t in big:
        r.insert(t)
    t_big = time.perf_counter() - t0

    t_small = 0.0
    for b in range(10):
        r2 = Relation("p", 2)
        r2.ensure_index((0,))
        chunk = big[b * 10**5 : (b + 1) * 10**5]
        t0 = time.perf_counter()
        for t in chunk:
            r2.insert(t)
        t_small += time.perf_counter() - t0
    assert t_big <= 3 * t_small


# conflict --------------------------------------------------------------------


def test_conflict_fd_key_agreement():
    s = [("a", "c"), ("d", "b"), ("d", "e")]
    out = conflict(PAIR.fds, s, [("a", "b")])
    assert out == [("a", "c"), ("d", "b")]


def test_conflict_empty_against():
    assert conflict(PAIR.fds, [("a", "c")], []) == []


def test_conflict_tuple_conflicts_with_itself():
    assert conflict(PAIR.fds, [("a", "b")], [("a", "b")]) == [("a", "b")]


def test_conflict_against_chosen_table():
    chosen = ChosenTable(PAIR)
    chosen.insert(("a", "b"))
    assert conflict(PAIR.fds, [("a", "c"), ("x", "y")], chosen) == [("a", "c")]


@given(
    st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), max_size=20),
    st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), max_size=20),
)
def test_conflict_matches_bruteforce(s, against):
    got = conflict(PAIR.fds, s, against)
    brute = [
        t
        for t in s
        if any(t[0] == u[0] for u in against) or any(t[1] == u[1] for u in against)
    ]
    assert got == brute


# ChosenTable -----------------------------------------------------------------


def test_chosen_table_enforces_fds():
    c = ChosenTable(PAIR)
    c.insert(("a", "b"))
    c.insert(("a", "b"))  # duplicate is fine
    with pytest.raises(FDViolation):
        c.insert(("a", "c"))
    with pytest.raises(FDViolation):
        c.insert(("z", "b"))
    assert list(c) == [("a", "b")]


# ThetaTable ------------------------------------------------------------------


def test_theta_insert_replaces_worse_in_least_mode():
    th = ThetaTable(LEAST)
    assert th.insert(("x", "y", 5)) is Effect.ADDED
    assert th.insert(("x", "y", 3)) is Effect.REPLACED_WORSE
    assert th.insert(("x", "y", 3)) is Effect.REJECTED_DUPLICATE
    assert th.insert(("w", "y", 5)) is Effect.REJECTED_WORSE
    assert list(th) == [("x", "y", 3)]


def test_theta_insert_most_mode_dual():
    th = ThetaTable(MOST)
    th.insert(("x", "y", 3))
    assert th.insert(("x", "y", 5)) is Effect.REPLACED_WORSE
    assert list(th) == [("x", "y", 5)]


def test_theta_insert_pure_rule_accumulates():
    th = ThetaTable(PAIR)
    assert th.insert(("a", "b")) is Effect.ADDED
    assert th.insert(("a", "c")) is Effect.ADDED
    assert len(th) == 2


def test_select_extreme_least():
    th = ThetaTable(LEAST)
    th.insert(("a", "b", 1))
    th.insert(("a", "c", 3))
    assert th.select_extreme("least") == ("a", "b", 1)
    assert len(th) == 1  # removal included


def test_select_extreme_empty():
    assert ThetaTable(LEAST).select_extreme("least") is None


def test_select_extreme_tie_any_of_equal_cost():
    th = ThetaTable(UNION)
    th.insert(("a", "b", 1))
    th.insert(("c", "d", 1))
    assert th.select_extreme("least") in [("a", "b", 1), ("c", "d", 1)]


def test_purge_conflicting_shared_keys():
    th = ThetaTable(PAIR)
    th.insert(("a", "c"))
    th.insert(("b", "c"))
    assert th.purge_conflicting(("a", "c")) == 2  # X=a and Y=c both match
    assert len(th) == 0


def test_purge_conflicting_no_shared_keys():
    th = ThetaTable(PAIR)
    th.insert(("b", "d"))
    assert th.purge_conflicting(("a", "c")) == 0
    assert len(th) == 1


def test_purge_after_spanning_tree_choice():
    # candidates reachable from the source on the three-node triangle; after
    # choosing (a, b, 1), arcs into b die (FD left Y) and the rest survive
    th = ThetaTable(LEAST)  # W = (X, Y, C), FDs Y -> X and Y -> C
    th.insert(("a", "b", 1))
    th.insert(("a", "c", 3))
    delta = th.select_extreme("least")
    assert delta == ("a", "b", 1)
    assert th.purge_conflicting(delta) == 0
    th.insert(("c", "b", 2))  # would re-reach b
    assert th.purge_conflicting(delta) == 1
    assert list(th) == [("a", "c", 3)]


def test_pq_and_scan_agree_on_cost():
    # same insert sequence, with and without the heap: selected costs match
    rng = random.Random(7)
    seq = [(f"x{i}", f"y{rng.randrange(8)}", rng.randrange(20)) for i in range(64)]
    a = ThetaTable(UNION, use_pq=True)
    b = ThetaTable(UNION, use_pq=False)
    for t in seq:
        a.insert(t)
        b.insert(t)
    while len(a):
        ta, tb = a.select_extreme("least"), b.select_extreme("least")
        assert ta[2] == tb[2]
        assert ta == tb  # lexicographic tie-break makes them identical
    assert b.select_extreme("least") is None


@settings(max_examples=200)
@given(
    st.lists(
        st.tuples(st.integers(0, 9), st.integers(0, 9), st.integers(0, 30)),
        max_size=40,
    ),
    st.data(),
)
def test_heap_property_after_every_mutation(tuples, data):
    th = ThetaTable(UNION, use_pq=True)
    for t in tuples:
        th.insert(t)
        assert th.audit_heap()
    while len(th):
        op = data.draw(st.sampled_from(["select", "purge"]))
        if op == "select":
            th.select_extreme("least")
        else:
            victim = data.draw(st.sampled_from(sorted(th, key=tuple_key)))
            th.purge_conflicting(victim)
        assert th.audit_heap()


def test_heap_handle_deletion_is_logarithmic_shape():
    h = _Heap(Counters())
    items = [((i * 37) % 101, (i,)) for i in range(101)]
    for key, t in items:
        h.push((key, t), t)
    for key, t in sorted(items)[::3]:
        h.delete(t)
        assert h.audit()
    got = []
    while len(h):
        got.append(h.pop())
    keys = [((t[0]) * 37) % 101 for t in got]
    assert keys == sorted(keys)


def test_fifo_policy_returns_oldest():
    th = ThetaTable(PAIR, tie_policy="fifo")
    th.insert(("b", "x"))
    th.insert(("a", "y"))
    assert th.select_extreme("arbitrary") == ("b", "x")


def test_random_policy_is_seeded():
    picks = []
    for _ in range(2):
        th = ThetaTable(PAIR, tie_policy="random", rng=random.Random(42))
        for i in range(10):
            th.insert((f"x{i}", f"y{i}"))
        picks.append([th.select_extreme("arbitrary") for _ in range(10)])
    assert picks[0] == picks[1]


def test_cost_column_must_be_integer():
    th = ThetaTable(LEAST)
    with pytest.raises(StorageError, match="integer"):
        th.insert(("x", "y", "notacost"))
