"""Ground-level semantics oracle.

Everything here is deliberately independent of the optimized engine: a naive
grounder over the rewritten program, a stable-model checker built on the
reduct, an exhaustive enumerator of choice models, and textbook graph
algorithms used to cross-validate engine output.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, Optional

from .analysis import ChoiceInfo, FoeProgram, VectorNeq, foe_transform
from .lang import MAX_INT, MIN_INT, Atom, Comparison, GdlogError, PlusBinding, Program, Var

Tup = tuple
GAtom = tuple[str, Tup]  # (predicate, argument tuple)


class GroundingError(GdlogError):
    pass


class EnumerationError(GdlogError):
    def __init__(self, message: str, models=None):
        super().__init__(message)
        self.models = models or []


@dataclass
class GroundRule:
    head: GAtom
    pos: tuple[GAtom, ...]
    neg: tuple[GAtom, ...]


@dataclass
class GroundProgram:
    rules: list[GroundRule]  # rewritten + chosen + diffchoice instances
    facts: list[GAtom]
    chosen_instances: dict[str, list[tuple[Tup, tuple[GAtom, ...]]]]  # rule_id -> (W, body)
    infos: dict[str, ChoiceInfo]
    base: set[GAtom]  # relevant Herbrand base (positive closure)

    def candidate_count(self) -> int:
        return sum(
            len({w for w, _ in insts}) for insts in self.chosen_instances.values()
        )


# ---------------------------------------------------------------------------
# Naive matching over plain atom stores (insertion-ordered for determinism)


def _eval_builtin(goal, env) -> bool:
    def val(t):
        return env[t] if isinstance(t, Var) else t

    if isinstance(goal, Comparison):
        a, b = val(goal.left), val(goal.right)
        if goal.op == "\\=":
            return a != b
        if not (isinstance(a, int) and isinstance(b, int)):
            raise GroundingError(f"order comparison over non-integers {a!r} {goal.op} {b!r}")
        return {"<": a < b, "=<": a <= b, ">": a > b, ">=": a >= b}[goal.op]
    if isinstance(goal, VectorNeq):
        return any(val(x) != val(y) for x, y in goal.pairs)
    raise AssertionError(goal)


def _all_matches(goals, store: dict[str, dict[Tup, None]], budget: list[int] | None = None):
    """Every binding of the positive goals; builtins filter, PlusBinding
    extends the binding.  The optional budget caps the total number of row
    probes so divergent groundings fail fast instead of grinding."""

    def step(i: int, env: dict):
        if i == len(goals):
            yield dict(env)
            return
        g = goals[i]
        if isinstance(g, Atom):
            for t in list(store.get(g.pred, ())):
                if budget is not None:
                    budget[0] -= 1
                    if budget[0] < 0:
                        raise GroundingError("grounding work budget exceeded")
                added = []
                ok = True
                for pos, a in enumerate(g.args):
                    if isinstance(a, Var):
                        if a in env:
                            if env[a] != t[pos]:
                                ok = False
                                break
                        else:
                            env[a] = t[pos]
                            added.append(a)
                    elif a != t[pos]:
                        ok = False
                        break
                if ok:
                    yield from step(i + 1, env)
                for a in added:
                    del env[a]
        elif isinstance(g, PlusBinding):
            a = env[g.left] if isinstance(g.left, Var) else g.left
            b = env[g.right] if isinstance(g.right, Var) else g.right
            if not (isinstance(a, int) and isinstance(b, int)):
                raise GroundingError("arithmetic over non-integers")
            c = a + b
            if not (MIN_INT <= c <= MAX_INT):
                raise GroundingError(f"arithmetic overflow computing {a} + {b}")
            env[g.out] = c
            yield from step(i + 1, env)
            del env[g.out]
        else:
            if _eval_builtin(g, env):
                yield from step(i + 1, env)

    yield from step(0, {})


def _subst_atom(a: Atom, env) -> GAtom:
    return (a.pred, tuple(env[t] if isinstance(t, Var) else t for t in a.args))


# ---------------------------------------------------------------------------
# Grounding


def ground(
    foe: FoeProgram,
    edb: dict[str, Iterable[Tup]] | None = None,
    *,
    max_instances: int = 10**6,
    max_atoms: int = 100_000,
    max_probes: int = 5_000_000,
) -> GroundProgram:
    """Instantiate the rewritten program over its active domain.

    Positive bodies are closed ignoring negation (a superset of every stable
    model), so every relevant instance is produced.  diffchoice rules, which
    are not range restricted, are instantiated only over pairs of derivable
    chosen candidates; that preserves the stable models over the relevant
    base.  Exceeding either cap raises with the offending size; programs that
    accumulate costs around a directed cycle have no finite grounding at all
    and trip the atom cap.
    """
    store: dict[str, dict[Tup, None]] = {}
    n_atoms = 0
    facts: list[GAtom] = []
    for f in foe.facts:
        store.setdefault(f.pred, {})[f.args] = None
        facts.append((f.pred, f.args))
    if edb:
        for pred, rows in edb.items():
            for t in rows:
                t = tuple(t)
                if t not in store.setdefault(pred, {}):
                    store[pred][t] = None
                    facts.append((pred, t))
    n_atoms = sum(len(b) for b in store.values())

    deriving = list(foe.rewritten) + list(foe.chosen)
    instances: dict[tuple, GroundRule] = {}
    chosen_instances: dict[str, list[tuple[Tup, tuple[GAtom, ...]]]] = {
        rid: [] for rid in foe.infos
    }
    body_preds = [
        tuple({g.pred for g in rule.pos_body if isinstance(g, Atom)}) for rule in deriving
    ]
    last_sizes: list[dict[str, int] | None] = [None] * len(deriving)
    budget = [max_probes]

    changed = True
    while changed:
        changed = False
        for ri, rule in enumerate(deriving):
            sizes = {p: len(store.get(p, ())) for p in body_preds[ri]}
            if last_sizes[ri] == sizes:
                continue
            last_sizes[ri] = sizes
            pos_atoms = [g for g in rule.pos_body if isinstance(g, Atom)]
            for env in _all_matches(rule.pos_body, store, budget):
                head = _subst_atom(rule.head, env)
                pos = tuple(_subst_atom(a, env) for a in pos_atoms)
                neg = tuple(_subst_atom(a, env) for a in rule.neg_body)
                key = (ri, head, pos)
                if key in instances:
                    continue
                if len(instances) >= max_instances:
                    raise GroundingError(
                        f"grounding exceeds the cap of {max_instances} instances"
                    )
                instances[key] = GroundRule(head, pos, neg)
                if rule.neg_body:  # a chosen rule: record the candidate
                    chosen_instances[rule.origin].append((head[1], pos))
                bucket = store.setdefault(head[0], {})
                if head[1] not in bucket:
                    bucket[head[1]] = None
                    n_atoms += 1
                    if n_atoms > max_atoms:
                        raise GroundingError(
                            f"grounding exceeds the cap of {max_atoms} ground atoms"
                        )
                    changed = True

    rules = list(instances.values())

    # diffchoice over candidate pairs: diffchoice_r(w) <- chosen_r(w') when w
    # and w' agree on some FD's left side and differ on its right side
    base: set[GAtom] = {(p, t) for p, ts in store.items() for t in ts}
    for rid, info in foe.infos.items():
        cands = list(dict.fromkeys(w for w, _ in chosen_instances[rid]))
        for fd in info.fds:
            for w in cands:
                for w2 in cands:
                    if w is w2 or tuple(w[i] for i in fd.left) != tuple(w2[i] for i in fd.left):
                        continue
                    if tuple(w[i] for i in fd.right) == tuple(w2[i] for i in fd.right):
                        continue
                    if len(rules) >= max_instances:
                        raise GroundingError(
                            f"grounding exceeds the cap of {max_instances} instances"
                        )
                    head = (info.diffchoice_pred, w)
                    rules.append(GroundRule(head, ((info.chosen_pred, w2),), ()))
                    base.add(head)

    for f in facts:
        rules.append(GroundRule(f, (), ()))
    return GroundProgram(rules, facts, chosen_instances, dict(foe.infos), base)


# ---------------------------------------------------------------------------
# Stable-model checking


@dataclass
class StableCheckResult:
    is_model: bool
    is_stable: bool
    witness: Optional[frozenset[GAtom]]  # minimum model of the reduct, when it differs


def complete_with_diffchoice(g: GroundProgram, m: Iterable[GAtom]) -> set[GAtom]:
    """Close a model candidate under the diffchoice rules; the engine never
    materializes the bookkeeping atoms, the declarative reading needs them."""
    out = set(m)
    for r in g.rules:
        if r.head[0].startswith("diffchoice_") and not r.neg:
            if all(p in out for p in r.pos):
                out.add(r.head)
    return out


def check_stable_model(g: GroundProgram, m: Iterable[GAtom], *, complete_diffchoice: bool = True) -> StableCheckResult:
    """Is m a stable model: build the reduct (drop rules whose negated goal is
    in m, strip negation from the rest), take its minimum model, compare."""
    m_set = set(m)
    if complete_diffchoice:
        m_set = complete_with_diffchoice(g, m_set)

    is_model = True
    for r in g.rules:
        if all(p in m_set for p in r.pos) and not any(q in m_set for q in r.neg):
            if r.head not in m_set:
                is_model = False
                break

    reduct = [(r.head, r.pos) for r in g.rules if not any(q in m_set for q in r.neg)]
    lm = _least_model(reduct)
    is_stable = is_model and lm == m_set
    witness = None if is_stable else frozenset(lm)
    return StableCheckResult(is_model, is_stable, witness)


def _least_model(positive_rules: list[tuple[GAtom, tuple[GAtom, ...]]]) -> set[GAtom]:
    lm: set[GAtom] = set()
    changed = True
    while changed:
        changed = False
        for head, pos in positive_rules:
            if head not in lm and all(p in lm for p in pos):
                lm.add(head)
                changed = True
    return lm


def audit_stable_model(g: GroundProgram, m: Iterable[GAtom], *, complete_diffchoice: bool = True) -> bool:
    """Second, independently structured check: every ground rule must be true
    in m, and every atom of m must be derivable inside the reduct (queue-based
    propagation rather than round iteration)."""
    m_set = set(m)
    if complete_diffchoice:
        m_set = complete_with_diffchoice(g, m_set)

    for r in g.rules:
        body_true = all(p in m_set for p in r.pos) and not any(q in m_set for q in r.neg)
        if body_true and r.head not in m_set:
            return False

    # derivability in the reduct, by counting unsatisfied positive goals
    waiting: dict[GAtom, list[int]] = {}
    remaining: list[int] = []
    heads: list[GAtom] = []
    queue: list[GAtom] = []
    derived: set[GAtom] = set()
    idx = 0
    for r in g.rules:
        if any(q in m_set for q in r.neg):
            continue
        heads.append(r.head)
        remaining.append(len(r.pos))
        if not r.pos:
            queue.append(r.head)
        for p in r.pos:
            waiting.setdefault(p, []).append(idx)
        idx += 1
    qi = 0
    seenq: set[GAtom] = set(queue)
    while qi < len(queue):
        a = queue[qi]
        qi += 1
        if a in derived:
            continue
        derived.add(a)
        for ri in waiting.get(a, ()):  # a rule may wait on the same atom twice
            remaining[ri] -= 1
            if remaining[ri] <= 0 and heads[ri] not in seenq:
                queue.append(heads[ri])
                seenq.add(heads[ri])
    return m_set <= derived


# ---------------------------------------------------------------------------
# Exhaustive enumeration of choice models


def enumerate_choice_models(
    program: Program,
    edb: dict[str, Iterable[Tup]] | None = None,
    cap: int = 1024,
    *,
    candidate_cap: int = 20,
    max_instances: int = 10**6,
) -> list[dict[str, frozenset]]:
    """All choice models of the program over the given facts.

    Explores maximal FD-respecting choice sequences (mirroring the
    one-at-a-time fixpoint computation, which reaches every choice model),
    closes each, keeps the distinct end states that pass the stable-model
    check, and strips the diffchoice bookkeeping.  Exponential in the number
    of ground chosen candidates, hence the candidate_cap; more than cap
    models raises EnumerationError with the models found so far.
    """
    foe = foe_transform(program)
    g = ground(foe, edb, max_instances=max_instances)
    n_cands = g.candidate_count()
    if n_cands > candidate_cap:
        raise EnumerationError(
            f"{n_cands} ground chosen candidates exceed the enumeration cap of {candidate_cap}"
        )

    positive = [
        (r.head, r.pos) for r in g.rules if not r.neg and not r.head[0].startswith("diffchoice_")
    ]
    cand_instances = [
        (rid, w, pos) for rid, insts in g.chosen_instances.items() for (w, pos) in insts
    ]
    infos = g.infos

    def closure(chosen_atoms: frozenset[GAtom]) -> frozenset[GAtom]:
        rules = positive + [(a, ()) for a in chosen_atoms]
        return frozenset(_least_model(rules))

    def fd_ok(rid: str, w: Tup, chosen_by_rule: dict[str, frozenset[Tup]]) -> bool:
        info = infos[rid]
        for fd in info.fds:
            wl = tuple(w[i] for i in fd.left)
            wr = tuple(w[i] for i in fd.right)
            for u in chosen_by_rule.get(rid, ()):  # FDs are per-rule
                if tuple(u[i] for i in fd.left) == wl and tuple(u[i] for i in fd.right) != wr:
                    return False
        return True

    models: dict[frozenset[GAtom], dict[str, frozenset]] = {}
    visited: set[frozenset[tuple[str, Tup]]] = set()

    def explore(chosen: frozenset[tuple[str, Tup]]):
        if chosen in visited:
            return
        visited.add(chosen)
        chosen_atoms = frozenset((infos[rid].chosen_pred, w) for rid, w in chosen)
        interp = closure(chosen_atoms)
        by_rule: dict[str, frozenset[Tup]] = {}
        for rid, w in chosen:
            by_rule[rid] = by_rule.get(rid, frozenset()) | {w}
        theta = []
        seen = set()
        for rid, w, pos in cand_instances:
            if (rid, w) in seen or (rid, w) in chosen:
                continue
            if not all(p in interp for p in pos):
                continue
            if w in by_rule.get(rid, ()):
                continue
            if fd_ok(rid, w, by_rule):
                seen.add((rid, w))
                theta.append((rid, w))
        if not theta:
            if interp not in models:
                res = check_stable_model(g, interp)
                if res.is_stable:
                    if len(models) >= cap:
                        raise EnumerationError(
                            f"more than {cap} choice models", list(models.values())
                        )
                    grouped: dict[str, set[Tup]] = {}
                    for pred, t in interp:
                        if not pred.startswith("diffchoice_"):
                            grouped.setdefault(pred, set()).add(t)
                    models[interp] = {p: frozenset(ts) for p, ts in grouped.items()}
            return
        for rid, w in theta:
            explore(chosen | {(rid, w)})

    explore(frozenset())
    return list(models.values())


# ---------------------------------------------------------------------------
# Reference graph algorithms (classical implementations used as oracles)


def ref_dijkstra(arcs: Iterable[tuple], src) -> dict:
    adj: dict = {}
    for u, v, c in arcs:
        adj.setdefault(u, []).append((v, c))
    dist = {src: 0}
    heap = [(0, 0, src)]
    tiebreak = 0
    while heap:
        d, _, u = heapq.heappop(heap)
        if d > dist.get(u, float("inf")):
            continue
        for v, c in adj.get(u, ()):
            nd = d + c
            if nd < dist.get(v, float("inf")):
                dist[v] = nd
                tiebreak += 1
                heapq.heappush(heap, (nd, tiebreak, v))
    return dist


def ref_mst_weight(edges: Iterable[tuple]) -> Optional[int]:
    """Kruskal; None when the edge set does not span a single component."""
    edges = list(edges)
    nodes = {u for u, _, _ in edges} | {v for _, v, _ in edges}
    parent = {n: n for n in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    total = 0
    used = 0
    for u, v, c in sorted(edges, key=lambda e: e[2]):
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            total += c
            used += 1
    if nodes and used != len(nodes) - 1:
        return None
    return total


def ref_prim_weight(edges: Iterable[tuple], start=None) -> Optional[int]:
    """Heap-based Prim over an undirected edge list; independent of Kruskal."""
    adj: dict = {}
    for u, v, c in edges:
        adj.setdefault(u, []).append((c, v))
        adj.setdefault(v, []).append((c, u))
    if not adj:
        return 0
    if start is None:
        start = next(iter(sorted(adj)))
    seen = {start}
    heap = list(adj[start])
    heapq.heapify(heap)
    total = 0
    while heap and len(seen) < len(adj):
        c, v = heapq.heappop(heap)
        if v in seen:
            continue
        seen.add(v)
        total += c
        for e in adj[v]:
            if e[1] not in seen:
                heapq.heappush(heap, e)
    if len(seen) != len(adj):
        return None
    return total


def bipartite_matching_valid(pairs: Iterable[tuple], edges: Iterable[tuple] | None = None) -> bool:
    """Each left node matched at most once, each right node at most once, and
    every pair is an actual edge when an edge list is supplied."""
    pairs = list(pairs)
    xs = [p[0] for p in pairs]
    ys = [p[1] for p in pairs]
    if len(xs) != len(set(xs)) or len(ys) != len(set(ys)):
        return False
    if edges is not None:
        allowed = {(u, v) for u, v, *_ in edges}
        return all((x, y) in allowed for x, y in pairs)
    return True


def chain_is_total_order(succ_pairs: Iterable[tuple], domain: Iterable, root="root") -> bool:
    """succ tuples (minus the root loop) must form a chain starting at root
    and visiting every domain element exactly once."""
    domain = set(domain)
    nxt = {}
    for x, y in succ_pairs:
        if x == root and y == root:
            continue
        if x in nxt:
            return False
        nxt[x] = y
    seen = []
    cur = root
    while cur in nxt:
        cur = nxt[cur]
        if cur in seen:
            return False
        seen.append(cur)
    return len(seen) == len(nxt) and set(seen) == domain


def reachable(arcs: Iterable[tuple], src) -> set:
    adj: dict = {}
    for u, v, *_ in arcs:
        adj.setdefault(u, []).append(v)
    out = {src}
    stack = [src]
    while stack:
        u = stack.pop()
        for v in adj.get(u, ()):
            if v not in out:
                out.add(v)
                stack.append(v)
    return out


def reference_graph_algos(kind: str, graph: dict):
    """Dispatcher over the reference algorithms.

    graph keys by kind: dijkstra {arcs, src}; prim_weight/mst_weight {edges};
    bipartite_matching_valid {pairs, edges?}; topological_sort_check
    {succ, domain, root?}.
    """
    if kind == "dijkstra":
        return ref_dijkstra(graph["arcs"], graph["src"])
    if kind == "prim_weight":
        return ref_prim_weight(graph["edges"], graph.get("start"))
    if kind == "mst_weight":
        return ref_mst_weight(graph["edges"])
    if kind == "bipartite_matching_valid":
        return bipartite_matching_valid(graph["pairs"], graph.get("edges"))
    if kind == "topological_sort_check":
        return chain_is_total_order(graph["succ"], graph["domain"], graph.get("root", "root"))
    raise GdlogError(f"unknown reference algorithm {kind!r}")
