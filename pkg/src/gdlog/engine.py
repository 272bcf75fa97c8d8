"""Fixpoint evaluation.

The engine computes stable models of choice programs bottom-up: strata are
evaluated in dependency order; within a stratum the non-choice rules are
closed by semi-naive iteration, and choice rules run the candidate/selection
loop: derive new candidate tuples differentially, buffer them in per-rule
theta tables, move one tuple per iteration into the chosen table, purge the
candidates it conflicts with, and re-close the non-choice rules.

For programs with choice_least/choice_most rules the loop defers merging
freshly derived candidates until after the extreme tuple has been picked and
its conflicts purged, so tuples that die in the same iteration never touch
the priority queue.

run_lico_reference is the unoptimized one-tuple-per-step operator used to
cross-check the differential engine.
"""

from __future__ import annotations

import os
import random
import time
from dataclasses import dataclass
from typing import Iterable, Iterator, Union

from . import analysis
from .analysis import ChoiceInfo, RuleKind, Stratum
from .lang import (
    MAX_INT,
    MIN_INT,
    Atom,
    Comparison,
    Const,
    GdlogError,
    PlusBinding,
    Program,
    Rule,
    Var,
    format_const,
)
from .storage import ChosenTable, Counters, Relation, ThetaTable, Tup, tuple_key


class EngineError(GdlogError):
    pass


EDB = dict[str, Iterable[Tup]]


class Interpretation:
    """The growing model of a fixpoint run: per-predicate relations covering
    database facts, derived facts and the per-rule chosen tables."""

    def __init__(self):
        self.relations: dict[str, Relation] = {}

    def rel(self, pred: str, arity: int | None = None) -> Relation:
        r = self.relations.get(pred)
        if r is None:
            if arity is None:
                raise EngineError(f"unknown predicate {pred}")
            r = Relation(pred, arity)
            self.relations[pred] = r
        return r

    def atoms(self) -> Iterator[tuple[str, Tup]]:
        for pred in self.relations:
            for t in self.relations[pred]:
                yield pred, t

    def tuples(self, pred: str) -> list[Tup]:
        r = self.relations.get(pred)
        return list(r.rows) if r is not None else []

    def as_sets(self, skip: tuple[str, ...] = ()) -> dict[str, frozenset]:
        return {
            pred: frozenset(rel.rows)
            for pred, rel in self.relations.items()
            if rel.rows and not pred.startswith(skip)
        }

    def size(self) -> int:
        return sum(len(r) for r in self.relations.values())

    def sorted_lines(self) -> list[str]:
        out = []
        for pred in sorted(self.relations):
            rows = sorted(self.relations[pred].rows, key=tuple_key)
            for t in rows:
                out.append("\t".join([pred] + [format_const(c) for c in t]))
        return out


# ---------------------------------------------------------------------------
# Rule compilation: each rule becomes one full plan plus one plan per body
# atom occurrence with that occurrence moved to the front, which is where the
# differential (delta) rows are fed in.


@dataclass(frozen=True)
class _AtomStep:
    pred: str
    occ: int  # occurrence number among the rule's body atoms
    const_checks: tuple[tuple[int, Const], ...]
    self_checks: tuple[tuple[int, int], ...]  # same variable twice in one atom
    eq_checks: tuple[tuple[int, int], ...]  # (position, slot)
    binds: tuple[tuple[int, int], ...]  # (position, slot)
    index_cols: tuple[int, ...]  # constant + already-bound positions
    index_key: tuple[tuple[str, object], ...]  # ("const", v) / ("slot", i) per index col


@dataclass(frozen=True)
class _CompareStep:
    op: str
    left: tuple[str, object]
    right: tuple[str, object]


@dataclass(frozen=True)
class _PlusStep:
    out_slot: int
    left: tuple[str, object]
    right: tuple[str, object]
    # in reordered delta plans the output may be bound already (e.g. by the
    # chosen atom moved to the front); then the step checks instead of binding
    out_bound: bool = False


_Step = Union[_AtomStep, _CompareStep, _PlusStep]


@dataclass
class _Plan:
    steps: tuple[_Step, ...]
    delta_occ: int | None  # occurrence fed from delta rows, None for full plan


@dataclass
class _CompiledRule:
    rule_id: str
    head_pred: str
    emit: tuple[tuple[str, object], ...]  # head or W template
    full_plan: _Plan
    delta_plans: dict[int, _Plan]  # per body-atom occurrence
    atom_preds: tuple[str, ...]  # predicate per occurrence


def _operand(term, slots) -> tuple[str, object]:
    if isinstance(term, Var):
        return ("slot", slots[term])
    return ("const", term)


def _compile_goals(goals, slots, order: list[int]) -> tuple[_Step, ...]:
    """Compile body goals in the given goal order (indices into goals)."""
    steps: list[_Step] = []
    bound: set[int] = set()
    occ_counter = {}
    # occurrence numbers follow the original body order, not the plan order
    occ_of = {}
    k = 0
    for gi, g in enumerate(goals):
        if isinstance(g, Atom):
            occ_of[gi] = k
            k += 1
    for gi in order:
        g = goals[gi]
        if isinstance(g, Atom):
            const_checks = []
            self_checks = []
            eq_checks = []
            binds = []
            first_pos: dict[int, int] = {}  # slot -> first position in this atom
            for pos, a in enumerate(g.args):
                if isinstance(a, Var):
                    slot = slots[a]
                    if slot in bound:
                        eq_checks.append((pos, slot))
                    elif slot in first_pos:
                        self_checks.append((pos, first_pos[slot]))
                    else:
                        binds.append((pos, slot))
                        first_pos[slot] = pos
                else:
                    const_checks.append((pos, a))
            index_cols = tuple(sorted([p for p, _ in const_checks] + [p for p, _ in eq_checks]))
            key = []
            cc = dict(const_checks)
            ec = dict(eq_checks)
            for col in index_cols:
                if col in cc:
                    key.append(("const", cc[col]))
                else:
                    key.append(("slot", ec[col]))
            steps.append(
                _AtomStep(
                    g.pred,
                    occ_of[gi],
                    tuple(const_checks),
                    tuple(self_checks),
                    tuple(eq_checks),
                    tuple(binds),
                    index_cols,
                    tuple(key),
                )
            )
            for _, s in binds:
                bound.add(s)
        elif isinstance(g, Comparison):
            steps.append(_CompareStep(g.op, _operand(g.left, slots), _operand(g.right, slots)))
        else:
            out_slot = slots[g.out]
            steps.append(
                _PlusStep(out_slot, _operand(g.left, slots), _operand(g.right, slots), out_slot in bound)
            )
            bound.add(out_slot)
    return tuple(steps)


def _compile_rule(rule: Rule, emit_terms: tuple, goals: tuple) -> _CompiledRule:
    slots: dict[Var, int] = {}
    for g in goals:
        for v in _goal_vars(g):
            slots.setdefault(v, len(slots))
    if len(slots) > 64:
        raise EngineError(f"{rule.rule_id}: too many distinct variables ({len(slots)})")
    for t in emit_terms:
        if isinstance(t, Var) and t not in slots:
            raise EngineError(f"{rule.rule_id}: emitted variable {t.name} is unbound")
    emit = tuple(_operand(t, slots) for t in emit_terms)
    atom_idx = [i for i, g in enumerate(goals) if isinstance(g, Atom)]
    base_order = list(range(len(goals)))
    full = _Plan(_compile_goals(goals, slots, base_order), None)
    delta_plans: dict[int, _Plan] = {}
    for occ, gi in enumerate(atom_idx):
        order = [gi] + [j for j in base_order if j != gi]
        delta_plans[occ] = _Plan(_compile_goals(goals, slots, order), occ)
    return _CompiledRule(
        rule_id=rule.rule_id,
        head_pred=rule.head.pred,
        emit=emit,
        full_plan=full,
        delta_plans=delta_plans,
        atom_preds=tuple(goals[i].pred for i in atom_idx),
    )


def _goal_vars(g) -> Iterator[Var]:
    if isinstance(g, Atom):
        yield from g.vars()
    elif isinstance(g, Comparison):
        yield from g.vars()
    else:
        yield from g.vars()


# ---------------------------------------------------------------------------
# Plan evaluation


class _Evaluator:
    """Executes compiled plans against an interpretation; per-rule cursors
    into the append-only relations make evaluation differential."""

    def __init__(self, interp: Interpretation, counters: Counters, arities: dict[str, int]):
        self.interp = interp
        self.counters = counters
        self.arities = arities

    def rel(self, pred: str) -> Relation:
        return self.interp.rel(pred, self.arities[pred])

    def prepare(self, cr: _CompiledRule) -> None:
        for plan in [cr.full_plan, *cr.delta_plans.values()]:
            for step in plan.steps:
                if isinstance(step, _AtomStep) and step.index_cols:
                    self.rel(step.pred).ensure_index(step.index_cols)

    def eval_plan(self, cr: _CompiledRule, plan: _Plan, delta_rows, rule_id: str):
        """Yield emitted tuples for every binding of the plan."""
        counters = self.counters
        env: list = [None] * 64

        def value(op):
            tag, v = op
            return env[v] if tag == "slot" else v

        def run(i: int):
            if i == len(plan.steps):
                counters.firings += 1
                yield tuple(value(op) for op in cr.emit)
                return
            step = plan.steps[i]
            if isinstance(step, _AtomStep):
                if plan.delta_occ is not None and step.occ == plan.delta_occ:
                    rows = delta_rows
                elif step.index_cols:
                    key = tuple(value(op) for op in step.index_key)
                    rows = self.rel(step.pred).lookup(step.index_cols, key)
                else:
                    rows = self.rel(step.pred).rows
                for t in rows:
                    counters.join_probes += 1
                    counters.work += 1
                    ok = True
                    for pos, c in step.const_checks:
                        if t[pos] != c:
                            ok = False
                            break
                    if ok:
                        for pos, first in step.self_checks:
                            if t[pos] != t[first]:
                                ok = False
                                break
                    if ok:
                        for pos, slot in step.eq_checks:
                            if t[pos] != env[slot]:
                                ok = False
                                break
                    if not ok:
                        continue
                    for pos, slot in step.binds:
                        env[slot] = t[pos]
                    yield from run(i + 1)
            elif isinstance(step, _CompareStep):
                if _compare(step.op, value(step.left), value(step.right), rule_id):
                    yield from run(i + 1)
            else:
                a, b = value(step.left), value(step.right)
                if not (isinstance(a, int) and isinstance(b, int)):
                    raise EngineError(f"{rule_id}: arithmetic over non-integers {a!r} + {b!r}")
                c = a + b
                if not (MIN_INT <= c <= MAX_INT):
                    raise EngineError(f"{rule_id}: arithmetic overflow computing {a} + {b}")
                if step.out_bound:
                    if env[step.out_slot] == c:
                        yield from run(i + 1)
                else:
                    env[step.out_slot] = c
                    yield from run(i + 1)

        yield from run(0)


def _compare(op: str, a, b, rule_id: str) -> bool:
    if op == "\\=":
        return a != b
    if not (isinstance(a, int) and isinstance(b, int)):
        raise EngineError(f"{rule_id}: order comparison over non-integers {a!r} {op} {b!r}")
    if op == "<":
        return a < b
    if op == "=<":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


class _DifferentialRule:
    """Tracks how much of each body relation a rule has already consumed and
    evaluates only the new suffixes."""

    def __init__(self, cr: _CompiledRule, ev: _Evaluator):
        self.cr = cr
        self.ev = ev
        self.cursors = [0] * len(cr.atom_preds)
        self.virgin = True

    def evaluate(self) -> list[Tup]:
        """Tuples derivable using at least one not-yet-seen body row (all
        tuples on the first call); duplicates are removed, order is the
        derivation order."""
        ev, cr = self.ev, self.cr
        out: list[Tup] = []
        seen: set[Tup] = set()

        def take(gen):
            for t in gen:
                if t not in seen:
                    seen.add(t)
                    out.append(t)

        if self.virgin:
            self.virgin = False
            snapshot = [len(ev.rel(p)) for p in cr.atom_preds]
            take(ev.eval_plan(cr, cr.full_plan, None, cr.rule_id))
            self.cursors = snapshot
            return out
        snapshot = [len(ev.rel(p)) for p in cr.atom_preds]
        for occ, pred in enumerate(cr.atom_preds):
            if self.cursors[occ] >= snapshot[occ]:
                continue
            delta = ev.rel(pred).rows[self.cursors[occ] : snapshot[occ]]
            take(ev.eval_plan(cr, cr.delta_plans[occ], delta, cr.rule_id))
        self.cursors = snapshot
        return out

    def pending_delta(self) -> bool:
        if self.virgin:
            return True
        return any(
            self.cursors[occ] < len(self.ev.rel(p)) for occ, p in enumerate(self.cr.atom_preds)
        )


class _Closure:
    """Semi-naive least fixpoint of a set of non-choice rules."""

    def __init__(self, compiled: list[_CompiledRule], ev: _Evaluator):
        self.rules = [_DifferentialRule(cr, ev) for cr in compiled]
        self.ev = ev

    def run(self) -> None:
        changed = True
        while changed:
            changed = False
            for dr in self.rules:
                if not dr.pending_delta():
                    continue
                rel = self.ev.rel(dr.cr.head_pred)
                for t in dr.evaluate():
                    self.ev.counters.work += 1
                    if rel.insert(t):
                        self.ev.counters.derived += 1
                        changed = True


# ---------------------------------------------------------------------------
# The engine


def _resolve_policy(policy: str | None, seed: int | None) -> tuple[str, random.Random]:
    if seed is not None and policy in (None, "seeded-random", "random"):
        return "random", random.Random(seed)
    if policy in (None, "arbitrary", "lex"):
        return "lex", random.Random(0)
    if policy in ("seeded-random", "random"):
        return "random", random.Random(seed if seed is not None else 0)
    if policy == "fifo":
        return "fifo", random.Random(0)
    raise EngineError(f"unknown tie policy {policy!r}")


@dataclass
class _ChoiceState:
    rule: Rule
    info: ChoiceInfo
    cand: _DifferentialRule
    theta: ThetaTable
    chosen: ChosenTable


class Engine:
    """One fixpoint run over a validated program.

    greedy=False runs the plain choice fixpoint (least/most goals read as
    ordinary choice goals); greedy=True runs the greedy computation with
    cost-based selection, unique-key retention and deferred candidate merge.

    A run is strictly sequential and owns its storage exclusively; run
    independent Engine instances for parallelism.  After run() returns, the
    per-rule chosen/theta tables stay readable on choice_tables.
    """

    def __init__(
        self,
        program: Program,
        *,
        edb: EDB | None = None,
        greedy: bool = False,
        pq: str = "auto",
        ties: str | None = None,
        seed: int | None = None,
        schedule: str = "greedy-first",
        factorize: bool = False,
        trace=None,
        counters: Counters | None = None,
    ):
        self.program = program
        self.greedy = greedy
        self.pq = pq
        self.schedule = schedule
        self.factorize = factorize
        self.trace = trace
        self.counters = counters if counters is not None else Counters()
        self.tie_policy, self.rng = _resolve_policy(ties, seed)
        self.interp = Interpretation()
        self.factorized_strata: list[str] = []
        self.factorize_reasons: list[str] = []
        self.choice_tables: dict[str, tuple[ChosenTable, ThetaTable | None]] = {}

        self.arities = dict(program.predicates())
        self.infos: dict[str, ChoiceInfo] = {}
        for r in program.rules:
            if r.choice_goals:
                info = analysis.choice_info(r)
                self.infos[r.rule_id] = info
                self.arities[info.chosen_pred] = len(info.w_vars)
        graph = analysis.build_dependency_graph(program)
        self.plan = analysis.plan_subprograms(graph, program)
        self.ev = _Evaluator(self.interp, self.counters, self.arities)

        self._load_facts(edb)

    def _load_facts(self, edb: EDB | None) -> None:
        for f in self.program.facts:
            self.interp.rel(f.pred, f.arity).insert(f.args)
        if edb:
            for pred, rows in edb.items():
                for t in rows:
                    arity = self.arities.setdefault(pred, len(t))
                    self.interp.rel(pred, arity).insert(tuple(t))

    # -- compilation --------------------------------------------------------

    def _compile_nonchoice(self, rule: Rule) -> _CompiledRule:
        return _compile_rule(rule, rule.head.args, rule.body)

    def _compile_rewritten(self, rule: Rule, info: ChoiceInfo) -> _CompiledRule:
        # the rewritten rule head <- B(Z), chosen_r(W)
        chosen_atom = Atom(info.chosen_pred, info.w_vars)
        return _compile_rule(rule, rule.head.args, tuple(rule.body) + (chosen_atom,))

    def _compile_candidates(self, rule: Rule, info: ChoiceInfo) -> _CompiledRule:
        # the chosen rule chosen_r(W) <- B(Z), with conflicts checked against
        # the chosen table instead of a diffchoice relation
        return _compile_rule(rule, tuple(info.w_vars), rule.body)

    # -- run ----------------------------------------------------------------

    def run(self) -> Interpretation:
        t0 = time.perf_counter()
        for stratum in self.plan.strata:
            pattern = self._factorize_pattern(stratum) if self.factorize else None
            if self.factorize and pattern is None and any(
                r.choice_goals for r in stratum.rules
            ):
                self.factorize_reasons.append(
                    f"stratum {sorted(stratum.preds)}: candidate set is not a frontier x domain product"
                )
            if pattern is not None:
                self._run_stratum_factorized(*pattern)
            else:
                self._run_stratum(stratum)
        self.counters.wall_time_s += time.perf_counter() - t0
        return self.interp

    def _schedule_order(self, states: list[_ChoiceState]) -> list[_ChoiceState]:
        if self.schedule == "program-order":
            return states
        extreme = [s for s in states if s.info.kind is not RuleKind.PURE_CHOICE]
        pure = [s for s in states if s.info.kind is RuleKind.PURE_CHOICE]
        return extreme + pure

    def _run_stratum(self, stratum: Stratum) -> None:
        nonchoice: list[_CompiledRule] = []
        states: list[_ChoiceState] = []
        for r in stratum.rules:
            if not r.choice_goals:
                nonchoice.append(self._compile_nonchoice(r))
                continue
            info = self.infos[r.rule_id]
            nonchoice.append(self._compile_rewritten(r, info))
            cand = _DifferentialRule(self._compile_candidates(r, info), self.ev)
            theta = ThetaTable(
                info,
                counters=self.counters,
                use_pq=self._use_pq(info),
                tie_policy=self.tie_policy,
                rng=self.rng,
                treat_as_pure=not self.greedy,
            )
            state = _ChoiceState(r, info, cand, theta, ChosenTable(info))
            states.append(state)
            self.choice_tables[r.rule_id] = (state.chosen, state.theta)
        for cr in nonchoice:
            self.ev.prepare(cr)
        for st in states:
            self.ev.prepare(st.cand.cr)

        closure = _Closure(nonchoice, self.ev)
        closure.run()
        if not states:
            return
        ordered = self._schedule_order(states)

        while True:
            selected: _ChoiceState | None = None
            pending: list[Tup] = []
            for st in ordered:
                fresh = self._fresh_candidates(st)
                if self.greedy:
                    if fresh:
                        x = self._extreme_of(st, fresh)
                        st.theta.insert(x)
                        pending = [t for t in fresh if t != x]
                else:
                    for t in fresh:
                        st.theta.insert(t)
                if len(st.theta):
                    selected = st
                    break
            if selected is None:
                return
            delta = selected.theta.select_extreme("auto" if self.greedy else "arbitrary")
            selected.chosen.insert(delta)
            self.interp.rel(selected.info.chosen_pred, len(delta)).insert(delta)
            purged = selected.theta.purge_conflicting(delta)
            for t in pending:
                if not selected.theta.conflicts_with(delta, t):
                    selected.theta.insert(t)
            self.counters.iterations += 1
            self._trace_row(selected, delta, purged)
            closure.run()

    def _fresh_candidates(self, st: _ChoiceState) -> list[Tup]:
        out = []
        for t in st.cand.evaluate():
            self.counters.conflict_checks += 1
            self.counters.work += 1
            if t in st.theta or st.chosen.conflicts(t):
                continue
            out.append(t)
        return out

    def _extreme_of(self, st: _ChoiceState, fresh: list[Tup]) -> Tup:
        if self.greedy and st.info.cost_pos is not None:
            best = fresh[0]
            for t in fresh[1:]:
                self.counters.work += 1
                if st.theta.better(t, best):
                    best = t
            return best
        if self.tie_policy == "fifo":
            return fresh[0]
        if self.tie_policy == "random":
            return fresh[self.rng.randrange(len(fresh))]
        return min(fresh, key=tuple_key)

    def _use_pq(self, info: ChoiceInfo) -> bool:
        if not self.greedy or info.cost_pos is None:
            return False
        if self.pq == "on":
            return True
        if self.pq == "off":
            return False
        return True  # auto: heap-order every least/most table

    def _trace_row(self, st: _ChoiceState, delta: Tup, purged: int) -> None:
        if self.trace is None:
            return
        self.trace.write(
            "\t".join(
                [
                    str(self.counters.iterations),
                    st.rule.rule_id,
                    str(len(st.theta)),
                    ",".join(format_const(c) for c in delta),
                    str(purged),
                    str(self.interp.size()),
                ]
            )
            + "\n"
        )

    # -- factorized evaluation (candidates form a Cartesian product) --------

    def _factorize_pattern(self, stratum: Stratum):
        choice_rules = [r for r in stratum.rules if r.choice_goals]
        if len(choice_rules) != 1:
            return None
        r = choice_rules[0]
        others = [x for x in stratum.rules if x is not r]
        if others:
            return None
        if len(r.body) != 2 or not all(isinstance(g, Atom) for g in r.body):
            return None
        rec, dom = r.body  # type: ignore[misc]
        if rec.pred != r.head.pred or dom.arity != 1:
            return None
        if any(x.head.pred == dom.pred for x in self.program.rules):
            return None  # domain goal must be database-defined
        rec_named = [a for a in rec.args if isinstance(a, Var) and not a.name.startswith("_#")]
        if len(rec_named) != 1:
            return None
        x_var = rec_named[0]
        y = dom.args[0]
        if not isinstance(y, Var) or y == x_var:
            return None
        if r.head.args != (x_var, y):
            return None
        fds = {(c.left, c.right) for c in r.choice_goals}
        if fds != {((x_var,), (y,)), ((y,), (x_var,))}:
            return None
        info = self.infos[r.rule_id]
        if info.cost_pos is not None:
            goal = next(c for c in r.choice_goals if c.kind != "choice")
            if goal.left != (x_var,) or goal.right != (y,):
                return None
        starts = [f.args for f in self.program.facts if f.pred == r.head.pred]
        if len(starts) != 1 or len(starts[0]) != 2:
            return None
        if info.w_vars != (x_var, y):
            return None
        return (stratum, r, info, dom.pred, starts[0][1])

    def _run_stratum_factorized(self, stratum, rule: Rule, info: ChoiceInfo, dom_pred: str, start: Const) -> None:
        """Maintain only the domain column of theta: avail = d minus the
        already chosen values, heap-ordered for least/most rules."""
        from .storage import _Heap

        self.factorized_strata.append(rule.rule_id)
        chosen = ChosenTable(info)
        self.choice_tables[rule.rule_id] = (chosen, None)
        head_rel = self.interp.rel(rule.head.pred, 2)
        chosen_rel = self.interp.rel(info.chosen_pred, 2)
        domain = [t[0] for t in self.interp.rel(dom_pred, 1).rows]

        greedy_rule = self.greedy and info.cost_pos is not None
        use_pq = greedy_rule and self._use_pq(info)
        most = info.kind is RuleKind.CHOICE_MOST
        heap = None
        fifo_ptr = 0
        if use_pq:
            heap = _Heap(self.counters)
            for y in domain:
                heap.push(self._factor_key(y, most, rule.rule_id), y)
            avail: list[Const] = []
        else:
            avail = list(domain)

        x_cur = start
        while True:
            if heap is not None:
                if not len(heap):
                    break
                y = heap.pop()
                self.counters.work += 1
            elif not greedy_rule and self.tie_policy == "fifo":
                if fifo_ptr >= len(avail):
                    break
                y = avail[fifo_ptr]
                fifo_ptr += 1
                self.counters.work += 1
            else:
                if not avail:
                    break
                y = self._factor_pick(avail, most, greedy_rule, rule.rule_id)
            t = (x_cur, y)
            chosen.insert(t)
            chosen_rel.insert(t)
            head_rel.insert(t)
            self.counters.derived += 1
            self.counters.theta_inserts += 1
            self.counters.theta_deletes += 1
            self.counters.work += 2
            self.counters.iterations += 1
            if self.trace is not None:
                size = len(heap) if heap is not None else len(avail) - fifo_ptr
                self.trace.write(
                    f"{self.counters.iterations}\t{rule.rule_id}\t{size}\t"
                    f"{format_const(x_cur)},{format_const(y)}\t0\t{self.interp.size()}\n"
                )
            x_cur = y

    def _factor_key(self, y: Const, most: bool, rule_id: str):
        if not isinstance(y, int):
            raise EngineError(f"{rule_id}: cost argument must be an integer, got {y!r}")
        return ((-y if most else y),)

    def _factor_pick(self, avail: list[Const], most: bool, greedy_rule: bool, rule_id: str) -> Const:
        if greedy_rule:
            best_i = 0
            best_key = self._factor_key(avail[0], most, rule_id)
            for i in range(1, len(avail)):
                self.counters.work += 1
                k = self._factor_key(avail[i], most, rule_id)
                if k < best_key:
                    best_i, best_key = i, k
        elif self.tie_policy == "random":
            best_i = self.rng.randrange(len(avail))
        else:
            best_i = min(range(len(avail)), key=lambda i: tuple_key((avail[i],)))
            self.counters.work += len(avail)
        y = avail[best_i]
        avail[best_i] = avail[-1]
        avail.pop()
        self.counters.work += 1
        return y


# ---------------------------------------------------------------------------
# Public operations


class _TraceTarget:
    """Resolves a trace argument (path, file object or None) and closes the
    file afterwards only if this helper opened it.  The GDLOG_TRACE variable
    mirrors the CLI flag."""

    def __init__(self, trace):
        if trace is None:
            trace = os.environ.get("GDLOG_TRACE") or None
        self._own = isinstance(trace, str)
        self.target = open(trace, "w", encoding="utf-8") if self._own else trace

    def __enter__(self):
        return self.target

    def __exit__(self, *exc):
        if self._own:
            self.target.close()
        return False


def run_choice_fixpoint(
    program: Program,
    policy: str = "arbitrary",
    *,
    seed: int | None = None,
    edb: EDB | None = None,
    schedule: str = "program-order",
    trace=None,
    counters: Counters | None = None,
) -> Interpretation:
    """Compute a choice model by the semi-naive fixpoint; least/most goals are
    read as plain choice goals (their declarative semantics coincide).

    policy "arbitrary" is the deterministic lexicographic pick; "seeded-random"
    randomizes pure-choice selection under the given seed; "fifo" picks the
    oldest candidate in constant time.
    """
    with _TraceTarget(trace) as tr:
        eng = Engine(
            program,
            edb=edb,
            greedy=False,
            ties=policy,
            seed=seed,
            schedule=schedule,
            trace=tr,
            counters=counters,
        )
        return eng.run()


def run_greedy_fixpoint(
    program: Program,
    *,
    pq: str = "auto",
    ties: str = "lex",
    seed: int | None = None,
    edb: EDB | None = None,
    schedule: str = "greedy-first",
    factorize: bool = False,
    trace=None,
    counters: Counters | None = None,
) -> Interpretation:
    """Compute a greedy choice model: choice_least/choice_most rules move
    their extreme-cost candidate first; cost ties break lexicographically."""
    if not any(
        analysis.classify_rule(r) in (RuleKind.CHOICE_LEAST, RuleKind.CHOICE_MOST)
        for r in program.rules
    ):
        raise EngineError("greedy fixpoint requires at least one choice_least or choice_most rule")
    with _TraceTarget(trace) as tr:
        eng = Engine(
            program,
            edb=edb,
            greedy=True,
            pq=pq,
            ties=ties,
            seed=seed,
            schedule=schedule,
            factorize=factorize,
            trace=tr,
            counters=counters,
        )
        return eng.run()


def run_factorized_sort(
    program: Program,
    *,
    pq: str = "auto",
    ties: str = "lex",
    seed: int | None = None,
    edb: EDB | None = None,
    counters: Counters | None = None,
    trace=None,
) -> tuple[Interpretation, bool, str]:
    """Run with the Cartesian-product factorization enabled.

    Returns (model, applied, reason): when no stratum matches the
    frontier x domain pattern the engine falls back to the regular
    evaluation and reports why.
    """
    greedy = any(
        analysis.classify_rule(r) in (RuleKind.CHOICE_LEAST, RuleKind.CHOICE_MOST)
        for r in program.rules
    )
    with _TraceTarget(trace) as tr:
        eng = Engine(
            program,
            edb=edb,
            greedy=greedy,
            pq=pq,
            ties=ties,
            seed=seed,
            factorize=True,
            trace=tr,
            counters=counters,
        )
        interp = eng.run()
    applied = bool(eng.factorized_strata)
    reason = "; ".join(eng.factorize_reasons) if not applied else ""
    if not applied and not reason:
        reason = "no choice rule matches the frontier x domain pattern"
    return interp, applied, reason


def run_with_counters(
    program: Program,
    *,
    mode: str = "auto",
    pq: str = "auto",
    ties: str | None = None,
    seed: int | None = None,
    edb: EDB | None = None,
    schedule: str = "greedy-first",
    factorize: bool = False,
    trace=None,
) -> tuple[Interpretation, Counters]:
    """Run the program and report operation counters alongside the model."""
    counters = Counters()
    if mode == "auto":
        greedy = any(
            analysis.classify_rule(r) in (RuleKind.CHOICE_LEAST, RuleKind.CHOICE_MOST)
            for r in program.rules
        )
    else:
        greedy = mode == "greedy"
    with _TraceTarget(trace) as tr:
        eng = Engine(
            program,
            edb=edb,
            greedy=greedy,
            pq=pq,
            ties=ties,
            seed=seed,
            schedule=schedule,
            factorize=factorize,
            trace=tr,
            counters=counters,
        )
        interp = eng.run()
    return interp, counters


def immediate_consequence(
    rules: Iterable[Rule],
    interp: Interpretation,
    delta: dict[str, list[Tup]] | None = None,
    counters: Counters | None = None,
) -> dict[str, set[Tup]]:
    """Heads of fireable ground instances not already in the interpretation.

    With delta given, recursive occurrences are evaluated differentially:
    every body occurrence of a delta predicate is fed the delta rows in turn
    (linear rules see exactly the delta; rules with two recursive goals are
    split into the standard pair of half-delta evaluations).
    """
    counters = counters if counters is not None else Counters()
    arities: dict[str, int] = {p: r.arity for p, r in interp.relations.items()}
    rules = list(rules)
    for r in rules:
        arities.setdefault(r.head.pred, r.head.arity)
        for a in r.body_atoms():
            arities.setdefault(a.pred, a.arity)
    ev = _Evaluator(interp, counters, arities)
    out: dict[str, set[Tup]] = {}
    for r in rules:
        if r.choice_goals:
            raise EngineError("immediate_consequence expects non-choice rules")
        cr = _compile_rule(r, r.head.args, r.body)
        ev.prepare(cr)
        produced: set[Tup] = set()
        if delta is None:
            produced.update(ev.eval_plan(cr, cr.full_plan, None, r.rule_id))
        else:
            for occ, pred in enumerate(cr.atom_preds):
                if pred in delta:
                    produced.update(ev.eval_plan(cr, cr.delta_plans[occ], list(delta[pred]), r.rule_id))
        rel = interp.relations.get(r.head.pred)
        fresh = {t for t in produced if rel is None or t not in rel}
        if fresh:
            out.setdefault(r.head.pred, set()).update(fresh)
    return out


def closure_nonchoice(
    program_or_rules: Program | Iterable[Rule],
    interp: Interpretation,
    counters: Counters | None = None,
) -> Interpretation:
    """Least fixpoint of the non-choice rules over the interpretation, by
    semi-naive iteration.  Choice rules in the input are ignored."""
    counters = counters if counters is not None else Counters()
    if isinstance(program_or_rules, Program):
        rules = [r for r in program_or_rules.rules if not r.choice_goals]
        for f in program_or_rules.facts:
            interp.rel(f.pred, f.arity).insert(f.args)
    else:
        rules = [r for r in program_or_rules if not r.choice_goals]
    arities: dict[str, int] = {p: r.arity for p, r in interp.relations.items()}
    for r in rules:
        arities.setdefault(r.head.pred, r.head.arity)
        for a in r.body_atoms():
            arities.setdefault(a.pred, a.arity)
    ev = _Evaluator(interp, counters, arities)
    compiled = [_compile_rule(r, r.head.args, r.body) for r in rules]
    for cr in compiled:
        ev.prepare(cr)
    _Closure(compiled, ev).run()
    return interp


# ---------------------------------------------------------------------------
# Reference operator: unoptimized single-step semantics


def _naive_matches(goals, atoms: dict[str, dict[Tup, None]], rule_id: str) -> Iterator[dict]:
    """All bindings of the goals against plain atom stores; no indexes, no
    deltas.  Kept separate from the compiled evaluator on purpose: this is
    the yardstick the optimized engine is checked against.  Atom stores are
    insertion-ordered dicts so enumeration order does not depend on hashing."""

    def step(i: int, env: dict):
        if i == len(goals):
            yield dict(env)
            return
        g = goals[i]
        if isinstance(g, Atom):
            for t in atoms.get(g.pred, ()):
                bound = {}
                ok = True
                for pos, a in enumerate(g.args):
                    if isinstance(a, Var):
                        v = env.get(a, bound.get(a))
                        if v is None:
                            bound[a] = t[pos]
                        elif v != t[pos]:
                            ok = False
                            break
                    elif t[pos] != a:
                        ok = False
                        break
                if ok:
                    env.update(bound)
                    yield from step(i + 1, env)
                    for k in bound:
                        del env[k]
        elif isinstance(g, Comparison):
            a = env[g.left] if isinstance(g.left, Var) else g.left
            b = env[g.right] if isinstance(g.right, Var) else g.right
            if _compare(g.op, a, b, rule_id):
                yield from step(i + 1, env)
        else:
            a = env[g.left] if isinstance(g.left, Var) else g.left
            b = env[g.right] if isinstance(g.right, Var) else g.right
            if not (isinstance(a, int) and isinstance(b, int)):
                raise EngineError(f"{rule_id}: arithmetic over non-integers")
            c = a + b
            if not (MIN_INT <= c <= MAX_INT):
                raise EngineError(f"{rule_id}: arithmetic overflow computing {a} + {b}")
            env[g.out] = c
            yield from step(i + 1, env)
            del env[g.out]

    yield from step(0, {})


def run_lico_reference(
    program: Program,
    mode: str = "lazy",
    *,
    ties: str = "lex",
    seed: int | None = None,
    edb: EDB | None = None,
    schedule: str = "greedy-first",
) -> Interpretation:
    """Direct implementation of the one-tuple-per-step operator: at each step
    recompute every rule's candidate set from scratch, keep the tuples that
    are new and compatible with the declared FDs, adjoin one, and re-close
    the non-choice rules naively.

    mode "lazy" ignores costs; "least"/"most" pick the extreme-cost candidate
    of choice_least/choice_most rules (each rule under its own cost sense).
    Rule scheduling and tie-breaking mirror the engine's defaults so the two
    computations can be compared model-for-model.
    """
    if mode not in ("lazy", "least", "most"):
        raise EngineError(f"unknown reference mode {mode!r}")
    tie_policy, rng = _resolve_policy(ties, seed)
    atoms: dict[str, dict[Tup, None]] = {}
    for f in program.facts:
        atoms.setdefault(f.pred, {})[f.args] = None
    if edb:
        for pred, rows in edb.items():
            for t in rows:
                atoms.setdefault(pred, {})[tuple(t)] = None

    infos = {r.rule_id: analysis.choice_info(r) for r in program.rules if r.choice_goals}
    closure_rules: list[tuple[str, Atom, tuple]] = []
    for r in program.rules:
        if not r.choice_goals:
            closure_rules.append((r.rule_id, r.head, tuple(r.body)))
        else:
            info = infos[r.rule_id]
            body = tuple(r.body) + (Atom(info.chosen_pred, info.w_vars),)
            closure_rules.append((r.rule_id, r.head, body))

    def close():
        changed = True
        while changed:
            changed = False
            for rid, head, body in closure_rules:
                produced = [
                    tuple(env[a] if isinstance(a, Var) else a for a in head.args)
                    for env in _naive_matches(body, atoms, rid)
                ]
                bucket = atoms.setdefault(head.pred, {})
                for t in produced:
                    if t not in bucket:
                        bucket[t] = None
                        changed = True

    def fd_compatible(info: ChoiceInfo, t: Tup) -> bool:
        chosen = atoms.get(info.chosen_pred, ())
        for fd in info.fds:
            for u in chosen:
                if tuple(u[i] for i in fd.left) == tuple(t[i] for i in fd.left) and tuple(
                    u[i] for i in fd.right
                ) != tuple(t[i] for i in fd.right):
                    return False
        return True

    choice_rules = [r for r in program.rules if r.choice_goals]
    if schedule == "greedy-first" and mode != "lazy":
        choice_rules.sort(
            key=lambda r: 0 if analysis.classify_rule(r) is not RuleKind.PURE_CHOICE else 1
        )

    close()
    while True:
        delta = None
        delta_info = None
        for r in choice_rules:
            info = infos[r.rule_id]
            theta = []
            seen = set()
            for env in _naive_matches(tuple(r.body), atoms, r.rule_id):
                t = tuple(env[v] for v in info.w_vars)
                if t in seen or t in atoms.get(info.chosen_pred, ()):
                    continue
                seen.add(t)
                if fd_compatible(info, t):
                    theta.append(t)
            if not theta:
                continue
            kind = info.kind
            if mode != "lazy" and kind in (RuleKind.CHOICE_LEAST, RuleKind.CHOICE_MOST):
                sense = -1 if kind is RuleKind.CHOICE_MOST else 1

                def cost_key(t, sense=sense, pos=info.cost_pos):
                    c = t[pos]
                    if not isinstance(c, int):
                        raise EngineError(f"{r.rule_id}: cost argument must be an integer")
                    return (sense * c, tuple_key(t))

                delta = min(theta, key=cost_key)
            elif tie_policy == "random":
                delta = theta[rng.randrange(len(theta))]
            elif tie_policy == "fifo":
                delta = theta[0]
            else:
                delta = min(theta, key=tuple_key)
            delta_info = info
            break
        if delta is None:
            break
        atoms.setdefault(delta_info.chosen_pred, {})[delta] = None
        close()

    interp = Interpretation()
    for pred in sorted(atoms):
        if not atoms[pred]:
            continue
        rel = interp.rel(pred, len(next(iter(atoms[pred]))))
        for t in sorted(atoms[pred], key=tuple_key):
            rel.insert(t)
    return interp
