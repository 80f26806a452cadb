"""Tabled resolution with incremental table maintenance and timestamped updates."""

from __future__ import annotations

import enum
import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional

from .context import EMPTY, UNRESOLVED, Context, TimedAbducible, insert, produce
from .frontend import EXPECT, EXPECT_NOT, DEFAULT_LIMIT, Query, UpdateRecord
from .kernel import (Atom, Compound, FreshCounter, Literal, Term, Var, apply, args_of,
                     functor_of, is_ground, mk, signature, term_key, term_vars, unify, with_args)
from .transform import (CONSIDER, RULE_NAME, AbducibleCall, AugGoal, AugRule, CompiledProgram,
                        ConsiderCall, FluentCall, Neq, StarCall, rename_aug, substitute_goal)


class EngineError(Exception):
    pass


class TruthValue(enum.Enum):
    TRUE = "true"
    UNDEFINED = "undefined"
    FALSE = "false"

    def __str__(self) -> str:
        return self.value


TRUE, UNDEFINED, FALSE = TruthValue.TRUE, TruthValue.UNDEFINED, TruthValue.FALSE
_VALUE_ORDER = {TRUE: 0, UNDEFINED: 1, FALSE: 2}


@dataclass
class Stats:
    table_hits: int = 0
    table_misses: int = 0
    tables_invalidated: int = 0
    evaluations: int = 0
    dual_rules_generated: int = 0

    def as_text(self) -> str:
        return "\n".join(f"{k}={v}" for k, v in vars(self).items())


@dataclass
class Table:
    key: tuple
    answers: dict = field(default_factory=dict)   # (Context, time) -> None, insertion ordered
    status: str = "new"   # new | evaluating | incomplete | complete | invalid
    children: set = field(default_factory=set)
    parents: set = field(default_factory=set)
    stack_index: int = -1


@dataclass
class _Frame:
    key: tuple
    low: int
    mark: int
    recursive: bool = False


@dataclass(frozen=True)
class HoldsAnswer:
    goal: Literal
    query_time: int
    context: Context
    value: TruthValue
    time: int

    def __str__(self) -> str:
        return f"{self.goal} at {self.query_time}: {self.value} O={self.context} H={self.time}"


def format_key(key: tuple) -> str:
    if key[0] == "fluent":
        _, atom, positive, ctx = key
        name = atom if positive else mk(f"not_{functor_of(atom)}", *args_of(atom))
        return f"fluent({name},{ctx})"
    return f"consider_ab({key[1]})"


def extend(f: Term, args) -> Term:
    return with_args(f, args)


def compl(goal: Literal) -> Literal:
    return goal.negate()


def verify_holds(h: int, v: TruthValue, h2: int, v2: TruthValue) -> Optional[TruthValue]:
    """Truth of a goal from its own (time, value) and its complement's; None = fails."""
    if v2 is FALSE:
        return v
    if h < h2:
        return None
    if h > h2:
        return v
    return UNDEFINED if v is not FALSE else None


class Engine:
    """One session: a fluent store, pending updates, and the table space."""

    def __init__(self, compiled: CompiledProgram, limit: int = DEFAULT_LIMIT,
                 trace: Optional[Callable[[str], None]] = None, max_depth: int = 2000):
        if limit < 1:
            raise EngineError("time limit must be at least 1")
        self.compiled = compiled
        self.limit = limit
        self.trace = trace
        self.max_depth = max_depth
        self.stats = Stats()
        self.evaluations: Counter = Counter()
        self.store: dict = {}
        for fact, t in compiled.initial_facts:
            self.store.setdefault((fact, True), []).append(t)
        self.pending: list[UpdateRecord] = []
        self._active: set = set()
        self.watermark = 1
        self.domain = sorted(compiled.source.constants(), key=term_key)
        self.tables: dict[tuple, Table] = {}
        self._readers: dict = {}
        self._stack: list[_Frame] = []
        self._incomplete: list[tuple] = []
        self._changes = 0
        self._fresh = FreshCounter()

    # ------------------------------------------------------------ updates

    def register_update(self, u: UpdateRecord) -> None:
        if not 2 <= u.timestamp <= self.limit:
            raise EngineError(f"update time {u.timestamp} outside 2..{self.limit}")
        if not is_ground(u.target):
            raise EngineError(f"update target {u.target} is not ground")
        if functor_of(u.target) != RULE_NAME:
            new = [c for c in args_of(u.target) if isinstance(c, Atom) and c not in self.domain]
            if new:
                self.domain = sorted(set(self.domain) | set(new), key=term_key)
                for key in list(self.tables):
                    self._invalidate(key)
        self.pending.append(u)

    def activate_pending(self, qt: int) -> list[UpdateRecord]:
        activated = []
        for n, u in enumerate(self.pending):
            if n in self._active or u.timestamp > qt:
                continue
            self._active.add(n)
            times = self.store.setdefault(u.signed, [])
            if u.timestamp not in times:
                times.append(u.timestamp)
                times.sort()
            for key in list(self._readers.get(u.signed, ())):
                self._invalidate(key)
            activated.append(u)
        self.watermark = max(self.watermark, qt)
        return activated

    def _invalidate(self, key: tuple) -> None:
        todo = [key]
        while todo:
            k = todo.pop()
            tab = self.tables.get(k)
            if tab is None or tab.status == "invalid":
                continue
            tab.status = "invalid"
            self.stats.tables_invalidated += 1
            self._emit(f"invalidate {format_key(k)}")
            todo.extend(tab.parents)

    def active_updates(self) -> list[UpdateRecord]:
        return [u for n, u in enumerate(self.pending) if n in self._active]

    def store_times(self, atom: Term, positive: bool) -> list[int]:
        return self.store.get((atom, positive), [])

    # ------------------------------------------------------------ tabling

    def _emit(self, line: str) -> None:
        if self.trace:
            self.trace(line)

    def _table(self, key: tuple, evaluate: Callable[[], Iterable[tuple]]) -> list[tuple]:
        tab = self.tables.get(key)
        if tab is None:
            tab = self.tables[key] = Table(key)
            if key[0] == "fluent":
                self._readers.setdefault((key[1], key[2]), set()).add(key)
        if self._stack:
            caller = self.tables[self._stack[-1].key]
            caller.children.add(key)
            tab.parents.add(caller.key)
        if tab.status == "complete":
            self.stats.table_hits += 1
            self._emit(f"hit {format_key(key)}")
            return list(tab.answers)
        if tab.status == "evaluating":
            self._stack[tab.stack_index].recursive = True
            frame = self._stack[-1]
            frame.low = min(frame.low, tab.stack_index)
            return list(tab.answers)
        if tab.status in ("new", "invalid"):
            self.stats.table_misses += 1
            self._emit(f"miss {format_key(key)}")
            tab.answers.clear()
            for child in tab.children:
                if child in self.tables:
                    self.tables[child].parents.discard(key)
            tab.children.clear()
        if len(self._stack) >= self.max_depth:
            raise EngineError(f"depth budget of {self.max_depth} tabled calls exceeded")
        index = len(self._stack)
        frame = _Frame(key, index, len(self._incomplete))
        self._stack.append(frame)
        tab.status = "evaluating"
        tab.stack_index = index
        try:
            while True:
                before = self._changes
                self.stats.evaluations += 1
                self.evaluations[key] += 1
                for ctx, h in evaluate():
                    if h <= self.limit and (ctx, h) not in tab.answers:
                        tab.answers[(ctx, h)] = None
                        self._changes += 1
                if frame.low < index:
                    tab.status = "incomplete"
                    self._incomplete.append(key)
                    break
                if frame.recursive and self._changes != before:
                    # leader of a recursive component: iterate to a fixpoint
                    frame.recursive = False
                    continue
                for k in self._incomplete[frame.mark:]:
                    if self.tables[k].status == "incomplete":
                        self.tables[k].status = "complete"
                del self._incomplete[frame.mark:]
                tab.status = "complete"
                break
        except BaseException:
            tab.status = "invalid"
            raise
        finally:
            self._stack.pop()
        if self._stack and frame.low < index:
            parent = self._stack[-1]
            parent.low = min(parent.low, frame.low)
        return list(tab.answers)

    # ------------------------------------------------------------ reserved predicates

    def fluent(self, atom: Term, positive: bool, ctx: Context) -> list[tuple]:
        """Answers (O, H) of ``fluent(F, I, O, H)`` (``not_F`` when not positive)."""
        if not is_ground(atom):
            raise EngineError(f"fluent call {atom} is not ground")
        key = ("fluent", atom, positive, ctx)
        return self._table(key, lambda: self._eval_fluent(atom, positive, ctx))

    def _eval_fluent(self, atom: Term, positive: bool, ctx: Context) -> Iterator[tuple]:
        for t in self.store_times(atom, positive):
            yield ctx, t
        sig = signature(atom)
        if sig[0] == RULE_NAME:
            return
        if positive:
            for rule in self.compiled.positive_rules(sig):
                yield from self._eval_rule(rule, atom, ctx)
        else:
            yield from self._eval_dual(sig, atom, ctx)

    def _eval_rule(self, rule: AugRule, atom: Term, ctx: Context) -> Iterator[tuple]:
        r = rename_aug(rule, self._fresh)
        s = _unify_args(r.args, args_of(atom))
        if s is None:
            return
        if r.head_time is not None:
            yield ctx, r.head_time
            return
        for out, _, wits in self._solve_body(r.body, ctx, s, ()):
            h = self.latest(wits, out)
            if h is not None:
                yield out, h

    def _eval_dual(self, sig, atom: Term, ctx: Context) -> Iterator[tuple]:
        duals = self.compiled.dual_rules(sig)
        for out, h, _ in self._dual_top(duals[0], atom, ctx):
            yield out, h

    def _dual_top(self, top: AugRule, atom: Term, ctx: Context) -> Iterator[tuple]:
        r = rename_aug(top, self._fresh)
        s = _unify_args(r.args, args_of(atom))
        if s is None:
            return
        if r.relay:
            yield ctx, r.head_time, ()
            return
        for out, _, wits in self._solve_body(r.body, ctx, s, ()):
            h = self.latest(wits, out)
            if h is not None:
                yield out, h, wits

    def consider_ab(self, atom: Term) -> list[tuple]:
        """Tabled abductive solution entries (E, T) for abducible ``atom``."""
        if signature(atom) not in self.compiled.abducibles:
            raise EngineError(f"{atom} is not a declared abducible")
        if not is_ground(atom):
            raise EngineError(f"consider_ab call {atom} is not ground")
        return self._table(("consider_ab", atom), lambda: self._eval_consider_ab(atom))

    def _eval_consider_ab(self, atom: Term) -> Iterator[tuple]:
        seed = Context((TimedAbducible(atom, True, UNRESOLVED),))
        exp = FluentCall(Compound(EXPECT, (atom,)))
        exp_not = FluentCall(Compound(EXPECT_NOT, (atom,)), False)
        for r, h1 in self.fluent(exp.atom, True, seed):
            for e, h2 in self.fluent(exp_not.atom, False, r):
                t = self.latest(((exp, h1), (exp_not, h2)), e)
                if t is not None:
                    yield e.retime(atom, True, t), t

    def consider(self, atom: Term, ctx: Context) -> Iterator[tuple]:
        for e, t in self.consider_ab(atom):
            out = produce(ctx, e)
            if out is not None:
                yield out, t

    def latest(self, witnesses, ctx: Context) -> Optional[int]:
        """Max holds-time of ``witnesses``, or None if one was supervened before it."""
        h = max((t for _, t in witnesses), default=1)
        for goal, t in witnesses:
            if t < h and self._supervened(goal, t, h, ctx):
                return None
        return h

    verify_pos = latest
    verify_lits = latest

    def _supervened(self, goal: AugGoal, t: int, h: int, ctx: Context) -> bool:
        if isinstance(goal, AbducibleCall):
            return False
        plain = ctx.untimed()
        for out, t2, _ in self.solve(goal.negate(), ctx):
            if t < t2 <= h and out.untimed() == plain:
                return True
        return False

    # ------------------------------------------------------------ resolution

    def solve(self, goal: AugGoal, ctx: Context) -> Iterator[tuple]:
        """Answers (O, H, witnesses) of a ground goal from input context ``ctx``."""
        if isinstance(goal, FluentCall):
            for out, h in self.fluent(goal.atom, goal.positive, ctx):
                yield out, h, ((goal, h),)
        elif isinstance(goal, ConsiderCall):
            if goal.positive:
                for out, h in self.consider(goal.atom, ctx):
                    yield out, h, ((goal, h),)
            else:
                duals = self.compiled.dual_rules((CONSIDER, 1))
                for out, h, _ in self._dual_top(duals[0], Compound(CONSIDER, (goal.atom,)), ctx):
                    yield out, h, ((goal, h),)
        elif isinstance(goal, AbducibleCall):
            if signature(goal.atom) not in self.compiled.abducibles:
                raise EngineError(f"{goal.atom} is not a declared abducible")
            out = insert(TimedAbducible(goal.atom, goal.positive, 1), ctx)
            if out is not None:
                yield out, 1, ((goal, 1),)
        elif isinstance(goal, StarCall):
            yield from self._solve_star(goal, ctx)
        elif isinstance(goal, Neq):
            # head mismatch: the call cannot match the rule head for any value of its variables
            if unify(goal.left, goal.right) is None:
                yield ctx, 1, ()
        else:
            raise EngineError(f"cannot execute goal {goal!r}")

    def _groundings(self, goal: AugGoal, s: dict) -> Iterator[tuple]:
        g = substitute_goal(s, goal)
        free = _goal_vars(g)
        if not free or isinstance(g, Neq):
            yield g, s
            return
        for values in itertools.product(self.domain, repeat=len(free)):
            s2 = dict(s)
            s2.update(zip(free, values))
            yield substitute_goal(s2, goal), s2

    def _solve_body(self, goals: tuple, ctx: Context, s: dict, wits: tuple) -> Iterator[tuple]:
        if not goals:
            yield ctx, s, wits
            return
        for g, s2 in self._groundings(goals[0], s):
            for out, _, w in self.solve(g, ctx):
                yield from self._solve_body(goals[1:], out, s2, wits + w)

    def _solve_star(self, goal: StarCall, ctx: Context) -> Iterator[tuple]:
        clauses = self.compiled.star_rules(goal.name, goal.arity, goal.index)
        body_clauses = []
        for clause in clauses:
            if clause.relay:
                c = rename_aug(clause, self._fresh)
                s = _unify_args(c.args, goal.args)
                if s is None:
                    continue
                for out, _, w in self._solve_body(c.body, ctx, s, ()):
                    yield out, c.head_time, w
            else:
                body_clauses.append(clause)
        if not body_clauses:
            return
        universal = body_clauses[0].universal
        if not universal:
            yield from self._falsify(body_clauses, goal.args, ctx, {})
            return
        assignments = [dict(zip(universal, vals))
                       for vals in itertools.product(self.domain, repeat=len(universal))]
        yield from self._falsify_all(body_clauses, goal.args, ctx, assignments, ())

    def _falsify_all(self, clauses, args, ctx, assignments, wits) -> Iterator[tuple]:
        if not assignments:
            h = max((t for _, t in wits), default=1)
            yield ctx, h, wits
            return
        for out, _, w in self._falsify(clauses, args, ctx, assignments[0]):
            yield from self._falsify_all(clauses, args, out, assignments[1:], wits + w)

    def _falsify(self, clauses, args, ctx: Context, fixed: dict) -> Iterator[tuple]:
        for clause in clauses:
            c = clause
            if fixed:
                c = AugRule(c.name, tuple(apply(fixed, a) for a in c.args),
                            tuple(substitute_goal(fixed, g) for g in c.body),
                            c.closing, c.head_time, (), c.rule_id)
            c = rename_aug(c, self._fresh)
            s = _unify_args(c.args, args)
            if s is None:
                continue
            for out, _, wits in self._solve_body(c.body, ctx, s, ()):
                h = self.latest(wits, out)
                if h is not None:
                    yield out, h, wits

    # ------------------------------------------------------------ top-level query

    def is_unknown(self, atom: Term, qt: int) -> bool:
        """Fluent with no rule or fact and no update up to ``qt``."""
        sig = signature(atom)
        if self.compiled.positive_rules(sig):
            return False
        return not any(t <= qt for pos in (True, False) for t in self.store_times(atom, pos))

    def compute(self, goal: Literal, ctx: Context, qt: int) -> list[tuple]:
        """Latest answers (O, H, V) of ``goal`` up to ``qt``, one per output context."""
        if self.is_unknown(goal.atom, qt):
            return [(ctx, 1, UNDEFINED)]
        best: dict = {}
        for out, h in self.fluent(goal.atom, goal.positive, ctx):
            if h > qt:
                continue
            k = out.untimed()
            old = best.get(k)
            if old is None or (h, _ctx_order(old[0])) > (old[1], _ctx_order(out)):
                best[k] = (out, h)
        if not best:
            return [(ctx, 0, FALSE)]
        return [(out, h, TRUE) for out, h in best.values()]

    def holds(self, goal: Literal, ctx: Context = EMPTY, qt: int = 1) -> list[HoldsAnswer]:
        if not 1 <= qt <= self.limit:
            raise EngineError(f"query time {qt} outside 1..{self.limit}")
        if not is_ground(goal.atom):
            raise EngineError(f"query goal {goal} is not ground")
        sig = signature(goal.atom)
        if sig in self.compiled.abducibles or sig[0] in (CONSIDER, RULE_NAME):
            raise EngineError(f"{goal.atom} is not a source fluent")
        self.activate_pending(qt)
        other = compl(goal)
        answers = []
        for out, h, v in self.compute(goal, ctx, qt):
            if v is FALSE:
                continue
            comp = [(o2, h2, v2) for o2, h2, v2 in self.compute(other, out, qt)
                    if v2 is not TRUE or o2.untimed() == out.untimed()]
            h2, v2 = max(((h2, v2) for _, h2, v2 in comp if v2 is not FALSE),
                         default=(0, FALSE), key=lambda p: p[0])
            value = verify_holds(h, v, h2, v2)
            if value is not None and value is not FALSE:
                answers.append(HoldsAnswer(goal, qt, out, value, h))
        if not answers:
            return [HoldsAnswer(goal, qt, ctx, FALSE, 0)]
        answers.sort(key=lambda a: (_VALUE_ORDER[a.value], _ctx_order(a.context)))
        return answers

    def query(self, q: Query) -> list[HoldsAnswer]:
        return self.holds(q.goal, EMPTY, q.time)

    # ------------------------------------------------------------ inspection

    def valid_tables(self) -> list[Table]:
        return [t for t in self.tables.values() if t.status == "complete"]

    def tables_text(self) -> str:
        lines = []
        for key, tab in self.tables.items():
            answers = " ".join(f"{c}@{h}" for c, h in tab.answers)
            lines.append(f"{format_key(key)} {tab.status}: {answers}")
        return "\n".join(lines)

    def stats_text(self) -> str:
        self.stats.dual_rules_generated = self.compiled.dual_rules_generated
        return self.stats.as_text()


def timed(atom: Term, abducibles) -> Term:
    """``a`` -> ``a(T)``: the abducible lifted with its abduction-time argument."""
    if signature(atom) not in abducibles:
        raise EngineError(f"{atom} is not a declared abducible")
    return with_args(atom, (Var("T"),))


def _ctx_order(c: Context) -> tuple:
    return tuple(e.sort_key() for e in c.entries)


def _unify_args(pattern: tuple, args: tuple) -> Optional[dict]:
    if len(pattern) != len(args):
        return None
    s: Optional[dict] = {}
    for p, a in zip(pattern, args):
        s = unify(p, a, s)
        if s is None:
            return None
    return s


def _goal_vars(g: AugGoal) -> list:
    from .transform import _goal_terms

    seen: dict = {}
    for t in _goal_terms(g):
        for v in term_vars(t):
            seen.setdefault(v)
    return list(seen)
