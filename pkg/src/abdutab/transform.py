"""Compile a validated program into context- and time-augmented clauses.

Every source predicate ``p(X..)`` becomes ``p(X.., I, O, H)``: input context,
output context, holds-time. Body fluents are called through the tabled
``fluent/4``, abducibles are routed through ``consider/1``, each rule gets a
rule-name fluent ``#r(Head, Body)`` as its first goal, and negation is compiled
into dual ``not_p`` predicates, built on first use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .frontend import EXPECT, EXPECT_NOT, Program
from .kernel import (Atom, Compound, Literal, Rule, Term, Var, apply, args_of, functor_of,
                     mk, mk_list, signature, term_vars)

RULE_NAME = "#r"
CONSIDER = "consider"


# ---------------------------------------------------------------- goals

@dataclass(frozen=True)
class FluentCall:
    """``fluent(F, I, O, H)``, or ``fluent(not_F, I, O, H)`` when not positive."""
    atom: Term
    positive: bool = True

    def negate(self) -> "FluentCall":
        return FluentCall(self.atom, not self.positive)

    def render(self, i: str, o: str, h: str) -> str:
        return f"fluent({_signed_name(self.atom, self.positive)},{i},{o},{h})"

    def extended(self, i: str, o: str, h: str) -> str:
        return _extend_text(_signed_name(self.atom, self.positive), i, o, h)


@dataclass(frozen=True)
class ConsiderCall:
    atom: Term
    positive: bool = True

    def negate(self) -> "ConsiderCall":
        return ConsiderCall(self.atom, not self.positive)

    def render(self, i: str, o: str, h: str) -> str:
        name = CONSIDER if self.positive else f"not_{CONSIDER}"
        return f"{name}({self.atom},{i},{o},{h})"

    extended = render


@dataclass(frozen=True)
class AbducibleCall:
    """Abducible insertion ``a(I,O,H)`` / ``not_a(I,O,H)``."""
    atom: Term
    positive: bool = True

    def negate(self) -> "AbducibleCall":
        return AbducibleCall(self.atom, not self.positive)

    def render(self, i: str, o: str, h: str) -> str:
        if isinstance(self.atom, Var):
            sign = "" if self.positive else "not "
            return f"insert({sign}{self.atom}@{h},{i},{o})"
        return _extend_text(_signed_name(self.atom, self.positive), i, o, h)

    extended = render


@dataclass(frozen=True)
class StarCall:
    """Call of the i-th dualized rule ``p*i(Args, I, O, H)``."""
    name: str
    arity: int
    index: int
    args: tuple

    def render(self, i: str, o: str, h: str) -> str:
        return _extend_text(mk(f"{self.name}*{self.index}", *self.args), i, o, h)

    extended = render


@dataclass(frozen=True)
class Neq:
    left: Term
    right: Term

    def render(self, i: str, o: str, h: str) -> str:
        return f"{self.left} \\= {self.right}"


@dataclass(frozen=True)
class Special:
    """Reserved-predicate goal in the consider machinery (display only)."""
    text: str

    def render(self, i: str, o: str, h: str) -> str:
        return self.text.format(I=i, O=o, H=h)


AugGoal = Union[FluentCall, ConsiderCall, AbducibleCall, StarCall, Neq, Special]
TIMED_GOALS = (FluentCall, ConsiderCall, AbducibleCall, StarCall)


def _signed_name(atom: Term, positive: bool) -> Term:
    if positive:
        return atom
    return mk(f"not_{functor_of(atom)}", *args_of(atom))


def _extend_text(t: Term, i: str, o: str, h: str) -> str:
    inner = ",".join([*(str(a) for a in args_of(t)), i, o, h])
    return f"{functor_of(t)}({inner})"


def negate_goal(g: AugGoal) -> AugGoal:
    return g.negate()


# ---------------------------------------------------------------- clauses

@dataclass(frozen=True)
class AugRule:
    name: str                    # printed head predicate: q, not_q, q*1, consider, ...
    args: tuple                  # source-level head arguments
    body: tuple = ()
    closing: Optional[str] = None  # latest | verify_pos | verify_lits
    head_time: Optional[int] = None  # fixed holds-time of facts and relays
    universal: tuple = ()        # body-only variables quantified over the domain (duals)
    rule_id: Optional[str] = None
    relay: bool = False          # head passes its input context through unchanged

    def head_term(self) -> Term:
        return mk(self.name, *self.args)

    def variables(self) -> list[Var]:
        seen: dict = {}
        for a in self.args:
            for v in term_vars(a):
                seen.setdefault(v)
        for g in self.body:
            for t in _goal_terms(g):
                for v in term_vars(t):
                    seen.setdefault(v)
        return list(seen)

    def __str__(self) -> str:
        return format_rule(self)


def _goal_terms(g: AugGoal) -> tuple:
    if isinstance(g, (FluentCall, ConsiderCall, AbducibleCall)):
        return () if _is_rule_name(g.atom) else (g.atom,)
    if isinstance(g, StarCall):
        return g.args
    if isinstance(g, Neq):
        return (g.left, g.right)
    return ()


def _is_rule_name(t: Term) -> bool:
    return not isinstance(t, Var) and functor_of(t) == RULE_NAME


def substitute_goal(s, g: AugGoal) -> AugGoal:
    if isinstance(g, (FluentCall, ConsiderCall, AbducibleCall)):
        if _is_rule_name(g.atom):
            return g
        return type(g)(apply(s, g.atom), g.positive)
    if isinstance(g, StarCall):
        return StarCall(g.name, g.arity, g.index, tuple(apply(s, a) for a in g.args))
    if isinstance(g, Neq):
        return Neq(apply(s, g.left), apply(s, g.right))
    return g


def rename_aug(rule: AugRule, fresh) -> AugRule:
    renaming = {v: fresh.fresh() for v in rule.variables()}
    if not renaming:
        return rule
    return AugRule(rule.name, tuple(apply(renaming, a) for a in rule.args),
                   tuple(substitute_goal(renaming, g) for g in rule.body),
                   rule.closing, rule.head_time,
                   tuple(renaming.get(v, v) for v in rule.universal),
                   rule.rule_id, rule.relay)


def format_rule(rule: AugRule) -> str:
    """Source-like rendering with explicit context and time arguments."""
    timed = [g for g in rule.body if isinstance(g, TIMED_GOALS)]
    head_o = "I" if rule.relay or not timed else "O"
    head_h = "H" if rule.head_time is None else str(rule.head_time)
    head = _extend_text(rule.head_term(), "I", head_o, head_h)
    if rule.body and all(isinstance(g, Special) for g in rule.body):
        head = str(rule.head_term())
    if not rule.body:
        return head + "."
    parts, rendered, ctx = [], [], "I"
    n_timed = len(timed)
    k = 0
    for g in rule.body:
        if isinstance(g, TIMED_GOALS):
            k += 1
            out = "O" if k == n_timed else f"R{k}"
            negated_last = rule.closing in ("verify_pos", "verify_lits") and k == n_timed
            t = "H" if (n_timed == 1 and rule.closing is None) or negated_last else f"H{k}"
            if rule.closing == "latest" and n_timed == 1 and rule.name.startswith("not_"):
                t = "H"
            parts.append(g.render(ctx, out, t))
            rendered.append((g, ctx, out, t))
            ctx = out
        else:
            parts.append(g.render(ctx, ctx, head_h))
    if rule.closing == "latest" and not (n_timed == 1 and rule.name.startswith("not_")):
        items = ",".join(g.extended(i, o, t) for g, i, o, t in rendered)
        parts.append(f"latest([{items}],H)")
    elif rule.closing in ("verify_pos", "verify_lits") and len(rendered) > 1:
        items = ",".join(g.extended(i, o, t) for g, i, o, t in rendered[:-1])
        parts.append(f"{rule.closing}([{items}],H)")
    return f"{head} <- {', '.join(parts)}."


# ---------------------------------------------------------------- passes

def consider_term(a: Term) -> Term:
    return Compound(CONSIDER, (a,))


def preprocess_abducibles(program: Program) -> Program:
    """Replace every body occurrence of an abducible ``A`` by ``consider(A)``."""
    clauses = []
    for c in program.clauses:
        body = tuple(Literal(consider_term(l.atom), l.positive)
                     if not isinstance(l.atom, Var) and program.is_abducible(l.atom) else l
                     for l in c.body)
        clauses.append(Rule(c.id, c.head, body))
    return Program(tuple(clauses), program.abducibles, program.fluents)


def _name_term(rule: Rule, disambiguate: bool) -> Term:
    body = mk_list(l.as_term() for l in rule.body)
    args = (rule.head, body) + ((Atom(rule.id),) if disambiguate else ())
    return _freeze_vars(Compound(RULE_NAME, args))


def _freeze_vars(t: Term) -> Term:
    # rule-name fluents name the rule as a whole; their variables are not goal variables
    if isinstance(t, Var):
        return Atom(t.id)
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(_freeze_vars(a) for a in t.args))
    return t


def rule_name_fluents(program: Program) -> dict[str, Term]:
    """Rule id -> rule-name fluent for every non-fact clause (of the preprocessed program)."""
    pre = preprocess_abducibles(program) if not _is_preprocessed(program) else program
    names: dict[str, Term] = {}
    seen: dict[Term, int] = {}
    rules = [c for c in pre.clauses if not c.is_fact]
    for c in rules:
        plain = _name_term(c, False)
        seen[plain] = seen.get(plain, 0) + 1
    for c in rules:
        plain = _name_term(c, False)
        names[c.id] = plain if seen[plain] == 1 else _name_term(c, True)
    return names


def _is_preprocessed(program: Program) -> bool:
    return not any(not isinstance(l.atom, Var) and program.is_abducible(l.atom)
                   for c in program.clauses for l in c.body)


def assign_rule_names(program: Program) -> tuple[Program, dict[str, Term]]:
    """Prepend each rule's rule-name fluent to its body; facts stay unnamed."""
    names = rule_name_fluents(program)
    clauses = []
    for c in program.clauses:
        if c.id in names:
            clauses.append(Rule(c.id, c.head, (Literal(names[c.id]),) + c.body))
        else:
            clauses.append(c)
    return Program(tuple(clauses), program.abducibles, program.fluents), names


def _body_goal(lit: Literal) -> AugGoal:
    a = lit.atom
    if isinstance(a, Compound) and a.functor == CONSIDER:
        return ConsiderCall(a.args[0], lit.positive)
    return FluentCall(a, lit.positive)


def augment(rule: Rule) -> AugRule:
    name, _ = signature(rule.head)
    if rule.is_fact:
        return AugRule(name, args_of(rule.head), head_time=1, rule_id=rule.id, relay=True)
    return AugRule(name, args_of(rule.head), tuple(_body_goal(l) for l in rule.body),
                   closing="latest", rule_id=rule.id)


def consider_machinery(sig: tuple[str, int]) -> list[AugRule]:
    """Display form of consider_ab/3, consider/4 and the abducible insertions for ``sig``."""
    name, arity = sig
    xs = tuple(Var(f"X{k}") for k in range(1, arity + 1))
    a = mk(name, *xs)
    ab = AugRule("consider_ab", (a, Var("E"), Var("T")), (
        Special(f"timed({a},A_T)"),
        Special(f"fluent({EXPECT}({a}),[A_T],R,H1)"),
        Special(f"fluent(not_{EXPECT_NOT}({a}),R,E,H2)"),
        Special(f"latest([{EXPECT}({a},[A_T],R,H1),not_{EXPECT_NOT}({a},R,E,H2)],T)"),
    ))
    cons = AugRule(CONSIDER, (a, Var("I"), Var("O"), Var("H")), (
        Special(f"consider_ab({a},E,H)"), Special("produce(O,I,E)")))
    timed_h = mk(name, *xs, Var("H"))
    pos = AugRule(name, xs + (Var("I"), Var("O"), Var("H")),
                  (Special(f"insert({timed_h},I,O)"),))
    neg = AugRule(f"not_{name}", xs + (Var("I"), Var("O"), Var("H")),
                  (Special(f"insert(not {timed_h},I,O)"),))
    return [ab, cons, pos, neg]


def _head_vars(n: int) -> tuple:
    if n == 1:
        return (Var("A"),)
    return tuple(Var(f"A{k}") for k in range(1, n + 1))


def dualize(sig: tuple[str, int], rules: list[AugRule]) -> list[AugRule]:
    """Dual rules for ``sig``: ``not_p`` chaining ``p*1..p*n`` plus their clauses.

    Each ``p*i`` falsifies rule i one body goal at a time, keeping the goals
    before it positive; heads that cannot match yield disequality relays.
    """
    name, arity = sig
    xs = _head_vars(arity)
    if not rules:
        return [AugRule(f"not_{name}", xs, head_time=1, relay=True)]
    top = AugRule(f"not_{name}", xs,
                  tuple(StarCall(name, arity, i, xs) for i in range(1, len(rules) + 1)),
                  closing="latest")
    out = [top]
    for i, rule in enumerate(rules, start=1):
        star = f"{name}*{i}"
        first_pos: dict = {}
        for j, t in enumerate(rule.args):
            if isinstance(t, Var):
                if t in first_pos:
                    out.append(AugRule(star, xs, (Neq(xs[first_pos[t]], xs[j]),),
                                       head_time=1, rule_id=rule.rule_id, relay=True))
                else:
                    first_pos[t] = j
            else:
                out.append(AugRule(star, xs, (Neq(xs[j], t),),
                                   head_time=1, rule_id=rule.rule_id, relay=True))
        head_vars = {v for a in rule.args for v in term_vars(a)}
        local = tuple(v for v in rule.variables() if v not in head_vars)
        for k in range(len(rule.body)):
            body = rule.body[:k] + (negate_goal(rule.body[k]),)
            out.append(AugRule(star, rule.args, body, closing="verify_pos",
                               universal=local, rule_id=rule.rule_id))
    return out


def consider_dual() -> list[AugRule]:
    a = Var("A")
    return [
        AugRule(f"not_{CONSIDER}", (a,), (StarCall(CONSIDER, 1, 1, (a,)),), closing="latest"),
        AugRule(f"{CONSIDER}*1", (a,), (AbducibleCall(a, False),)),
        AugRule(f"{CONSIDER}*1", (a,), (FluentCall(Compound(EXPECT, (a,)), False),)),
        AugRule(f"{CONSIDER}*1", (a,), (FluentCall(Compound(EXPECT, (a,))),
                                        FluentCall(Compound(EXPECT_NOT, (a,)))),
                closing="verify_lits"),
    ]


# ---------------------------------------------------------------- compiled program

@dataclass
class CompiledProgram:
    source: Program
    program: Program                      # preprocessed and named
    rules: dict                           # (name, arity) -> list[AugRule]
    rule_names: dict                      # rule id -> rule-name fluent
    initial_facts: list                   # (fluent, 1): rule-name fluents at the initial time
    abducibles: frozenset
    _duals: dict = field(default_factory=dict)
    dual_rules_generated: int = 0

    def positive_rules(self, sig) -> list[AugRule]:
        return self.rules.get(sig, [])

    def dual_rules(self, sig) -> list[AugRule]:
        """Memoized dual rules for ``sig``, built on first request."""
        if sig not in self._duals:
            if sig == (CONSIDER, 1):
                duals = consider_dual()
            else:
                duals = dualize(sig, self.positive_rules(sig))
            self._duals[sig] = duals
            self.dual_rules_generated += len(duals)
        return self._duals[sig]

    def star_rules(self, name: str, arity: int, index: int) -> list[AugRule]:
        star = f"{name}*{index}"
        return [r for r in self.dual_rules((name, arity)) if r.name == star]

    def has_dual(self, sig) -> bool:
        return sig in self._duals

    def signatures(self) -> list:
        """Source predicates in first-appearance order, expectations included."""
        seen: dict = {}
        for c in self.source.clauses:
            seen.setdefault(signature(c.head))
            for l in c.body:
                if not self.source.is_abducible(l.atom):
                    seen.setdefault(signature(l.atom))
        for sig in sorted(self.source.fluents):
            seen.setdefault(sig)
        for a in sorted(self.abducibles):
            seen.setdefault((EXPECT, 1))
            seen.setdefault((EXPECT_NOT, 1))
        return list(seen)

    def dump(self) -> str:
        """Full transform, duals included, in source-like syntax."""
        lines = ["% positive rules"]
        for sig in self.signatures():
            lines.extend(str(r) for r in self.positive_rules(sig))
        lines.append("% initial facts")
        for f, t in self.initial_facts:
            lines.append(f"{_extend_text(f, 'I', 'I', str(t))}.")
        lines.append("% abduction")
        for sig in sorted(self.abducibles):
            lines.extend(str(r) for r in consider_machinery(sig))
        lines.append("% dual rules")
        for sig in self.signatures():
            lines.extend(str(r) for r in self.dual_rules(sig))
        if self.abducibles:
            lines.extend(str(r) for r in self.dual_rules((CONSIDER, 1)))
        return "\n".join(lines) + "\n"


def compile_program(source: Program) -> CompiledProgram:
    pre = preprocess_abducibles(source)
    named, names = assign_rule_names(pre)
    rules: dict = {}
    for c in named.clauses:
        rules.setdefault(signature(c.head), []).append(augment(c))
    initial = [(names[rid], 1) for rid in sorted(names, key=lambda r: int(r[1:]))]
    return CompiledProgram(source, named, rules, names, initial, source.abducibles)
