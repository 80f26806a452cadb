"""Parsing and validation of programs, update scripts, and queries.

Programs (``.alp``)::

    abducible a/0, b/0.
    fluent f/0.            % updatable fluent with no defining rules
    q <- a.
    s <- b, not q.
    expect(a).

Update scripts (``.upd``) may interleave updates and queries::

    #limit 10.
    #update 2: assert(~r1), assert(f).
    ?- holds(not q) at 3.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .kernel import Atom, Compound, Literal, Rule, Term, Var, args_of, is_ground, signature

RESERVED = {"consider", "consider_ab", "fluent", "holds", "latest", "verify_pos",
            "verify_lits", "timed", "extend", "produce", "insert", "compute",
            "compl", "verify_holds", "not", "assert"}
EXPECT = "expect"
EXPECT_NOT = "expect_not"
DEFAULT_LIMIT = 32


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.message}"


class SourceError(Exception):
    """Raised with every diagnostic found in a source text."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


# ---------------------------------------------------------------- tokens

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>%[^\n]*)
  | (?P<arrow><-|:-)
  | (?P<query>\?-)
  | (?P<directive>\#[a-z]+)
  | (?P<num>\d+)
  | (?P<ident>[a-z][A-Za-z0-9_]*)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<punct>[(),./~:\[\]@])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out, pos, line, line_start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise SourceError([Diagnostic(line, pos - line_start + 1,
                                          f"unexpected character {text[pos]!r}")])
        kind = m.lastgroup
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Optional[Token] = None) -> SourceError:
        tok = tok or self.tok
        return SourceError([Diagnostic(tok.line, tok.col, msg)])

    def take(self, kind: Optional[str] = None, text: Optional[str] = None) -> Token:
        t = self.tok
        if (kind and t.kind != kind) or (text is not None and t.text != text):
            want = text or kind
            got = t.text or "end of input"
            raise self.error(f"expected {want!r}, found {got!r}")
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("punct", "ident", "arrow")

    def term(self) -> Term:
        t = self.tok
        if t.kind == "var":
            self.i += 1
            return Var(t.text)
        if t.kind in ("ident", "num"):
            self.i += 1
            if self.at("(") and t.kind == "ident":
                self.i += 1
                args = [self.term()]
                while self.at(","):
                    self.i += 1
                    args.append(self.term())
                self.take("punct", ")")
                return Compound(t.text, tuple(args))
            return Atom(t.text)
        raise self.error(f"expected a term, found {t.text or 'end of input'!r}")

    def literal(self) -> Literal:
        if self.tok.kind == "ident" and self.tok.text == "not" and self.toks[self.i + 1].text != "(":
            self.i += 1
            return Literal(self.term(), False)
        return Literal(self.term(), True)

    def signature_list(self) -> list[tuple[tuple[str, int], Token]]:
        sigs = []
        while True:
            name = self.take("ident")
            self.take("punct", "/")
            arity = self.take("num")
            sigs.append(((name.text, int(arity.text)), name))
            if not self.at(","):
                return sigs
            self.i += 1


# ---------------------------------------------------------------- programs

@dataclass(frozen=True)
class Program:
    clauses: tuple = ()
    abducibles: frozenset = frozenset()
    fluents: frozenset = frozenset()

    @property
    def rules(self) -> tuple:
        return tuple(c for c in self.clauses if not is_expectation(c.head))

    @property
    def expectations(self) -> tuple:
        return tuple(c for c in self.clauses if is_expectation(c.head))

    def rule(self, rule_id: str) -> Optional[Rule]:
        return next((c for c in self.clauses if c.id == rule_id), None)

    def is_abducible(self, t: Term) -> bool:
        return signature(t) in self.abducibles

    def defined(self) -> set:
        return {signature(c.head) for c in self.clauses}

    def constants(self) -> set:
        out: set = set()
        for c in self.clauses:
            for t in (c.head, *(l.atom for l in c.body)):
                _collect_constants(t, out)
        return out


def is_expectation(t: Term) -> bool:
    return isinstance(t, Compound) and t.functor in (EXPECT, EXPECT_NOT) and len(t.args) == 1


def _collect_constants(t: Term, out: set) -> None:
    for a in args_of(t):
        if isinstance(a, Atom):
            out.add(a)
        elif isinstance(a, Compound):
            _collect_constants(a, out)


def parse_term(text: str) -> Term:
    p = _Parser(text)
    t = p.term()
    p.take("eof")
    return t


def parse_program(text: str) -> Program:
    p = _Parser(text)
    clauses: list[Rule] = []
    where: dict[str, Token] = {}
    abducibles: dict = {}
    fluents: dict = {}
    while p.tok.kind != "eof":
        start = p.tok
        if start.kind == "ident" and start.text in ("abducible", "fluent") \
                and p.toks[p.i + 1].kind == "ident":
            p.i += 1
            target = abducibles if start.text == "abducible" else fluents
            for sig, tok in p.signature_list():
                target.setdefault(sig, tok)
            p.take("punct", ".")
            continue
        head = p.term()
        body: list[Literal] = []
        if p.tok.kind == "arrow":
            p.i += 1
            body.append(p.literal())
            while p.at(","):
                p.i += 1
                body.append(p.literal())
        p.take("punct", ".")
        rule_id = f"r{len(clauses) + 1}"
        clauses.append(Rule(rule_id, head, tuple(body)))
        where[rule_id] = start
    program = Program(tuple(clauses), frozenset(abducibles), frozenset(fluents))
    diags = _validate(program, where, abducibles, fluents)
    if diags:
        raise SourceError(diags)
    return program


def _validate(program: Program, where: dict, abducibles: dict, fluents: dict) -> list[Diagnostic]:
    diags: list[Diagnostic] = []

    def report(tok: Token, msg: str) -> None:
        diags.append(Diagnostic(tok.line, tok.col, msg))

    for sig, tok in fluents.items():
        if sig in abducibles:
            report(tok, f"{sig[0]}/{sig[1]} declared both abducible and fluent")
    arities: dict[str, tuple[int, Token]] = {}
    defined = program.defined()
    for c in program.clauses:
        tok = where[c.id]
        for t in (c.head, *(l.atom for l in c.body)):
            if isinstance(t, Var):
                report(tok, f"variable {t} used as a goal")
                continue
            name, arity = signature(t)
            seen = arities.setdefault(name, (arity, tok))
            if seen[0] != arity:
                report(tok, f"{name} used with arities {seen[0]} and {arity}")
            if name in RESERVED or name.startswith("not_") or name.startswith("#"):
                report(tok, f"reserved predicate name {name!r}")
        if isinstance(c.head, Var):
            continue
        if program.is_abducible(c.head):
            report(tok, f"abducible {c.head} has a rule")
        if c.is_fact and not is_ground(c.head):
            report(tok, f"fact {c.head} must be ground")
        if is_expectation(c.head):
            arg = c.head.args[0]
            if isinstance(arg, Var) or not program.is_abducible(arg):
                report(tok, f"{c.head}: argument must be a declared abducible")
            elif not _flat(arg):
                report(tok, f"{c.head}: abducible arguments must be constants or variables")
        elif signature(c.head)[0] in (EXPECT, EXPECT_NOT):
            report(tok, f"{c.head}: expectations take exactly one argument")
        elif not _flat(c.head):
            report(tok, f"{c.head}: nested terms are not supported")
        for lit in c.body:
            t = lit.atom
            if isinstance(t, Var):
                continue
            if not _flat(t) and not is_expectation(t):
                report(tok, f"{t}: nested terms are not supported")
            sig = signature(t)
            if sig in abducibles or sig in defined or sig in fluents:
                continue
            if sig[0] in (EXPECT, EXPECT_NOT):
                continue
            report(tok, f"undeclared abducible `{t}` (declare it, or `fluent {sig[0]}/{sig[1]}.`)")
    return diags


def _flat(t: Term) -> bool:
    return all(isinstance(a, (Atom, Var)) for a in args_of(t))


def format_program(program: Program) -> str:
    lines = []
    for kind, sigs in (("abducible", program.abducibles), ("fluent", program.fluents)):
        if sigs:
            lines.append(f"{kind} " + ", ".join(f"{n}/{a}" for n, a in sorted(sigs)) + ".")
    lines.extend(str(c) for c in program.clauses)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- updates and queries

@dataclass(frozen=True)
class UpdateRecord:
    timestamp: int
    target: Term
    positive: bool = True
    rule_id: Optional[str] = None

    def __str__(self) -> str:
        sign = "" if self.positive else "~"
        return f"#update {self.timestamp}: assert({sign}{self.rule_id or self.target})."

    @property
    def signed(self) -> tuple:
        return (self.target, self.positive)


@dataclass(frozen=True)
class Query:
    goal: Literal
    time: int

    def __str__(self) -> str:
        return f"?- holds({self.goal}) at {self.time}."


@dataclass
class UpdateScript:
    limit: int = DEFAULT_LIMIT
    updates: list = field(default_factory=list)
    queries: list = field(default_factory=list)
    # updates and queries in script order, for batch replay
    commands: list = field(default_factory=list)


def format_updates(script: UpdateScript) -> str:
    lines = [f"#limit {script.limit}."]
    lines.extend(str(c) for c in script.commands)
    return "\n".join(lines) + "\n"


def _query_after_marker(p: _Parser) -> tuple[Literal, int]:
    p.take("ident", "holds")
    p.take("punct", "(")
    goal = p.literal()
    p.take("punct", ")")
    p.take("ident", "at")
    when = p.take("num")
    if p.at("."):
        p.i += 1
    return goal, int(when.text)


def parse_query(text: str, limit: int = DEFAULT_LIMIT) -> Query:
    p = _Parser(text)
    if p.tok.kind == "query":
        p.i += 1
    start = p.tok
    goal, when = _query_after_marker(p)
    p.take("eof")
    return _check_query(goal, when, limit, start)


def _check_query(goal: Literal, when: int, limit: int, tok: Token) -> Query:
    if isinstance(goal.atom, Var):
        raise SourceError([Diagnostic(tok.line, tok.col, "malformed goal: a bare variable")])
    if when < 1 or when > limit:
        raise SourceError([Diagnostic(tok.line, tok.col,
                                      f"query time {when} outside 1..{limit}")])
    return Query(goal, when)


def resolve_target(program: Program, target: Term) -> tuple[Term, Optional[str]]:
    """Map a written update target to the fluent it updates.

    ``rN`` names the rule-name fluent of rule N; anything else is a source fluent.
    """
    from .transform import rule_name_fluents

    if isinstance(target, Atom) and re.fullmatch(r"r\d+", target.name) \
            and signature(target) not in program.defined() | set(program.fluents):
        rule = program.rule(target.name)
        if rule is None:
            raise ValueError(f"unknown rule id {target.name}")
        if rule.is_fact:
            raise ValueError(f"{target.name} is a fact and has no rule-name fluent")
        return rule_name_fluents(program)[target.name], target.name
    if not is_ground(target):
        raise ValueError(f"update target {target} must be ground")
    if program.is_abducible(target):
        raise ValueError(f"abducible {target} cannot be updated")
    name, arity = signature(target)
    known = program.defined() | set(program.fluents) | {(n, a) for n, a in
                                                        _body_signatures(program)}
    if (name, arity) not in known and name not in (EXPECT, EXPECT_NOT):
        raise ValueError(f"unknown fluent {target}")
    if name in RESERVED:
        raise ValueError(f"reserved predicate {name} cannot be updated")
    return target, None


def _body_signatures(program: Program) -> Iterator[tuple]:
    for c in program.clauses:
        for lit in c.body:
            if not isinstance(lit.atom, Var):
                yield signature(lit.atom)


def parse_update_line(p: _Parser, program: Program, limit: int) -> list[UpdateRecord]:
    """Parse ``2: assert(~r1), assert(p).`` after the ``#update`` directive."""
    start = p.tok
    ts = int(p.take("num").text)
    p.take("punct", ":")
    records = []
    while True:
        tok = p.tok
        p.take("ident", "assert")
        p.take("punct", "(")
        positive = True
        if p.at("~"):
            p.i += 1
            positive = False
        written = p.term()
        p.take("punct", ")")
        try:
            target, rule_id = resolve_target(program, written)
        except ValueError as exc:
            raise p.error(str(exc), tok) from None
        records.append(UpdateRecord(ts, target, positive, rule_id))
        if not p.at(","):
            break
        p.i += 1
    p.take("punct", ".")
    if ts < 2:
        raise p.error(f"timestamp {ts}: time 1 is reserved for the initial program", start)
    if ts > limit:
        raise p.error(f"timestamp {ts} exceeds the time limit {limit}", start)
    return records


def parse_updates(text: str, program: Program, limit: Optional[int] = None) -> UpdateScript:
    p = _Parser(text)
    script = UpdateScript(limit if limit is not None else DEFAULT_LIMIT)
    last = 0
    while p.tok.kind != "eof":
        tok = p.tok
        if tok.kind == "directive" and tok.text == "#limit":
            p.i += 1
            value = int(p.take("num").text)
            p.take("punct", ".")
            if value < 1:
                raise p.error("limit must be at least 1", tok)
            if script.commands:
                raise p.error("#limit must precede updates and queries", tok)
            if limit is None:
                script.limit = value
        elif tok.kind == "directive" and tok.text == "#update":
            p.i += 1
            records = parse_update_line(p, program, script.limit)
            if records[0].timestamp < last:
                raise p.error(f"decreasing timestamps: {records[0].timestamp} after {last}", tok)
            last = records[0].timestamp
            script.updates.extend(records)
            script.commands.extend(records)
        elif tok.kind == "query":
            p.i += 1
            goal, when = _query_after_marker(p)
            q = _check_query(goal, when, script.limit, tok)
            script.queries.append(q)
            script.commands.append(q)
        else:
            raise p.error(f"expected '#limit', '#update' or '?-', found {tok.text or 'end of input'!r}")
    return script
