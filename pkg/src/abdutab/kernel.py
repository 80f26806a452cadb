"""Terms, literals, rules, and the unification machinery over them."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Mapping, Optional, Union


@dataclass(frozen=True)
class Atom:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Var:
    id: str

    def __str__(self) -> str:
        return self.id


@dataclass(frozen=True)
class Compound:
    functor: str
    args: tuple

    def __str__(self) -> str:
        inner = ",".join(str(a) for a in self.args)
        if self.functor == LIST:
            return f"[{inner}]"
        if self.functor == "not" and len(self.args) == 1:
            return f"not {self.args[0]}"
        return f"{self.functor}({inner})"


Term = Union[Atom, Var, Compound]
Substitution = Mapping[Var, Term]

# functor used for engine-internal list terms such as the body inside #r(...)
LIST = "[]"


def mk(functor: str, *args: Term) -> Term:
    """Build ``functor(args...)``, or a bare atom when there are no args."""
    if not args:
        return Atom(functor)
    return Compound(functor, tuple(args))


def mk_list(items) -> Compound:
    return Compound(LIST, tuple(items))


def functor_of(t: Term) -> str:
    if isinstance(t, Compound):
        return t.functor
    if isinstance(t, Atom):
        return t.name
    raise TypeError(f"variable {t} has no functor")


def args_of(t: Term) -> tuple:
    return t.args if isinstance(t, Compound) else ()


def signature(t: Term) -> tuple[str, int]:
    return functor_of(t), len(args_of(t))


def with_args(t: Term, extra) -> Term:
    """Append ``extra`` arguments to ``t`` (the ``extend/3`` reserved predicate)."""
    extra = tuple(extra)
    if not extra:
        return t
    return Compound(functor_of(t), args_of(t) + extra)


def term_vars(t: Term) -> Iterator[Var]:
    if isinstance(t, Var):
        yield t
    elif isinstance(t, Compound):
        for a in t.args:
            yield from term_vars(a)


def is_ground(t: Term) -> bool:
    return next(term_vars(t), None) is None


def term_key(t: Term) -> tuple:
    """Total order on terms: variables < atoms < compounds."""
    if isinstance(t, Var):
        return (0, t.id)
    if isinstance(t, Atom):
        return (1, t.name)
    return (2, len(t.args), t.functor, tuple(term_key(a) for a in t.args))


def walk(t: Term, s: Substitution) -> Term:
    while isinstance(t, Var) and t in s:
        t = s[t]
    return t


def apply(s: Substitution, t: Term) -> Term:
    t = walk(t, s)
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(apply(s, a) for a in t.args))
    return t


def _occurs(v: Var, t: Term, s: Substitution) -> bool:
    t = walk(t, s)
    if t == v:
        return True
    if isinstance(t, Compound):
        return any(_occurs(v, a, s) for a in t.args)
    return False


def unify(t1: Term, t2: Term, s: Optional[Substitution] = None) -> Optional[dict]:
    """Most general unifier of ``t1`` and ``t2`` extending ``s``; None on failure."""
    s = dict(s or {})
    stack = [(t1, t2)]
    while stack:
        a, b = stack.pop()
        a, b = walk(a, s), walk(b, s)
        if a == b:
            continue
        if isinstance(a, Var):
            if _occurs(a, b, s):
                return None
            s[a] = b
        elif isinstance(b, Var):
            if _occurs(b, a, s):
                return None
            s[b] = a
        elif isinstance(a, Compound) and isinstance(b, Compound):
            if a.functor != b.functor or len(a.args) != len(b.args):
                return None
            stack.extend(zip(a.args, b.args))
        else:
            return None
    return s


@dataclass(frozen=True)
class Literal:
    atom: Term
    positive: bool = True

    def __str__(self) -> str:
        return str(self.atom) if self.positive else f"not {self.atom}"

    def negate(self) -> "Literal":
        return Literal(self.atom, not self.positive)

    def as_term(self) -> Term:
        return self.atom if self.positive else Compound("not", (self.atom,))


@dataclass(frozen=True)
class Rule:
    id: str
    head: Term
    body: tuple = ()

    @property
    def is_fact(self) -> bool:
        return not self.body

    def __str__(self) -> str:
        if not self.body:
            return f"{self.head}."
        return f"{self.head} <- {', '.join(str(l) for l in self.body)}."

    def variables(self) -> list[Var]:
        seen: dict[Var, None] = {}
        for v in term_vars(self.head):
            seen.setdefault(v)
        for lit in self.body:
            for v in term_vars(lit.atom):
                seen.setdefault(v)
        return list(seen)


class FreshCounter:
    """Source of globally fresh variable names (``_G1``, ``_G2``, ...)."""

    def __init__(self) -> None:
        self._it = itertools.count(1)

    def fresh(self) -> Var:
        return Var(f"_G{next(self._it)}")


def rename_apart(rule: Rule, fresh: FreshCounter) -> Rule:
    renaming = {v: fresh.fresh() for v in rule.variables()}
    if not renaming:
        return rule
    return Rule(
        rule.id,
        apply(renaming, rule.head),
        tuple(Literal(apply(renaming, l.atom), l.positive) for l in rule.body),
    )
