"""Abductive contexts: consistent, canonically ordered sets of timed abducibles."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .kernel import Term, is_ground, term_key

# time of an abducible whose abduction time is not known yet (see ``timed``)
UNRESOLVED = 0


@dataclass(frozen=True)
class TimedAbducible:
    atom: Term
    positive: bool = True
    time: int = 1

    def __str__(self) -> str:
        sign = "" if self.positive else "not "
        return f"{sign}{self.atom}@{self.time}"

    @property
    def signed(self) -> tuple:
        return (self.atom, self.positive)

    def sort_key(self) -> tuple:
        return (term_key(self.atom), not self.positive, self.time)

    def retimed(self, time: int) -> "TimedAbducible":
        return TimedAbducible(self.atom, self.positive, time)


@dataclass(frozen=True)
class Context:
    entries: tuple = ()

    def __str__(self) -> str:
        return "[" + ", ".join(str(e) for e in self.entries) + "]"

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def untimed(self) -> frozenset:
        return frozenset(e.signed for e in self.entries)

    def is_consistent(self) -> bool:
        seen: dict = {}
        for e in self.entries:
            if seen.setdefault(e.atom, e.positive) != e.positive:
                return False
        return True

    def retime(self, atom: Term, positive: bool, time: int) -> "Context":
        return canonical(
            e.retimed(time) if e.signed == (atom, positive) and e.time == UNRESOLVED else e
            for e in self.entries
        )


EMPTY = Context()


def canonical(entries: Iterable[TimedAbducible]) -> Context:
    """Sort, deduplicate, and keep only the earliest time per signed abducible."""
    earliest: dict = {}
    for e in entries:
        old = earliest.get(e.signed)
        if old is None or e.time < old.time:
            earliest[e.signed] = e
    return Context(tuple(sorted(earliest.values(), key=TimedAbducible.sort_key)))


def produce(i: Context, e: Context) -> Optional[Context]:
    """Consistent union of ``i`` and ``e``, or None on a polarity conflict."""
    out = canonical((*i.entries, *e.entries))
    return out if out.is_consistent() else None


def insert(a: TimedAbducible, i: Context) -> Optional[Context]:
    if not is_ground(a.atom):
        raise ValueError(f"cannot insert non-ground abducible {a}")
    return produce(i, Context((a,)))


def subsumes(c1: Context, c2: Context) -> bool:
    """True iff every entry of ``c2`` is in ``c1``, abduced no later there."""
    times = {e.signed: e.time for e in c1.entries}
    return all(e.signed in times and times[e.signed] <= e.time for e in c2.entries)


def parse_context(text: str) -> Context:
    """Read the ``[a@1, not b@2]`` form used in answers and fixtures."""
    from .frontend import parse_term

    body = text.strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise ValueError(f"not a context: {text!r}")
    body = body[1:-1].strip()
    entries = []
    if body:
        for part in _split_top(body):
            part = part.strip()
            positive = not part.startswith("not ")
            if not positive:
                part = part[4:].strip()
            atom_text, _, time_text = part.rpartition("@")
            entries.append(TimedAbducible(parse_term(atom_text), positive, int(time_text)))
    return canonical(entries)


def _split_top(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur.append(ch)
    parts.append("".join(cur))
    return parts
