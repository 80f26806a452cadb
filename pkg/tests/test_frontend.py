from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from abdutab.frontend import (SourceError, format_program, format_updates, parse_program,
                              parse_query, parse_updates)
from abdutab.kernel import Atom, Literal

P1 = "abducible a/0. q <- a. expect(a)."


def diagnostics(text: str) -> list[str]:
    with pytest.raises(SourceError) as info:
        parse_program(text)
    return [d.message for d in info.value.diagnostics]


def test_parse_example_program():
    p = parse_program(P1)
    assert p.abducibles == {("a", 0)}
    assert [c.id for c in p.clauses] == ["r1", "r2"]
    assert str(p.clauses[0]) == "q <- a."
    assert p.rule("r2").is_fact


def test_comments_and_prolog_arrow():
    p = parse_program("% comment\nabducible a/0.\nq :- a. % trailing\nexpect(a).\n")
    assert str(p.clauses[0]) == "q <- a."


def test_negation_and_arguments():
    p = parse_program("fluent f/1. p(X) <- f(X), not g(X). g(c).")
    body = p.clauses[0].body
    assert str(body[1]) == "not g(X)"
    assert not body[1].positive
    assert p.constants() == {Atom("c")}


def test_format_round_trip():
    text = "abducible a/0, b/1.\nfluent f/0.\nq <- a, not f.\nexpect(a).\ns(X) <- b(X), q.\n"
    p = parse_program(text)
    assert format_program(p) == text
    assert parse_program(format_program(p)) == p


@pytest.mark.parametrize("text, fragment", [
    ("p <- q", "expected '.'"),
    ("abducible a/0. q <- a, b.", "undeclared abducible `b`"),
    ("p(X).", "must be ground"),
    ("abducible a/0. a <- q. fluent q/0.", "abducible a has a rule"),
    ("fluent q/1. p <- q(a). p(b) <- q(a).", "arities"),
    ("consider <- p. fluent p/0.", "reserved"),
    ("expect(c).", "declared abducible"),
    ("abducible a/1. p <- a(f(x)).", "nested terms"),
    ("abducible a/0. fluent a/0.", "both abducible and fluent"),
])
def test_program_diagnostics(text, fragment):
    assert any(fragment in m for m in diagnostics(text))


def test_diagnostic_has_line_number():
    with pytest.raises(SourceError) as info:
        parse_program("q <- p.\nfluent p/0.\nr <- .\n")
    d = info.value.diagnostics[0]
    assert d.line == 3 and str(d).startswith("3:")


def test_update_script():
    p = parse_program(P1)
    s = parse_updates("#limit 5.\n?- holds(q) at 1.\n#update 2: assert(~r1).\n?- holds(q) at 2.", p)
    assert s.limit == 5
    assert len(s.updates) == 1 and len(s.queries) == 2
    u = s.updates[0]
    assert (u.timestamp, u.positive, u.rule_id) == (2, False, "r1")
    assert str(u.target) == "#r(q,[consider(a)])"
    assert parse_updates(format_updates(s), p).commands == s.commands


def test_limit_override():
    p = parse_program(P1)
    assert parse_updates("#limit 5.", p, limit=7).limit == 7


@pytest.mark.parametrize("text, fragment", [
    ("#update 1: assert(q).", "time 1 is reserved"),
    ("#limit 3. #update 4: assert(q).", "exceeds the time limit"),
    ("#update 3: assert(q). #update 2: assert(~q).", "decreasing timestamps"),
    ("#update 2: assert(r9).", "unknown rule id"),
    ("#update 2: assert(r2).", "is a fact"),
    ("#update 2: assert(zz).", "unknown fluent"),
    ("#update 2: assert(a).", "abducible a cannot be updated"),
    ("#update 2: assert(q). #limit 4.", "#limit must precede"),
    ("?- holds(q) at 0.", "outside"),
])
def test_update_diagnostics(text, fragment):
    with pytest.raises(SourceError) as info:
        parse_updates(text, parse_program(P1))
    assert fragment in info.value.diagnostics[0].message


def test_parse_query():
    q = parse_query("?- holds(not q) at 3.", 5)
    assert q.goal == Literal(Atom("q"), False) and q.time == 3
    assert parse_query("holds(q) at 1").time == 1
    with pytest.raises(SourceError):
        parse_query("holds(q) at 9", 5)


idents = st.sampled_from(["p", "q", "s", "t"])


@st.composite
def programs(draw):
    heads = draw(st.lists(idents, min_size=1, max_size=4))
    body_preds = ["u", "v"]
    lines = ["fluent u/0, v/0."]
    for h in heads:
        body = draw(st.lists(st.tuples(st.sampled_from(body_preds), st.booleans()),
                             max_size=3))
        if body:
            lines.append(f"{h} <- " + ", ".join(x if pos else f"not {x}" for x, pos in body) + ".")
        else:
            lines.append(f"{h}.")
    return "\n".join(lines) + "\n"


@settings(max_examples=50)
@given(programs())
def test_print_parse_round_trip(text):
    p = parse_program(text)
    assert parse_program(format_program(p)) == p
