from __future__ import annotations

from hypothesis import given, settings, strategies as st

from abdutab.frontend import parse_program
from abdutab.kernel import Atom, mk, signature
from abdutab.transform import (AbducibleCall, ConsiderCall, FluentCall, Neq, StarCall, compile_program,
                               preprocess_abducibles, rule_name_fluents)

P1 = "abducible a/0. q <- a. expect(a)."


def test_preprocess_replaces_abducibles():
    p = preprocess_abducibles(parse_program("abducible a/0, b/1. q <- a, not b(c), r. fluent r/0."))
    assert str(p.clauses[0]) == "q <- consider(a), not consider(b(c)), r."


def test_rule_name_fluents():
    names = rule_name_fluents(parse_program(P1))
    assert names == {"r1": mk("#r", Atom("q"), mk("[]", mk("consider", Atom("a"))))}
    assert str(names["r1"]) == "#r(q,[consider(a)])"


def test_identical_rules_get_distinct_names():
    names = rule_name_fluents(parse_program("fluent f/0. q <- f. q <- f."))
    assert names["r1"] != names["r2"]
    assert str(names["r2"]) == "#r(q,[f],r2)"


def test_rule_name_freezes_variables():
    names = rule_name_fluents(parse_program("fluent f/1. p(X) <- f(X)."))
    assert str(names["r1"]) == "#r(p(X),[f(X)])"
    assert names["r1"].args[0].args[0] == Atom("X")


def test_positive_rule_shape():
    c = compile_program(parse_program(P1))
    (rule,) = c.positive_rules(("q", 0))
    assert rule.closing == "latest"
    assert rule.body[0] == FluentCall(c.rule_names["r1"])
    assert rule.body[1] == ConsiderCall(Atom("a"))
    (fact,) = c.positive_rules(("expect", 1))
    assert fact.head_time == 1 and fact.relay
    assert c.initial_facts == [(c.rule_names["r1"], 1)]


def test_dual_of_one_rule():
    c = compile_program(parse_program(P1))
    top, first, second = c.dual_rules(("q", 0))
    assert top.name == "not_q" and top.body == (StarCall("q", 0, 1, ()),)
    assert first.body == (FluentCall(c.rule_names["r1"], False),)
    assert second.body[0] == FluentCall(c.rule_names["r1"])
    assert not second.body[1].positive and second.closing == "verify_pos"


def test_dual_of_fact_is_head_mismatch():
    c = compile_program(parse_program(P1))
    top, mismatch = c.dual_rules(("expect", 1))
    assert mismatch.relay and mismatch.head_time == 1
    assert isinstance(mismatch.body[0], Neq) and mismatch.body[0].right == Atom("a")


def test_dual_without_rules_is_closed_world_relay():
    c = compile_program(parse_program(P1))
    (relay,) = c.dual_rules(("expect_not", 1))
    assert relay.name == "not_expect_not" and relay.relay and relay.head_time == 1


def test_consider_dual():
    c = compile_program(parse_program(P1))
    rules = c.dual_rules(("consider", 1))
    assert [r.name for r in rules] == ["not_consider"] + ["consider*1"] * 3
    assert rules[1].body == (AbducibleCall(rules[1].args[0], False),)


def test_repeated_head_variable_gives_disequality():
    c = compile_program(parse_program("fluent f/1. p(X, X) <- f(X)."))
    duals = c.dual_rules(("p", 2))
    mismatches = [r for r in duals if r.relay]
    assert len(mismatches) == 1 and isinstance(mismatches[0].body[0], Neq)


def test_local_variables_are_universal():
    c = compile_program(parse_program("fluent f/2. p(X) <- f(X, Y)."))
    body_clauses = [r for r in c.dual_rules(("p", 1)) if r.name == "p*1" and not r.relay]
    assert all(len(r.universal) == 1 for r in body_clauses)


def test_dump_is_deterministic():
    text = "abducible a/0, b/0. q <- a. s <- b, q. t <- s, q. expect(a). expect(b)."
    assert compile_program(parse_program(text)).dump() == compile_program(parse_program(text)).dump()


@st.composite
def programs(draw):
    lines = ["fluent u/0, v/0."]
    n = draw(st.integers(1, 4))
    for k in range(n):
        body = draw(st.lists(st.tuples(st.sampled_from(["u", "v", "w"]), st.booleans()),
                             min_size=0, max_size=3))
        if body:
            lines.append(f"w{k % 2} <- " + ", ".join(x if p else f"not {x}" for x, p in body) + ".")
        else:
            lines.append(f"w{k % 2}.")
    lines.append("w.")
    return "\n".join(lines)


@settings(max_examples=60)
@given(programs())
def test_dual_clause_count(text):
    """Per predicate: one head clause plus one clause per body literal of each rule."""
    program = parse_program(text)
    c = compile_program(program)
    for sig in {(f"w{k}", 0) for k in range(2)}:
        rules = [r for r in c.program.clauses if signature(r.head) == sig]
        duals = c.dual_rules(sig)
        if not rules:
            assert len(duals) == 1
        else:
            assert len(duals) == 1 + sum(len(r.body) for r in rules)
