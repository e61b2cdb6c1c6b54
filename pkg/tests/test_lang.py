from fractions import Fraction

import pytest

from sketchsynth.expr import ParseError, holes_in, unparse, walk, Hole
from sketchsynth.lang import (instantiate, parse_goal, parse_program, parse_properties,
                              parse_property, parse_sketch, realization_cost, realizations,
                              unparse_program, unparse_sketch)

PLAIN = """
module walk
  s : [0..2] init 0;
  s < 2 -> 0.5: s'=s+1 + 0.5: s'=s;
  s = 2 -> true;
endmodule
rewards "steps"
  s < 2 : 1;
endrewards
"""


def test_rex_structure(rex):
    assert rex.hole_names == ("X", "Y", "Z")
    assert [unparse(o.expr) for o in rex.hole("X").options] == ["1", "2"]
    assert rex.hole("X").options[0].name == "XA"
    assert rex.hole("X").options[0].cost == 3
    assert len(rex.constraints) == 1
    assert len(rex.commands) == 3


def test_hole_free_text_is_a_degenerate_sketch():
    sk = parse_sketch(PLAIN)
    assert sk.holes == () and sk.constraints == ()
    assert list(realizations(sk)) == [{}]
    assert instantiate(sk, {}) == parse_program(PLAIN)


def test_undeclared_hole():
    text = PLAIN.replace("s'=s+1", "s'=W")
    with pytest.raises(ParseError, match="undeclared hole or variable W"):
        parse_sketch(text)


def test_undeclared_variable():
    with pytest.raises(ParseError, match="undeclared variable"):
        parse_sketch(PLAIN.replace("s'=s+1", "t'=s+1"))


def test_duplicate_hole_and_option_names():
    with pytest.raises(ParseError, match="duplicate hole"):
        parse_sketch("hole A either { 1 }\nhole A either { 2 }\n" + PLAIN)
    with pytest.raises(ParseError, match="duplicate option name"):
        parse_sketch("hole A either { o is 1 }\nhole B either { o is 2 }\n" + PLAIN)


def test_syntax_error_has_position():
    with pytest.raises(ParseError) as info:
        parse_sketch("module m\n  s : [0..2] init 0;\n  s < 2 -> ;\nendmodule\n")
    assert info.value.line == 3


def test_initial_value_outside_bounds():
    with pytest.raises(ParseError, match="initial value"):
        parse_sketch(PLAIN.replace("init 0", "init 5"))


def test_property_examples(rex):
    p = parse_property("P<=0.4 [F (s=3)]", rex)
    assert (p.kind, p.relation, p.threshold) == ("reach", "<=", Fraction(2, 5))
    assert unparse(p.goal) == "(s = 3)"
    q = parse_property("P>0.6 [F (s=2)]", rex)
    assert (q.kind, q.relation, q.threshold) == ("reach", ">", Fraction(3, 5))


def test_reward_lower_bound_rejected():
    sk = parse_sketch(PLAIN)
    with pytest.raises(ParseError, match="upper bounds"):
        parse_property('R{"steps"}>=1 [F (s=2)]', sk)


def test_other_property_kinds():
    sk = parse_sketch(PLAIN)
    b = parse_property("P>=0.5 [F<=3 s=2]", sk)
    assert (b.kind, b.steps) == ("bounded_reach", 3)
    c = parse_property('R{"steps"}<5 [C<=4]', sk)
    assert (c.kind, c.reward, c.steps) == ("cumulative", "steps", 4)
    r = parse_property('R{"steps"}<=4 [F s=2]', sk)
    assert r.kind == "reward"


def test_malformed_properties():
    sk = parse_sketch(PLAIN)
    for bad in ("P=<0.4 [F s=2]", "P<=1.5 [F s=2]", "Q<=0.4 [F s=2]", 'R{"nope"}<=1 [F s=2]',
                "P<=0.4 [F s+1]"):
        with pytest.raises(ParseError):
            parse_property(bad, sk)


def test_property_file_with_comments():
    text = "# header\nP<=0.4 [F s=2]\n\nP>=0.1 [F s=1]  # trailing\n"
    props = parse_properties(text, parse_sketch(PLAIN))
    assert len(props) == 2
    with pytest.raises(ParseError) as info:
        parse_properties("P<=0.4 [F s=2]\nP<=x\n", parse_sketch(PLAIN))
    assert info.value.line == 2


def test_goal_predicate():
    sk = parse_sketch(PLAIN)
    assert unparse(parse_goal("s=2 | oob", sk)) == "((s = 2) | oob)"
    with pytest.raises(ParseError):
        parse_goal("s + 1", sk)


def test_instantiate_figure_instance(rex):
    p = instantiate(rex, {"X": 0, "Y": 1, "Z": 1})
    text = unparse_program(p)
    assert "0.5 : (s'=1) + 0.5 : (s'=3)" in text
    assert "(s'=(s + 2))" in text
    assert all(not isinstance(n, Hole) for c in p.commands for e in c.expressions() for n in walk(e))


def test_instantiate_cheap_realization(rex):
    p = instantiate(rex, {"X": 1, "Y": 0, "Z": 0})
    first = p.commands[0]
    assert [unparse(b.updates[0][1]) for b in first.branches] == ["2", "1"]
    assert unparse(p.commands[1].branches[0].updates[0][1]) == "(s + 1)"


def test_instantiate_rejects_bad_index(rex):
    with pytest.raises(ValueError):
        instantiate(rex, {"X": 2, "Y": 0, "Z": 0})
    with pytest.raises(ValueError):
        instantiate(rex, {"X": 0, "Y": 0})


def test_costs(rex):
    assert realization_cost(rex, {"X": 0, "Y": 1, "Z": 1}) == 3
    assert realization_cost(rex, {"X": 1, "Y": 0, "Z": 0}) == 0
    assert realization_cost(parse_sketch(PLAIN), {}) == 0


def test_rex_has_six_realizations(rex):
    rs = list(realizations(rex))
    assert len(rs) == 6
    assert {"X": 0, "Y": 0, "Z": 0} not in rs
    assert len(list(realizations(rex, budget=0))) == 4


def test_round_trip(rex_text):
    once = parse_sketch(rex_text)
    assert parse_sketch(unparse_sketch(once)) == once
    plain = parse_sketch(PLAIN)
    assert parse_sketch(unparse_sketch(plain)) == plain


def test_command_hole_index(rex):
    for c, holes in zip(rex.commands, rex.command_holes):
        assert holes == frozenset().union(*(holes_in(e) for e in c.expressions()))
    assert rex.command_holes == (frozenset({"X", "Y"}), frozenset({"Z"}), frozenset())
    assert rex.relevant_commands == {0, 1}


def test_parenthesized_probability_after_update():
    text = ("module m\n  s : [0..3] init 0;\n"
            "  s = 0 -> 1/2: s'=1 + (1/4 + 1/8): s'=2 + 1/8: s'=3;\n  s > 0 -> true;\nendmodule\n")
    p = parse_program(text)
    assert len(p.commands[0].branches) == 3
