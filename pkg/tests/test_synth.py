import json
import math

import pytest

from sketchsynth.cex import Conflict
from sketchsynth.checker import reach_prob
from sketchsynth.lang import parse_goal, parse_properties, parse_sketch, realizations
from sketchsynth.mc import goal_states
from sketchsynth.synth import (ConstraintStore, InstanceCache, SynthConfig, enumerate_baseline,
                               initialise, synthesize_feasible, synthesize_max, synthesize_min,
                               verify, with_oob)

FREE = """
hole A either { 0, 1 }
hole B either { 0, 1, 2 }
module m
  s : [0..3] init 0;
  s = 0 -> s'=A + B;
  s > 0 -> true;
endmodule
"""


def props(rex, text):
    return parse_properties(text, rex)


def test_store_counts(rex):
    assert initialise(rex, 3).count_solutions() == 6
    assert initialise(rex, 0).count_solutions() == 4
    assert ConstraintStore(parse_sketch(FREE), 0).count_solutions() == 6


def test_store_solutions_match_enumeration(rex):
    for budget in (None, 0, 2, 3):
        assert ConstraintStore(rex, budget).solutions() == list(realizations(rex, budget))


def test_negative_budget_rejected(rex):
    with pytest.raises(ValueError):
        initialise(rex, -1)


def test_first_solution(rex):
    assert initialise(rex, 3).get_realisation() == {"X": 0, "Y": 1, "Z": 0}


def test_learning_y3(rex):
    store = initialise(rex, 3)
    assert store.learn_conflict({"Y": 1}) == 4
    assert store.get_realisation() == {"X": 1, "Y": 0, "Z": 0}


def test_learning_full_and_empty_conflicts(rex):
    store = initialise(rex, 3)
    assert store.learn_conflict({"X": 0, "Y": 1, "Z": 0}) == 1
    assert store.learn_conflict(Conflict((), 0)) == 5
    assert store.get_realisation() is None


def test_store_exhaustion(rex):
    store = initialise(rex, 3)
    seen = []
    while (r := store.get_realisation()) is not None:
        seen.append(r)
        store.learn_conflict(r)
    assert seen == list(realizations(rex))


def test_unsatisfiable_constraints():
    sk = parse_sketch(FREE.replace("hole A either { 0, 1 }",
                                   "hole A either { a0 is 0, a1 is 1 }\nconstraint a0 & a1;"))
    assert initialise(sk).get_realisation() is None
    assert enumerate_baseline(sk, []).result == "UNSAT"
    assert enumerate_baseline(sk, []).checked == 0


def test_verify_examples(rex):
    safe = with_oob(props(rex, "P<=0.4 [F s=3]"))
    assert [c.partial for c in verify(rex, {"X": 0, "Y": 1, "Z": 1}, safe).conflicts] == [{"X": 0, "Y": 1}]
    assert verify(rex, {"X": 1, "Y": 0, "Z": 0}, safe).conflicts == []
    vacuous = with_oob(props(rex, "P>=0 [F s=3]"))
    assert all(verify(rex, r, vacuous).holds for r in realizations(rex))


def test_verify_reports_out_of_bounds():
    sk = parse_sketch(FREE.replace("[0..3]", "[0..2]"))
    verdict = verify(sk, {"A": 1, "B": 2}, with_oob([]))
    assert [c.source for c in verdict.conflicts] == [0]
    assert verdict.conflicts[0].partial == {"A": 1, "B": 2}


def test_feasible_examples(rex):
    r, stats = synthesize_feasible(rex, props(rex, "P<=0.4 [F s=3]"), 0)
    assert r == {"X": 1, "Y": 0, "Z": 0}
    assert stats.result == "SAT"
    r, stats = synthesize_feasible(rex, props(rex, "P>=0.9 [F s=3]"), 0)
    assert r is None and stats.result == "UNSAT"
    assert stats.iterations <= 4
    r, stats = synthesize_feasible(rex, props(rex, "P<=1 [F s=3]"), 10)
    assert r == {"X": 0, "Y": 1, "Z": 0} and stats.iterations == 1


def test_max_examples(rex):
    goal = parse_goal("s=3", rex)
    r, stats = synthesize_max(rex, [], goal, 0, 0.05)
    assert stats.value == pytest.approx(0.5)
    # ties keep the first incumbent found in store order
    assert r == {"X": 1, "Y": 0, "Z": 1}
    r, stats = synthesize_max(rex, [], goal, 3, 0.05)
    assert stats.value == pytest.approx(1.0)
    assert r == {"X": 0, "Y": 1, "Z": 1}


def test_min_example(rex):
    r, stats = synthesize_min(rex, [], parse_goal("s=3", rex), 3, 0.05)
    assert stats.value == pytest.approx(0.0)
    inst = InstanceCache(rex).get(r)
    assert reach_prob(inst.chain, goal_states(inst.chain, parse_goal("s=3", rex))) == 0.0


def test_optimal_with_infeasible_spec(rex):
    r, stats = synthesize_max(rex, props(rex, "P<0 [F true]"), parse_goal("s=3", rex), 3)
    assert r is None and stats.result == "UNSAT"


def test_optimal_rejects_bad_eps(rex):
    with pytest.raises(ValueError):
        synthesize_max(rex, [], parse_goal("s=3", rex), 3, 1.0)


def test_baseline_examples(rex):
    base = enumerate_baseline(rex, props(rex, "P<=0.4 [F s=3]"), 3)
    assert base.checked == 6
    assert any(row.feasible for row in base.rows)
    assert all(len(row.values) == 2 for row in base.rows)
    best = enumerate_baseline(rex, [], 3, parse_goal("s=3", rex))
    assert best.value == pytest.approx(1.0)


def test_stats_json(rex):
    r, stats = synthesize_feasible(rex, props(rex, "P>=0.9 [F s=3]"), 0)
    data = json.loads(json.dumps(stats.to_json(rex)))
    assert set(data) == {"result", "witness", "value", "iterations", "conflict_sizes",
                         "pruned_per_iteration", "wall_ms"}
    assert len(data["pruned_per_iteration"]) == data["iterations"]
    assert sum(data["pruned_per_iteration"]) == 4


def test_stats_witness_uses_option_text(rex):
    _, stats = synthesize_feasible(rex, props(rex, "P<=0.4 [F s=3]"), 0)
    assert stats.to_json(rex)["witness"] == {"X": "2", "Y": "1", "Z": "1"}


def test_store_shrinks_and_nothing_is_revisited(rex):
    config = SynthConfig(track_store_size=True)
    for text in ("P<=0.4 [F s=3]", "P>=0.9 [F s=3]", "P>0.6 [F s=2]"):
        for budget in (0, 3):
            _, stats = synthesize_feasible(rex, props(rex, text), budget, config)
            sizes = stats.store_sizes
            assert all(b < a for a, b in zip(sizes, sizes[1:]))
            keys = [tuple(r.values()) for r in stats.visited]
            assert len(keys) == len(set(keys))


def test_bundles_agree_with_baseline(bundle):
    sketch, spec, budget, _, _ = bundle
    r, stats = synthesize_feasible(sketch, spec, budget)
    base = enumerate_baseline(sketch, spec, budget)
    assert stats.result == base.result
    assert stats.iterations <= base.checked
    if r is not None:
        assert verify(sketch, r, with_oob(spec)).holds


def test_bundle_eps_optimal(bundle):
    sketch, spec, budget, goal, mode = bundle
    base = enumerate_baseline(sketch, spec, budget, goal, mode)
    for eps in (0.05, 0.5):
        r, stats = (synthesize_max if mode == "max" else synthesize_min)(sketch, spec, goal, budget, eps)
        if mode == "max":
            assert stats.value >= (1 - eps) * base.value - 1e-6
        else:
            assert stats.value <= (1 + eps) * base.value + 1e-6
        assert not math.isinf(stats.value)
