"""Randomized properties over the seeded sketch corpus."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import make_case, random_sketch_text, specs
from sketchsynth.checker import bounded_reach_prob, reach_prob
from sketchsynth.lang import parse_sketch, realizations, unparse_sketch
from sketchsynth.mc import goal_states, sub_mc
from sketchsynth.synth import SynthConfig, synthesize_feasible

seeds = st.integers(min_value=0, max_value=10_000)
FEW = settings(max_examples=40, deadline=None)


def chains(seed):
    case = make_case(seed)
    for r in realizations(case.sketch):
        inst = case.instances.get(r)
        if inst.error is None:
            yield inst.chain, goal_states(inst.chain, case.goal)


def dense_reach(mc, goal):
    """Reachability by a direct linear solve on the states that can reach the goal."""
    n = mc.n
    back = [[] for _ in range(n)]
    for s in range(n):
        for t, p, _ in mc.rows[s]:
            back[t].append(s)
    can = set(goal)
    stack = list(goal)
    while stack:
        for s in back[stack.pop()]:
            if s not in can:
                can.add(s)
                stack.append(s)
    unknown = sorted(can - set(goal))
    index = {s: i for i, s in enumerate(unknown)}
    a = np.eye(len(unknown))
    b = np.zeros(len(unknown))
    for s in unknown:
        for t, p, _ in mc.rows[s]:
            if t in index:
                a[index[s], index[t]] -= float(p)
            elif t in goal:
                b[index[s]] += float(p)
    x = np.linalg.solve(a, b) if unknown else b
    if mc.initial in goal:
        return 1.0
    return float(x[index[mc.initial]]) if mc.initial in index else 0.0


@FEW
@given(seeds)
def test_sketch_text_round_trips(seed):
    sketch = parse_sketch(random_sketch_text(seed))
    again = parse_sketch(unparse_sketch(sketch))
    assert again == sketch
    assert unparse_sketch(again) == unparse_sketch(sketch)


@FEW
@given(seeds)
def test_value_iteration_matches_linear_solve(seed):
    for mc, goal in chains(seed):
        assert abs(reach_prob(mc, goal) - dense_reach(mc, goal)) <= 1e-6


@FEW
@given(seeds, st.randoms(use_true_random=False))
def test_larger_sub_chains_reach_at_least_as_much(seed, rnd):
    for mc, goal in chains(seed):
        states = list(range(mc.n))
        small = {mc.initial} | set(rnd.sample(states, rnd.randint(0, mc.n - 1)))
        large = small | set(rnd.sample(states, rnd.randint(0, mc.n - 1)))
        values = []
        for keep in (small, large):
            sub = sub_mc(mc, keep)
            values.append(reach_prob(sub, {i for i, o in enumerate(sub.origin) if o in goal}))
        assert values[0] <= values[1] + 1e-7


@FEW
@given(seeds)
def test_bounded_reach_rises_to_the_unbounded_value(seed):
    for mc, goal in chains(seed):
        value = reach_prob(mc, goal)
        previous, k = -1.0, mc.n
        while True:
            bounded = bounded_reach_prob(mc, goal, k)
            assert previous <= bounded + 1e-12
            assert bounded <= value + 1e-6
            if value - bounded <= 1e-5:
                break
            # slow chains need far more than a few multiples of |S| steps
            assert k < 10**6
            previous, k = bounded, 2 * k


@FEW
@given(seeds)
def test_no_realization_is_checked_twice(seed):
    case = make_case(seed)
    for prop in specs(case, per_kind=2):
        _, stats = synthesize_feasible(case.sketch, [prop], config=SynthConfig(track_store_size=True),
                                       instances=case.instances)
        keys = [tuple(sorted(r.items())) for r in stats.visited]
        assert len(keys) == len(set(keys))
        assert all(b < a for a, b in zip(stats.store_sizes, stats.store_sizes[1:]))
