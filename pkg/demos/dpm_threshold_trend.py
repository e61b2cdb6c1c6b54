"""How the CEGIS iteration count grows as the threshold approaches the optimum.

Runs the power-management sketch with the lower bound on the success
probability set to a range of fractions of its optimum and compares the
number of candidates checked with plain enumeration.
"""
from fractions import Fraction
from pathlib import Path

from sketchsynth.lang import Property, parse_goal, parse_properties, parse_sketch
from sketchsynth.synth import InstanceCache, enumerate_baseline, synthesize_feasible

BENCH = Path(__file__).parents[1] / "src" / "sketchsynth" / "benchmarks" / "dpm"

sketch = parse_sketch((BENCH / "dpm.sk").read_text())
props = parse_properties((BENCH / "dpm.props").read_text(), sketch)
goal = parse_goal("t=8 & fail=0", sketch)
instances = InstanceCache(sketch)

base = enumerate_baseline(sketch, props, goal=goal, instances=instances)
print(f"optimum {base.value:.6f}, found by checking all {base.checked} realizations\n")
print("fraction  iterations  largest conflict  mean conflict")
for factor in (0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.99):
    bound = Fraction(factor * base.value).limit_denominator(10**6)
    threshold = Property("reach", ">=", bound, goal)
    _, stats = synthesize_feasible(sketch, props + [threshold], instances=instances)
    sizes = stats.conflict_sizes or [0]
    print(f"{factor:8.2f}  {stats.iterations:10d}  {max(sizes):16d}  {sum(sizes) / len(sizes):13.2f}")
