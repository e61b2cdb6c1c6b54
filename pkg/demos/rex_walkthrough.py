"""Walk through one synthesis run on the three-hole example.

Prints each candidate the synthesizer tries, the counterexample commands
found for it and the partial realization it learns from them.
"""
from pathlib import Path

from sketchsynth.cex import generate_conflict, program_ce
from sketchsynth.checker import check
from sketchsynth.lang import parse_properties, parse_sketch, realization_cost, unparse_sketch
from sketchsynth.synth import InstanceCache, initialise, synthesize_feasible

BENCH = Path(__file__).parents[1] / "src" / "sketchsynth" / "benchmarks" / "rex"

sketch = parse_sketch((BENCH / "rex.sk").read_text())
props = parse_properties((BENCH / "safe.props").read_text(), sketch)
print(unparse_sketch(sketch))
print("property:", props[0])

store = initialise(sketch, 3)
cache = InstanceCache(sketch)
print(f"\n{store.count_solutions()} realizations within budget 3")
while (r := store.get_realisation()) is not None:
    inst = cache.get(r)
    ok, value = check(inst.chain, props[0])
    print(f"\ncandidate {r} (cost {realization_cost(sketch, r)}): value {value:.3f}")
    if ok:
        print("  satisfied, done")
        break
    ce = program_ce(inst.program, sketch.relevant_commands, props[0], inst.raw)[0]
    conflict = generate_conflict(sketch, r, ce)
    pruned = store.learn_conflict(conflict)
    print(f"  counterexample commands {sorted(ce.commands)}")
    print(f"  learned {conflict.partial}, pruning {pruned}")

r, stats = synthesize_feasible(sketch, props, 3)
print(f"\nthe library loop agrees: {r} after {stats.iterations} iterations")
