"""Counterexample-guided synthesis over a sketch's design space.

The loop alternates between a constraint store, which proposes the
lexicographically least realization not yet excluded, and a verifier that
model-checks the instance and turns every violated property into conflicts.
"""
from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .cex import (DEFAULT_MAX_CES, Conflict, full_conflict, generate_conflict,
                  ill_formed_conflict, program_ce)
from .checker import DEFAULT_TOL, check, reach_prob
from .expr import OptionRef, eval_partial, unparse, walk
from .lang import (OOB_PROPERTY, Program, Property, Sketch, instantiate, realization_cost,
                   realizations)
from .mc import IllFormedError, MarkovChain, build_mc, fixdl, goal_states

COUNT_LIMIT = 10**6


class ConstraintStore:
    """Finite-domain store over one meta-variable per hole.

    Solutions are hole assignments that satisfy the sketch constraints, stay
    within the budget and avoid every learned nogood.  They are proposed in
    lexicographic order (holes in declaration order, options in order).
    """

    def __init__(self, sketch: Sketch, budget: int | None = None):
        if budget is not None and budget < 0:
            raise ValueError("budget must be non-negative")
        self.sketch = sketch
        self.budget = budget
        self.names = sketch.hole_names
        self.position = {h: i for i, h in enumerate(self.names)}
        self.sizes = [len(h.options) for h in sketch.holes]
        self.costs = [[o.cost for o in h.options] for h in sketch.holes]
        n = len(self.names)
        self._rest = [0] * (n + 1)  # cheapest completion of positions > i
        for i in range(n - 1, -1, -1):
            self._rest[i] = self._rest[i + 1] + min(self.costs[i])
        owner = sketch.option_owner
        self._owner = {o: (self.position[h], i) for o, (h, i) in owner.items()}
        self._checks: list = [[] for _ in range(n)]
        self.unsat = False
        for c in sketch.constraints:
            spots = {self._owner[e.name][0] for e in walk(c) if isinstance(e, OptionRef)}
            if not spots:
                if not eval_partial(c, lambda _: None):
                    self.unsat = True
                continue
            for pos in spots:
                self._checks[pos].append(c)
        self._nogoods: list = [[] for _ in range(n)]
        self.nogoods: list = []
        self._cursor = None

    # -- search ----------------------------------------------------------------

    def _consistent(self, pos: int, vals: list) -> bool:
        def selected(option):
            p, i = self._owner[option]
            return None if p > pos else vals[p] == i
        for c in self._checks[pos]:
            if eval_partial(c, selected) is False:
                return False
        for ng in self._nogoods[pos]:
            if all(vals[p] == v for p, v in ng):
                return False
        return True

    def _search(self, start, visit, fixed=None):
        """Depth-first walk over solutions from ``start`` on; ``visit`` returns True to stop."""
        n = len(self.sizes)
        if self.unsat:
            return
        if n == 0:
            visit(())
            return
        vals = [0] * n
        budget = self.budget
        fixed = fixed or {}

        def rec(pos, tight, cost):
            lo = start[pos] if tight else 0
            values = [fixed[pos]] if pos in fixed else range(self.sizes[pos])
            for v in values:
                if v < lo:
                    continue
                c = cost + self.costs[pos][v]
                if budget is not None and c + self._rest[pos + 1] > budget:
                    continue
                vals[pos] = v
                if not self._consistent(pos, vals):
                    continue
                if pos == n - 1:
                    if visit(tuple(vals)):
                        return True
                elif rec(pos + 1, tight and v == lo, c):
                    return True
            return False

        rec(0, start is not None, 0)

    def get_realisation(self) -> dict | None:
        """Least solution, or None if the store is unsatisfiable."""
        found = []

        def visit(sol):
            found.append(sol)
            return True
        self._search(self._cursor, visit)
        if not found:
            self._cursor = None
            self.unsat = True
            return None
        # the least solution can only move forward as nogoods are added
        self._cursor = found[0]
        return dict(zip(self.names, found[0]))

    def count_solutions(self, fixed: Mapping[str, int] | None = None,
                        limit: int = COUNT_LIMIT) -> int:
        """Number of solutions (agreeing with ``fixed``), counting at most ``limit``."""
        pos_fixed = {self.position[h]: v for h, v in (fixed or {}).items()}
        count = 0

        def visit(_):
            nonlocal count
            count += 1
            return count >= limit
        self._search(None, visit, pos_fixed)
        return count

    def solutions(self) -> list[dict]:
        out = []

        def visit(sol):
            out.append(dict(zip(self.names, sol)))
            return False
        self._search(None, visit)
        return out

    def learn_conflict(self, conflict: Conflict | Mapping[str, int]) -> int:
        """Exclude every extension of ``conflict``; return how many solutions that removed.

        Beyond ``COUNT_LIMIT`` design points the count is the upper bound
        given by the product of the unassigned domains.
        """
        partial = conflict.partial if isinstance(conflict, Conflict) else dict(conflict)
        for h, v in partial.items():
            if not 0 <= v < self.sizes[self.position[h]]:
                raise ValueError(f"option {v} out of range for hole {h}")
        if self.sketch.design_space_size <= COUNT_LIMIT:
            pruned = self.count_solutions(partial)
        else:
            pruned = math.prod(s for h, s in zip(self.names, self.sizes) if h not in partial)
        if not partial:
            self.unsat = True
        else:
            ng = tuple(sorted((self.position[h], v) for h, v in partial.items()))
            self._nogoods[ng[-1][0]].append(ng)
        self.nogoods.append(partial)
        return pruned


def initialise(sketch: Sketch, budget: int | None = None) -> ConstraintStore:
    return ConstraintStore(sketch, budget)


# -- verification ----------------------------------------------------------------

@dataclass
class Instance:
    program: Program
    raw: MarkovChain | None
    chain: MarkovChain | None  # after fixdl
    error: IllFormedError | None = None


class InstanceCache:
    """Builds instance chains once per realization of a sketch."""

    def __init__(self, sketch: Sketch):
        self.sketch = sketch
        self._cache: dict = {}

    def get(self, r: Mapping[str, int]) -> Instance:
        key = tuple(r[h] for h in self.sketch.hole_names)
        inst = self._cache.get(key)
        if inst is None:
            program = instantiate(self.sketch, r)
            try:
                raw, _ = build_mc(program)
                inst = Instance(program, raw, fixdl(raw))
            except IllFormedError as err:
                inst = Instance(program, None, None, err)
            self._cache[key] = inst
        return inst


@dataclass(frozen=True)
class SynthConfig:
    tol: float = DEFAULT_TOL
    max_ces: int = DEFAULT_MAX_CES
    track_store_size: bool = False


@dataclass
class Verdict:
    conflicts: list
    values: list  # per property; None where not computed
    ces: list = field(default_factory=list)
    error: IllFormedError | None = None

    @property
    def holds(self) -> bool:
        return not self.conflicts


def with_oob(props) -> list:
    """The specification extended by the out-of-bounds safety property."""
    return list(props) + [OOB_PROPERTY]


def verify(sketch: Sketch, r: Mapping[str, int], props, config: SynthConfig = SynthConfig(),
           instances: InstanceCache | None = None, offset: int = 0) -> Verdict:
    """Check every property in order and return conflicts for the violated ones.

    ``props`` is used as given; callers add the out-of-bounds property.
    Conflict sources are property positions shifted by ``offset``.
    """
    inst = (instances or InstanceCache(sketch)).get(r)
    if inst.error is not None:
        return Verdict([ill_formed_conflict(sketch, r, inst.error)], [None] * len(props),
                       error=inst.error)
    values, violated = [], []
    for i, prop in enumerate(props):
        ok, value = check(inst.chain, prop, config.tol)
        values.append(value)
        if not ok:
            violated.append(i)
    conflicts, ces = [], []
    for i in violated:
        found = program_ce(inst.program, sketch.relevant_commands, props[i], inst.raw,
                           prop_index=i + offset, max_ces=config.max_ces, tol=config.tol)
        for ce in sorted(found, key=lambda ce: sorted(ce.commands)):
            c = generate_conflict(sketch, r, ce)
            if c not in conflicts:
                conflicts.append(c)
                ces.append(ce)
    return Verdict(conflicts, values, ces)


# -- statistics ----------------------------------------------------------------

@dataclass
class SynthStats:
    result: str = "UNSAT"
    witness: dict | None = None
    value: float | None = None
    iterations: int = 0
    conflict_sizes: list = field(default_factory=list)
    pruned_per_iteration: list = field(default_factory=list)
    wall_ms: float = 0.0
    visited: list = field(default_factory=list)
    store_sizes: list = field(default_factory=list)
    conflicts: list = field(default_factory=list)

    def hole_frequency(self) -> dict:
        return dict(Counter(h for c in self.conflicts for h, _ in c.items))

    def size_histogram(self) -> dict:
        return {str(k): v for k, v in sorted(Counter(self.conflict_sizes).items())}

    def to_json(self, sketch: Sketch | None = None) -> dict:
        witness = self.witness
        if witness is not None and sketch is not None:
            witness = {h: unparse(sketch.hole(h).options[i].expr) for h, i in witness.items()}
        value = self.value
        if value is not None and math.isinf(value):
            value = "inf" if value > 0 else "-inf"
        return {
            "result": self.result,
            "witness": witness,
            "value": value,
            "iterations": self.iterations,
            "conflict_sizes": list(self.conflict_sizes),
            "pruned_per_iteration": list(self.pruned_per_iteration),
            "wall_ms": round(self.wall_ms, 3),
        }


def _learn(store: ConstraintStore, conflicts, stats: SynthStats, track: bool) -> None:
    pruned = 0
    for c in conflicts:
        pruned += store.learn_conflict(c)
        stats.conflict_sizes.append(c.size)
        stats.conflicts.append(c)
    stats.pruned_per_iteration.append(pruned)
    if track:
        stats.store_sizes.append(store.count_solutions())


# -- synthesis loops -------------------------------------------------------------

def synthesize_feasible(sketch: Sketch, props, budget: int | None = None,
                        config: SynthConfig = SynthConfig(),
                        instances: InstanceCache | None = None):
    """Find an in-budget realization satisfying ``props`` or prove there is none."""
    start = time.perf_counter()
    instances = instances or InstanceCache(sketch)
    spec = with_oob(props)
    store = ConstraintStore(sketch, budget)
    stats = SynthStats()
    if config.track_store_size:
        stats.store_sizes.append(store.count_solutions())
    found = None
    while (r := store.get_realisation()) is not None:
        stats.iterations += 1
        stats.visited.append(r)
        verdict = verify(sketch, r, spec, config, instances)
        if verdict.holds:
            found = r
            stats.result = "SAT"
            stats.witness = dict(r)
            break
        _learn(store, verdict.conflicts, stats, config.track_store_size)
    stats.wall_ms = (time.perf_counter() - start) * 1000
    return found, stats


def objective_property(goal, mode: str, bound: float) -> Property:
    if mode == "max":
        return Property("reach", ">=", Fraction(bound), goal)
    return Property("reach", "<=", Fraction(bound), goal)


def synthesize_optimal(sketch: Sketch, props, goal, budget: int | None = None,
                       eps: float = 0.05, mode: str = "max",
                       config: SynthConfig = SynthConfig(),
                       instances: InstanceCache | None = None):
    """Feasible realization whose probability of reaching ``goal`` is optimal up to ``eps``.

    In ``max`` mode the value is at least ``(1 - eps)`` times the best
    feasible value; in ``min`` mode at most ``(1 + eps)`` times the least.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie strictly between 0 and 1")
    if mode not in ("max", "min"):
        raise ValueError(f"unknown mode {mode!r}")
    start = time.perf_counter()
    instances = instances or InstanceCache(sketch)
    spec = with_oob(props)
    objective_index = len(spec)
    store = ConstraintStore(sketch, budget)
    stats = SynthStats()
    if config.track_store_size:
        stats.store_sizes.append(store.count_solutions())
    better = (lambda v, best: v > best) if mode == "max" else (lambda v, best: v < best)
    best_value = -math.inf if mode == "max" else math.inf
    best = None
    while (r := store.get_realisation()) is not None:
        stats.iterations += 1
        stats.visited.append(r)
        verdict = verify(sketch, r, spec, config, instances)
        conflicts = list(verdict.conflicts)
        inst = instances.get(r)
        if verdict.error is None:
            value = reach_prob(inst.chain, goal_states(inst.chain, goal), config.tol)
            if verdict.holds and better(value, best_value):
                best, best_value = dict(r), value
                conflicts = [full_conflict(sketch, r, objective_index)]
            elif math.isfinite(best_value):
                bound = (1 - eps) * best_value if mode == "max" else (1 + eps) * best_value
                threshold = objective_property(goal, mode, bound)
                if not threshold.holds(value):
                    conflicts += verify(sketch, r, [threshold], config, instances,
                                        offset=objective_index).conflicts
                if not any(c.covers(r) for c in conflicts):
                    conflicts.append(full_conflict(sketch, r, objective_index))
        _learn(store, conflicts, stats, config.track_store_size)
    if best is not None:
        stats.result = "SAT"
        stats.witness = best
        stats.value = best_value
    stats.wall_ms = (time.perf_counter() - start) * 1000
    return best, stats


def synthesize_max(sketch, props, goal, budget=None, eps=0.05, config=SynthConfig(), instances=None):
    return synthesize_optimal(sketch, props, goal, budget, eps, "max", config, instances)


def synthesize_min(sketch, props, goal, budget=None, eps=0.05, config=SynthConfig(), instances=None):
    return synthesize_optimal(sketch, props, goal, budget, eps, "min", config, instances)


# -- enumeration baseline -----------------------------------------------------------

@dataclass
class BaselineRow:
    realization: dict
    cost: int
    values: list  # per property (out-of-bounds property last); empty if ill formed
    feasible: bool
    objective: float | None = None
    error: str | None = None


@dataclass
class BaselineResult:
    rows: list
    result: str
    witness: dict | None
    value: float | None
    wall_ms: float

    @property
    def checked(self) -> int:
        return len(self.rows)


def enumerate_baseline(sketch: Sketch, props, budget: int | None = None, goal=None,
                       mode: str = "max", tol: float = DEFAULT_TOL,
                       instances: InstanceCache | None = None) -> BaselineResult:
    """Model-check every in-budget realization individually.

    Without ``goal`` the witness is the first feasible realization; with a
    goal it is the first one attaining the optimal reachability value.
    """
    start = time.perf_counter()
    instances = instances or InstanceCache(sketch)
    spec = with_oob(props)
    rows = []
    witness, best = None, None
    for r in realizations(sketch, budget):
        inst = instances.get(r)
        cost = realization_cost(sketch, r)
        if inst.error is not None:
            rows.append(BaselineRow(r, cost, [], False, error=inst.error.kind))
            continue
        values, feasible = [], True
        for prop in spec:
            ok, value = check(inst.chain, prop, tol)
            values.append(value)
            feasible &= ok
        objective = None
        if goal is not None:
            objective = reach_prob(inst.chain, goal_states(inst.chain, goal), tol)
        rows.append(BaselineRow(r, cost, values, feasible, objective))
        if not feasible:
            continue
        if goal is None:
            if witness is None:
                witness = r
        elif best is None or (objective > best if mode == "max" else objective < best):
            witness, best = r, objective
    return BaselineResult(rows, "SAT" if witness is not None else "UNSAT", witness, best,
                          (time.perf_counter() - start) * 1000)
