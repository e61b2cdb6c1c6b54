"""Counterexamples and the conflicts derived from them.

Two levels are supported.  State-level critical sets work on a single
chain (used with explicit families); program-level counterexamples are
command subsets of a hole-free program, searched by increasing number of
hole-carrying ("relevant") commands.

A command subset ``E`` is accepted as a counterexample only if the bound it
certifies clears the threshold by a small margin, so that the verdict for
every program sharing the commands in ``E`` does not hinge on value
iteration round-off.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Mapping

from .checker import DEFAULT_TOL, INFINITE, expected_reach_reward, reach_prob
from .expr import holes_in
from .lang import Program, Property, Sketch, instantiate, unparse_program
from .mc import (IllFormedError, MarkovChain, build_mc, fixdl, goal_states,
                 no_path_states, restrict, sub_mc)

DEFAULT_MAX_CES = 8
WELL_FORMEDNESS = -1  # source index of conflicts caused by ill-formed programs


@dataclass(frozen=True)
class Conflict:
    """Partial realization whose every extension violates property ``source``."""

    items: tuple  # ((hole, option index), ...) in hole declaration order
    source: int

    @property
    def partial(self) -> dict:
        return dict(self.items)

    @property
    def size(self) -> int:
        return len(self.items)

    def covers(self, r: Mapping[str, int]) -> bool:
        return all(r.get(h) == i for h, i in self.items)


@dataclass(frozen=True)
class CommandCE:
    commands: frozenset
    prop_index: int
    relevant: frozenset  # the hole-carrying part of ``commands``


def ce_margin(prop: Property, tol: float = DEFAULT_TOL) -> float:
    return max(1e-9, 100 * tol) * max(1.0, abs(float(prop.threshold)))


# -- state-level critical sets -------------------------------------------------

def _absorption(mc: MarkovChain, targets) -> dict:
    return {t: reach_prob(mc, {t}) for t in targets}


def _grow_critical(mc: MarkovChain, prop: Property, goal: set, blocked: set) -> set:
    """Greedy frontier growth until the sub-chain refutes the upper bound ``prop``."""
    zero = no_path_states(mc, goal)
    crit = {mc.initial}
    while True:
        sub = sub_mc(mc, crit)
        origin = sub.origin
        sub_goal = {i for i, s in enumerate(origin) if s in goal}
        if not prop.holds(reach_prob(sub, sub_goal)):
            return crit
        frontier = [i for i, s in enumerate(origin)
                    if s not in crit and s not in goal and s not in zero and s not in blocked]
        if not frontier:
            return crit
        mass = _absorption(sub, frontier)
        best = max(frontier, key=lambda i: (mass[i], -origin[i]))
        crit.add(origin[best])


def critical_set_safety(mc: MarkovChain, prop: Property, goal=None) -> set:
    """States ``C`` whose sub-chain already violates the upper-bounded ``prop``.

    Not minimal: states are added greedily by the probability of getting
    absorbed in them.
    """
    if not prop.is_upper_bound or prop.kind != "reach":
        raise ValueError("critical sets need an upper-bounded reachability property")
    goal = goal_states(mc, prop.goal) if goal is None else set(goal)
    return _grow_critical(mc, prop, goal, set())


def critical_set_liveness(mc: MarkovChain, prop: Property, goal=None) -> set:
    """Critical states for a lower-bounded reachability property.

    The dual property bounds the mass of the states ``B`` without a path to
    the goal.  The result joins the critical states of the dual with the
    part of ``B`` that the resulting sub-chain actually enters.
    """
    if prop.is_upper_bound or prop.kind != "reach":
        raise ValueError("liveness critical sets need a lower-bounded reachability property")
    goal = goal_states(mc, prop.goal) if goal is None else set(goal)
    trap = no_path_states(mc, goal)
    if mc.initial in trap:
        return {mc.initial} | trap
    dual = Property("reach", "<" if prop.relation == ">" else "<=",
                    1 - prop.threshold, prop.goal)
    crit = _grow_critical(mc, dual, trap, goal)
    sub = sub_mc(mc, crit | trap)
    entered = {sub.origin[i] for i in sub.reachable()} & trap
    return crit | entered


# -- program-level counterexamples ---------------------------------------------

def _trapped_mass(raw: MarkovChain, goal: set) -> float:
    """Probability of entering states that can never reach ``goal`` in any extension.

    Trapping states are non-goal states whose own command is present and
    whose successors are all trapping again; deadlocks may gain a command in
    another program and do not count.
    """
    trap = {s for s in range(raw.n) if raw.rows[s] and s not in goal}
    changed = True
    while changed:
        changed = False
        for s in list(trap):
            if any(t not in trap for t, p, _ in raw.rows[s] if p > 0):
                trap.discard(s)
                changed = True
    if not trap:
        return 0.0
    # mass must be trapped before the goal is seen
    rows = tuple(((s, Fraction(1), None),) if s in goal or not row else row
                 for s, row in enumerate(raw.rows))
    return reach_prob(replace(raw, rows=rows), trap)


def _redirect_deadlocks(raw: MarkovChain) -> tuple[MarkovChain, int]:
    """Send every deadlock to a fresh zero-reward target state."""
    target = raw.n
    rows = tuple(row if row else ((target, Fraction(1), None),) for row in raw.rows)
    rows += (((target, Fraction(1), None),),)
    rewards = {k: tuple(v) + (Fraction(0),) for k, v in raw.rewards.items()}
    return replace(raw, labels=raw.labels + (("<target>",),), rows=rows, rewards=rewards), target


def _violates_lower(mass: float, prop: Property, margin: float) -> bool:
    need = 1 - float(prop.threshold)
    if prop.relation == ">":
        return mass - margin >= need
    return mass - margin > need


def _violates_upper(value: float, prop: Property, margin: float) -> bool:
    if value == INFINITE:
        return True
    t = float(prop.threshold)
    if prop.relation == "<":
        return value - margin >= t
    return value - margin > t


def is_program_ce(raw: MarkovChain, commands, prop: Property, goal: set,
                  tol: float = DEFAULT_TOL) -> bool:
    """Whether ``commands`` certify the violation of ``prop`` for every extension.

    ``raw`` is the unfixed chain of the full program; restricting its
    transitions equals building the restricted program.
    """
    restricted = raw.restrict_commands(commands)
    margin = ce_margin(prop, tol)
    if prop.kind == "reach" and prop.is_upper_bound:
        fixed = fixdl(restricted)
        if prop.holds(0.0) and fixed.initial in no_path_states(fixed, goal):
            return False
        return _violates_upper(reach_prob(fixed, goal, tol), prop, margin)
    if prop.kind == "reach":
        return _violates_lower(_trapped_mass(restricted, goal), prop, margin)
    if prop.kind == "reward":
        redirected, target = _redirect_deadlocks(restricted)
        value = expected_reach_reward(redirected, prop.reward, goal | {target}, tol)
        return _violates_upper(value, prop, margin)
    return False


def program_ce(p: Program, relevant, prop: Property, raw: MarkovChain | None = None,
               prop_index: int = 0, max_ces: int = DEFAULT_MAX_CES,
               tol: float = DEFAULT_TOL) -> list[CommandCE]:
    """Counterexamples with the fewest relevant commands for a violated ``prop``.

    Irrelevant commands are always part of a counterexample.  Every minimal
    candidate at the first successful size is returned (at most
    ``max_ces``).  The full command set is always a counterexample and is
    used for bounded properties, which get no dedicated construction.
    """
    raw = build_mc(p)[0] if raw is None else raw
    everything = frozenset(c.index for c in p.commands)
    relevant = frozenset(relevant) & everything
    base = everything - relevant
    full = [CommandCE(everything, prop_index, relevant)]
    if prop.kind not in ("reach", "reward"):
        return full
    goal = goal_states(raw, prop.goal)
    ordered = sorted(relevant)
    for size in range(len(ordered)):
        found = []
        for combo in itertools.combinations(ordered, size):
            commands = base | frozenset(combo)
            if is_program_ce(raw, commands, prop, goal, tol):
                found.append(CommandCE(commands, prop_index, frozenset(combo)))
                if len(found) >= max_ces:
                    break
        if found:
            return found
    return full


# -- conflicts -------------------------------------------------------------------

def _conflict(sketch: Sketch, r: Mapping[str, int], holes, source: int) -> Conflict:
    return Conflict(tuple((h, r[h]) for h in sketch.hole_names if h in holes), source)


def generate_conflict(sketch: Sketch, r: Mapping[str, int], ce: CommandCE) -> Conflict:
    """Fix the holes that occur in the counterexample's commands, leave the rest open."""
    holes = set()
    for i in ce.commands:
        holes |= sketch.command_holes[i]
    return _conflict(sketch, r, holes, ce.prop_index)


def ill_formed_conflict(sketch: Sketch, r: Mapping[str, int], err: IllFormedError) -> Conflict:
    """Conflict for a realization whose program is ill formed.

    The offending state stays reachable as long as the commands on the path
    leading to it are unchanged, so their holes join the conflict.  For an
    overlap only the guards of the overlapping commands matter.
    """
    holes = set()
    for i in err.path_commands:
        holes |= sketch.command_holes[i]
    for i in err.commands:
        if err.kind == "overlap":
            holes |= holes_in(sketch.commands[i].guard)
        else:
            holes |= sketch.command_holes[i]
    return _conflict(sketch, r, holes, WELL_FORMEDNESS)


def full_conflict(sketch: Sketch, r: Mapping[str, int], source: int) -> Conflict:
    return _conflict(sketch, r, set(sketch.hole_names), source)


def dump_ce(sketch: Sketch, r: Mapping[str, int], ce: CommandCE) -> str:
    """The counterexample as command indices plus the restricted program text."""
    program = restrict(instantiate(sketch, r), ce.commands)
    head = f"// counterexample for property {ce.prop_index}: commands {sorted(ce.commands)}\n"
    return head + unparse_program(program)
