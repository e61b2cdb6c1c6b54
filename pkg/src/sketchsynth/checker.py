"""Quantitative model checking of a single Markov chain.

Unbounded properties use a qualitative graph pre-analysis followed by
Gauss-Seidel value iteration on the remaining states.  Bounded properties
use ``k`` sparse matrix-vector products.  The relation of a property is
evaluated on the raw computed value; ``tol`` only controls convergence, so
thresholds within ``tol`` of the true value can flip.
"""
from __future__ import annotations

import math
from collections import deque

import numpy as np

from .lang import Property
from .mc import MarkovChain, goal_states, no_path_states

DEFAULT_TOL = 1e-8
MAX_ITERATIONS = 10**6
INFINITE = math.inf


class ConvergenceError(RuntimeError):
    pass


def prob0(mc: MarkovChain, goal: set) -> set:
    return no_path_states(mc, goal)


def prob1(mc: MarkovChain, goal: set, zero: set | None = None) -> set:
    """States reaching ``goal`` with probability one.

    These are the states that cannot reach a probability-zero state along a
    path avoiding ``goal``.
    """
    zero = prob0(mc, goal) if zero is None else zero
    seen = set(zero)
    queue = deque(zero)
    pred = mc.pred
    while queue:
        t = queue.popleft()
        for s in pred[t]:
            if s not in seen and s not in goal:
                seen.add(s)
                queue.append(s)
    return set(range(mc.n)) - seen


def _reachable_avoiding(mc: MarkovChain, goal: set) -> list:
    seen = {mc.initial}
    order = [mc.initial]
    queue = deque(order)
    while queue:
        s = queue.popleft()
        for t, p in mc.succ[s]:
            if p > 0 and t not in seen and t not in goal:
                seen.add(t)
                order.append(t)
                queue.append(t)
    return order


def _gauss_seidel(order, coeffs, const, tol, max_iter):
    """Solve ``x[s] = const[s] + sum(p * x[t])`` over ``order`` in place."""
    x = {s: 0.0 for s in order}
    for _ in range(max_iter):
        done = True
        for s in order:
            new = const[s]
            for t, p in coeffs[s]:
                new += p * x[t]
            old = x[s]
            if done and abs(new - old) > tol * abs(new):
                done = False
            x[s] = new
        if done:
            return x
    raise ConvergenceError(f"value iteration did not converge within {max_iter} iterations")


def reach_values(mc: MarkovChain, goal, tol: float = DEFAULT_TOL,
                 max_iter: int = MAX_ITERATIONS) -> dict:
    """Reachability probabilities for every state reachable from the initial one."""
    goal = set(goal)
    zero = prob0(mc, goal)
    one = prob1(mc, goal, zero)
    values = {}
    maybe = []
    for s in mc.reachable():
        if s in one:
            values[s] = 1.0
        elif s in zero:
            values[s] = 0.0
        else:
            maybe.append(s)
    if maybe:
        succ = mc.succ
        mset = set(maybe)
        coeffs, const = {}, {}
        for s in maybe:
            coeffs[s] = [(t, p) for t, p in succ[s] if t in mset]
            const[s] = sum(p for t, p in succ[s] if t in one)
        x = _gauss_seidel(maybe, coeffs, const, tol, max_iter)
        for s in maybe:
            values[s] = min(1.0, max(0.0, x[s]))
    return values


def reach_prob(mc: MarkovChain, goal, tol: float = DEFAULT_TOL) -> float:
    """Probability to eventually reach ``goal`` (a set of state indices)."""
    goal = set(goal)
    if mc.initial in goal:
        return 1.0
    return reach_values(mc, goal, tol)[mc.initial]


def bounded_reach_prob(mc: MarkovChain, goal, k: int) -> float:
    """Probability to reach ``goal`` within ``k`` steps."""
    if k < 0:
        raise ValueError("step bound must be non-negative")
    mask = np.zeros(mc.n, dtype=bool)
    mask[list(goal)] = True
    x = mask.astype(float)
    P = mc.matrix
    for _ in range(k):
        x = np.where(mask, 1.0, P @ x)
    return float(min(1.0, x[mc.initial]))


def expected_reach_reward(mc: MarkovChain, reward: str, goal,
                          tol: float = DEFAULT_TOL) -> float:
    """Expected reward collected before reaching ``goal``; ``inf`` if that is not almost sure.

    Only state rewards are used; goal states contribute nothing.
    """
    goal = set(goal)
    if mc.initial in goal:
        return 0.0
    if mc.initial not in prob1(mc, goal):
        return INFINITE
    rew = mc.float_rewards[reward]
    order = _reachable_avoiding(mc, goal)
    succ = mc.succ
    coeffs = {s: [(t, p) for t, p in succ[s] if t not in goal] for s in order}
    const = {s: rew[s] for s in order}
    return _gauss_seidel(order, coeffs, const, tol, MAX_ITERATIONS)[mc.initial]


def bounded_cum_reward(mc: MarkovChain, reward: str, k: int) -> float:
    """Expected reward accumulated over steps ``0 .. k-1``."""
    if k < 0:
        raise ValueError("step bound must be non-negative")
    r = np.asarray(mc.float_rewards[reward], dtype=float)
    x = np.zeros(mc.n)
    P = mc.matrix
    for _ in range(k):
        x = r + P @ x
    return float(x[mc.initial])


def property_value(mc: MarkovChain, prop: Property, tol: float = DEFAULT_TOL) -> float:
    if prop.kind == "cumulative":
        return bounded_cum_reward(mc, prop.reward, prop.steps)
    goal = goal_states(mc, prop.goal)
    if prop.kind == "reach":
        return reach_prob(mc, goal, tol)
    if prop.kind == "bounded_reach":
        return bounded_reach_prob(mc, goal, prop.steps)
    if prop.kind == "reward":
        return expected_reach_reward(mc, prop.reward, goal, tol)
    raise ValueError(f"unknown property kind {prop.kind}")


def check(mc: MarkovChain, prop: Property, tol: float = DEFAULT_TOL) -> tuple[bool, float]:
    """Return ``(holds, value)`` for ``prop`` on ``mc``."""
    value = property_value(mc, prop, tol)
    return prop.holds(value), value
