"""Explicit families of Markov chains and an exact rational oracle.

A family maps every state to a distribution over *parameters*; a
realization picks a successor state for each parameter.  Family chains
label state ``i`` with the one-variable assignment ``(i,)`` over variable
``s``, so properties such as ``P<=2/5 [F s=2]`` apply directly.

Text format (one declaration per line, ``#`` comments)::

    init 0
    state 0: 1/2:k1 + 1/2:k2
    param k2: {2, 3}
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping

from .checker import prob0, prob1
from .mc import MarkovChain


@dataclass(frozen=True)
class Family:
    n: int
    initial: int
    params: Mapping  # parameter -> tuple of allowed successor states
    dist: tuple  # per state: tuple of (Fraction, parameter)

    def __post_init__(self):
        if not 0 <= self.initial < self.n:
            raise ValueError("initial state out of range")
        if len(self.dist) != self.n:
            raise ValueError("every state needs a distribution")
        for k, dom in self.params.items():
            if not dom:
                raise ValueError(f"parameter {k} has an empty domain")
            if any(not 0 <= t < self.n for t in dom):
                raise ValueError(f"domain of {k} leaves the state space")
        merged = []
        for s, entries in enumerate(self.dist):
            acc: dict = {}
            for p, k in entries:
                if k not in self.params:
                    raise ValueError(f"state {s} uses undeclared parameter {k}")
                if p < 0:
                    raise ValueError(f"negative probability in state {s}")
                acc[k] = acc.get(k, Fraction(0)) + Fraction(p)
            if sum(acc.values()) != 1:
                raise ValueError(f"distribution of state {s} does not sum to one")
            merged.append(tuple((p, k) for k, p in acc.items()))
        object.__setattr__(self, "dist", tuple(merged))

    @property
    def param_names(self) -> tuple:
        return tuple(sorted(self.params, key=_natural_key))

    def params_of(self, states) -> set:
        return {k for s in states for _, k in self.dist[s]}


def _natural_key(name: str):
    return [int(part) if part.isdigit() else part for part in re.split(r"(\d+)", name)]


_STATE_RE = re.compile(r"state\s+(\d+)\s*:\s*(.+)$")
_PARAM_RE = re.compile(r"param\s+(\w+)\s*:\s*\{([^}]*)\}$")
_INIT_RE = re.compile(r"init\s+(\d+)$")


def parse_family(text: str) -> Family:
    dist: dict = {}
    params: dict = {}
    initial = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if m := _STATE_RE.match(line):
            entries = []
            for term in m.group(2).split("+"):
                p, _, k = term.strip().rpartition(":")
                if not p:
                    raise ValueError(f"line {lineno}: expected <prob>:<param>")
                entries.append((Fraction(p.strip()), k.strip()))
            dist[int(m.group(1))] = tuple(entries)
        elif m := _PARAM_RE.match(line):
            dom = tuple(sorted(int(x) for x in m.group(2).replace(",", " ").split()))
            params[m.group(1)] = dom
        elif m := _INIT_RE.match(line):
            initial = int(m.group(1))
        else:
            raise ValueError(f"line {lineno}: cannot parse {raw!r}")
    n = max(dist) + 1 if dist else 0
    return Family(n, initial, params, tuple(dist.get(s, ()) for s in range(n)))


def family_instantiate(f: Family, r: Mapping[str, int]) -> MarkovChain:
    """The chain obtained by replacing every parameter ``k`` by ``r[k]``."""
    for k, dom in f.params.items():
        if k not in r:
            raise ValueError(f"realization leaves parameter {k} unassigned")
        if r[k] not in dom:
            raise ValueError(f"r({k}) = {r[k]} is outside its domain {dom}")
    rows = []
    for entries in f.dist:
        succ: dict = {}
        for p, k in entries:
            t = r[k]
            if t in succ:
                succ[t] = (succ[t][0] + p, succ[t][1])
            else:
                succ[t] = (p, k)
        rows.append(tuple((t, p, k) for t, (p, k) in succ.items()))
    return MarkovChain(tuple((s,) for s in range(f.n)), f.initial, tuple(rows), ("s",))


def enumerate_family(f: Family) -> Iterator[dict]:
    """All realizations, lexicographic in (parameter, domain) order."""
    names = f.param_names
    for combo in itertools.product(*(f.params[k] for k in names)):
        yield dict(zip(names, combo))


def family_conflict(f: Family, r: Mapping[str, int], critical) -> dict:
    """Partial realization fixing the parameters used by the critical states."""
    return {k: r[k] for k in f.param_names if k in f.params_of(critical)}


def extends(r: Mapping, partial: Mapping) -> bool:
    return all(r.get(k) == v for k, v in partial.items())


# -- exact oracle ------------------------------------------------------------

def _solve_exact(unknowns, coeffs, const) -> dict:
    """Solve ``x = const + A x`` exactly by sparse Gaussian elimination.

    ``coeffs[s]`` maps unknowns to their (rational) coefficient in row s.
    The system must be non-singular (transient part of a chain).
    """
    rows = {s: {s: Fraction(1)} for s in unknowns}
    rhs = {s: Fraction(const[s]) for s in unknowns}
    cols: dict = {s: {s} for s in unknowns}
    for s in unknowns:
        for t, p in coeffs[s].items():
            rows[s][t] = rows[s].get(t, Fraction(0)) - p
            cols.setdefault(t, set()).add(s)
    eliminated: set = set()
    order = []
    for s in unknowns:
        piv_row = rows[s]
        piv = piv_row[s]
        for r in list(cols[s]):
            if r == s or r in eliminated:
                continue
            factor = rows[r].pop(s) / piv
            for t, c in piv_row.items():
                if t == s:
                    continue
                v = rows[r].get(t, Fraction(0)) - factor * c
                if v:
                    rows[r][t] = v
                    cols[t].add(r)
                else:
                    rows[r].pop(t, None)
            rhs[r] -= factor * rhs[s]
        eliminated.add(s)
        order.append(s)
    x: dict = {}
    for s in reversed(order):
        acc = rhs[s]
        for t, c in rows[s].items():
            if t != s:
                acc -= c * x[t]
        x[s] = acc / rows[s][s]
    return x


def exact_reach_prob(mc: MarkovChain, goal) -> Fraction:
    """Exact rational reachability probability (oracle for the checker)."""
    goal = set(goal)
    if mc.initial in goal:
        return Fraction(1)
    zero = prob0(mc, goal)
    one = prob1(mc, goal, zero)
    if mc.initial in one:
        return Fraction(1)
    if mc.initial in zero:
        return Fraction(0)
    maybe = [s for s in mc.reachable() if s not in zero and s not in one]
    mset = set(maybe)
    coeffs, const = {}, {}
    for s in maybe:
        coeffs[s] = {}
        const[s] = Fraction(0)
        for t, p, _ in mc.rows[s]:
            if t in mset:
                coeffs[s][t] = coeffs[s].get(t, Fraction(0)) + p
            elif t in one:
                const[s] += p
    return _solve_exact(maybe, coeffs, const)[mc.initial]
