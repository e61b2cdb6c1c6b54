"""Explicit Markov chains and their construction from hole-free programs.

Every transition carries the index of the command that generated it, so a
restriction of the program to a command subset can be read off the chain
of the full program (:meth:`MarkovChain.restrict_commands`) instead of being
rebuilt.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping

from scipy import sparse

from .expr import Binary, Expr, Lit, Oob, Unary, compile_expr, format_number
from .lang import Program

OOB = "<oob>"


class IllFormedError(Exception):
    """A realization whose program is not well formed at a reachable state.

    ``commands`` are the commands at fault, ``path_commands`` the commands
    that fire along the breadth-first path from the initial state to
    ``state``.  Any program agreeing on all of them is ill formed as well.
    """

    kind = "ill-formed"

    def __init__(self, message, state, commands, path_commands=(), report=None):
        super().__init__(message)
        self.state = state
        self.commands = tuple(commands)
        self.path_commands = tuple(path_commands)
        self.report = report


class OverlappingGuards(IllFormedError):
    kind = "overlap"


class InvalidProbability(IllFormedError):
    kind = "probability"


class InvalidUpdate(IllFormedError):
    kind = "update"


@dataclass(frozen=True)
class MarkovChain:
    labels: tuple
    initial: int
    # per state: tuple of (successor, exact probability, command index or None)
    rows: tuple
    variables: tuple = ()
    rewards: Mapping = field(default_factory=dict)
    oob: int | None = None
    # original state indices when this chain is a sub-chain of another
    origin: tuple | None = None

    @property
    def n(self) -> int:
        return len(self.rows)

    @cached_property
    def succ(self) -> list:
        """Float successor lists ``[(t, p), ...]`` per state."""
        return [[(t, float(p)) for t, p, _ in row] for row in self.rows]

    @cached_property
    def pred(self) -> list:
        preds = [set() for _ in range(self.n)]
        for s, row in enumerate(self.rows):
            for t, p, _ in row:
                if p > 0:
                    preds[t].add(s)
        return preds

    @cached_property
    def matrix(self):
        """Float transition matrix as a CSR array."""
        data, ri, ci = [], [], []
        for s, row in enumerate(self.rows):
            for t, p, _ in row:
                ri.append(s)
                ci.append(t)
                data.append(float(p))
        return sparse.csr_array((data, (ri, ci)), shape=(self.n, self.n))

    @property
    def deadlocks(self) -> frozenset:
        return frozenset(s for s, row in enumerate(self.rows) if not row)

    @cached_property
    def float_rewards(self) -> dict:
        return {k: [float(x) for x in v] for k, v in self.rewards.items()}

    def reachable(self, start: Iterable[int] | None = None) -> list:
        """States reachable from ``start`` (default: initial) in BFS order."""
        start = [self.initial] if start is None else list(start)
        seen = set(start)
        order = list(start)
        queue = deque(start)
        while queue:
            s = queue.popleft()
            for t, p, _ in self.rows[s]:
                if p > 0 and t not in seen:
                    seen.add(t)
                    order.append(t)
                    queue.append(t)
        return order

    def restrict_commands(self, commands: Iterable[int]) -> "MarkovChain":
        """Drop every transition generated by a command outside ``commands``.

        Synthetic transitions (annotation ``None``) are kept.
        """
        keep = set(commands)
        # a row stems from a single command (or is synthetic), so it is kept or dropped whole
        rows = tuple(row if not row or row[0][2] is None or row[0][2] in keep else ()
                     for row in self.rows)
        return replace(self, rows=rows)

    def prune(self) -> "MarkovChain":
        """Keep only reachable states, renumbered in BFS order."""
        order = self.reachable()
        new = {s: i for i, s in enumerate(order)}
        rows = tuple(tuple((new[t], p, c) for t, p, c in self.rows[s]) for s in order)
        return MarkovChain(
            labels=tuple(self.labels[s] for s in order),
            initial=0,
            rows=rows,
            variables=self.variables,
            rewards={k: tuple(v[s] for s in order) for k, v in self.rewards.items()},
            oob=new.get(self.oob) if self.oob is not None else None,
            origin=tuple(self.origin[s] if self.origin else s for s in order),
        )

    def transitions(self):
        for s, row in enumerate(self.rows):
            for t, p, c in row:
                yield s, t, p, c

    def dump(self) -> str:
        """One line per transition: ``src dst prob cmd`` (``-`` if synthetic)."""
        return "".join(
            f"{s} {t} {format_number(p)} {'-' if c is None else c}\n"
            for s, t, p, c in self.transitions())

    def state_of(self, label) -> int:
        return self.labels.index(label)


@dataclass(frozen=True)
class BuildReport:
    overlap: tuple | None
    oob_reached: bool
    deadlock_states: frozenset
    reachable_count: int


def _path_commands(parent, s) -> list:
    cmds = []
    while parent[s] is not None:
        s, c = parent[s]
        cmds.append(c)
    return sorted(set(cmds))


@dataclass
class _CompiledCommand:
    index: int
    guard: object
    branches: list  # (prob fn, [(var position, value fn)])


def _compile_program(p: Program):
    vi = p.var_index
    out = []
    for c in p.commands:
        branches = [(compile_expr(b.prob, vi), [(vi[t], compile_expr(e, vi)) for t, e in b.updates])
                    for b in c.branches]
        out.append(_CompiledCommand(c.index, compile_expr(c.guard, vi), branches))
    return out


def build_mc(p: Program) -> tuple[MarkovChain, BuildReport]:
    """Breadth-first construction of the program's reachable chain.

    Deadlocks are recorded but left unfixed (see :func:`fixdl`).  Updates
    leaving a variable's range lead to the single sink state ``OOB``.
    Raises an :class:`IllFormedError` subclass on overlapping guards or bad
    probabilities at a reachable state.
    """
    commands = _compile_program(p)
    lows = [v.low for v in p.variables]
    highs = [v.high for v in p.variables]
    init = tuple(v.init for v in p.variables)
    index = {init: 0}
    labels = [init]
    parent = {0: None}
    rows: list = []
    deadlocks = set()
    oob = None
    queue = deque([0])

    def report(overlap=None):
        return BuildReport(overlap, oob is not None, frozenset(deadlocks), len(labels))

    while queue:
        s = queue.popleft()
        state = labels[s]
        if state == OOB:
            rows.append(((s, Fraction(1), None),))
            continue
        enabled = [c for c in commands if c.guard(state)]
        if len(enabled) > 1:
            pair = (enabled[0].index, enabled[1].index)
            raise OverlappingGuards(
                f"commands {pair[0]} and {pair[1]} overlap in state {state}",
                state, pair, _path_commands(parent, s), report((state, pair)))
        if not enabled:
            deadlocks.add(s)
            rows.append(())
            continue
        cmd = enabled[0]
        total = 0
        succ: dict = {}
        for prob_fn, updates in cmd.branches:
            prob = prob_fn(state)
            if isinstance(prob, bool) or prob < 0 or prob > 1:
                raise InvalidProbability(
                    f"command {cmd.index} has probability {prob} in state {state}",
                    state, (cmd.index,), _path_commands(parent, s), report())
            total += prob
            if prob == 0:
                continue
            new = list(state)
            out_of_bounds = False
            for pos, fn in updates:
                value = fn(state)
                if value != int(value):
                    raise InvalidUpdate(
                        f"command {cmd.index} assigns non-integer {value} in state {state}",
                        state, (cmd.index,), _path_commands(parent, s), report())
                value = int(value)
                if not lows[pos] <= value <= highs[pos]:
                    out_of_bounds = True
                new[pos] = value
            target = OOB if out_of_bounds else tuple(new)
            if target not in index:
                index[target] = len(labels)
                labels.append(target)
                parent[index[target]] = (s, cmd.index)
                queue.append(index[target])
                if target == OOB:
                    oob = index[target]
            t = index[target]
            succ[t] = succ.get(t, 0) + Fraction(prob)
        if total != 1:
            raise InvalidProbability(
                f"probabilities of command {cmd.index} sum to {total} in state {state}",
                state, (cmd.index,), _path_commands(parent, s), report())
        rows.append(tuple((t, q, cmd.index) for t, q in succ.items()))

    rewards = {}
    vi = p.var_index
    for rs in p.rewards:
        items = [(compile_expr(g, vi), compile_expr(v, vi)) for g, v in rs.items]
        values = []
        for label in labels:
            total = Fraction(0)
            if label != OOB:
                for g, v in items:
                    if g(label):
                        total += v(label)
            if total < 0:
                raise ValueError(f"negative reward in structure {rs.name!r}")
            values.append(total)
        rewards[rs.name] = tuple(values)

    mc = MarkovChain(tuple(labels), 0, tuple(rows), tuple(v.name for v in p.variables),
                     rewards, oob)
    return mc, report()


def fixdl(mc: MarkovChain) -> MarkovChain:
    """Give every deadlock state a synthetic probability-one self-loop."""
    if not mc.deadlocks:
        return mc
    rows = tuple(row if row else ((s, Fraction(1), None),) for s, row in enumerate(mc.rows))
    return replace(mc, rows=rows)


def restrict(p: Program, commands: Iterable[int]) -> Program:
    """The program keeping only the commands whose index is in ``commands``."""
    keep = set(commands)
    unknown = keep - {c.index for c in p.commands}
    if unknown:
        raise ValueError(f"unknown command indices {sorted(unknown)}")
    return replace(p, commands=tuple(c for c in p.commands if c.index in keep))


def no_path_states(mc: MarkovChain, goal: Iterable[int]) -> set:
    """States without any path to ``goal`` (graph analysis only)."""
    goal = set(goal)
    seen = set(goal)
    queue = deque(goal)
    pred = mc.pred
    while queue:
        t = queue.popleft()
        for s in pred[t]:
            if s not in seen:
                seen.add(s)
                queue.append(s)
    return set(range(mc.n)) - seen


def sub_mc(mc: MarkovChain, critical: Iterable[int]) -> MarkovChain:
    """Sub-chain induced by ``critical``: successors outside it become absorbing.

    The result contains exactly ``critical`` and its successors, ordered by
    original index; ``origin`` maps back to ``mc``'s state indices.
    """
    crit = set(critical)
    if mc.initial not in crit:
        raise ValueError("critical set must contain the initial state")
    keep = set(crit)
    for s in crit:
        keep.update(t for t, p, _ in mc.rows[s] if p > 0)
    order = sorted(keep)
    new = {s: i for i, s in enumerate(order)}
    rows = []
    for s in order:
        if s in crit:
            rows.append(tuple((new[t], p, c) for t, p, c in mc.rows[s] if p > 0))
        else:
            rows.append(((new[s], Fraction(1), None),))
    return MarkovChain(
        labels=tuple(mc.labels[s] for s in order),
        initial=new[mc.initial],
        rows=tuple(rows),
        variables=mc.variables,
        rewards={k: tuple(v[s] for s in order) for k, v in mc.rewards.items()},
        oob=new.get(mc.oob) if mc.oob is not None else None,
        origin=tuple(mc.origin[s] if mc.origin else s for s in order),
    )


def _holds_in_oob(e: Expr) -> bool:
    # variable predicates are false in the sink; only the oob atom is true
    if isinstance(e, Oob):
        return True
    if isinstance(e, Lit) and isinstance(e.value, bool):
        return e.value
    if isinstance(e, Unary) and e.op == "!":
        return not _holds_in_oob(e.arg)
    if isinstance(e, Binary) and e.op in ("&", "|", "=>", "<=>"):
        a, b = _holds_in_oob(e.left), _holds_in_oob(e.right)
        return {"&": a and b, "|": a or b, "=>": (not a) or b, "<=>": a == b}[e.op]
    return False


def goal_states(mc: MarkovChain, goal: Expr) -> set:
    """Indices of the states satisfying ``goal``."""
    fn = compile_expr(goal, {v: i for i, v in enumerate(mc.variables)})
    out = set()
    for s, label in enumerate(mc.labels):
        if label == OOB:
            if _holds_in_oob(goal):
                out.add(s)
        elif fn(label):
            out.add(s)
    return out
