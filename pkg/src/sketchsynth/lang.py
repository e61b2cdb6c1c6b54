"""Sketch language front end: parsing, printing and instantiation.

The concrete syntax is a single-module subset of PRISM extended with hole
declarations and constraints::

    hole X either { XA is 1 cost 3, 2 }
    constraint !(XA && YA);
    module rex
      s : [0..3] init 0;
      s = 0 -> 0.5: s'=X + 0.5: s'=Y;
    endmodule
    rewards "steps" true : 1; endrewards

Property files hold one formula per line, e.g. ``P<=0.4 [F (s=3)]``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping

from .expr import (
    Expr, ExprError, Hole, Lit, Name, Oob, OptionRef, ParseError, Token,
    TokenStream, Var, evaluate, holes_in, infer_type, substitute_holes,
    tokenize, transform, unparse, format_number,
)

Realization = dict  # hole name -> option index (0-based); partial if keys missing


@dataclass(frozen=True)
class Variable:
    name: str
    low: int
    high: int
    init: int


@dataclass(frozen=True)
class Option:
    expr: Expr
    name: str | None = None
    cost: int = 0


@dataclass(frozen=True)
class HoleDecl:
    name: str
    options: tuple

    def describe(self, index: int) -> str:
        opt = self.options[index]
        text = unparse(opt.expr)
        return f"{opt.name}={text}" if opt.name else text


@dataclass(frozen=True)
class Branch:
    prob: Expr
    updates: tuple  # of (variable name, Expr)


@dataclass(frozen=True)
class Command:
    guard: Expr
    branches: tuple
    index: int

    def expressions(self) -> Iterator[Expr]:
        yield self.guard
        for b in self.branches:
            yield b.prob
            for _, e in b.updates:
                yield e

    @property
    def holes(self) -> frozenset:
        return frozenset().union(*(holes_in(e) for e in self.expressions()))


@dataclass(frozen=True)
class RewardStructure:
    name: str
    items: tuple  # of (guard Expr, value Expr)


@dataclass(frozen=True)
class Program:
    """A hole-free single-module program."""

    variables: tuple
    commands: tuple
    rewards: tuple = ()
    module: str = "main"

    @property
    def var_index(self) -> dict:
        return {v.name: i for i, v in enumerate(self.variables)}

    def reward(self, name: str) -> RewardStructure:
        for r in self.rewards:
            if r.name == name:
                return r
        raise KeyError(f"no reward structure named {name!r}")


@dataclass(frozen=True)
class Sketch:
    variables: tuple
    holes: tuple
    constraints: tuple
    commands: tuple
    rewards: tuple = ()
    module: str = "main"
    # holes occurring in each command, by position in ``commands``
    command_holes: tuple = field(default=(), compare=False)

    @property
    def hole_names(self) -> tuple:
        return tuple(h.name for h in self.holes)

    def hole(self, name: str) -> HoleDecl:
        for h in self.holes:
            if h.name == name:
                return h
        raise KeyError(name)

    @property
    def option_owner(self) -> dict:
        """Option name -> (hole name, option index)."""
        out = {}
        for h in self.holes:
            for i, o in enumerate(h.options):
                if o.name:
                    out[o.name] = (h.name, i)
        return out

    @property
    def relevant_commands(self) -> frozenset:
        return frozenset(i for i, hs in enumerate(self.command_holes) if hs)

    @property
    def design_space_size(self) -> int:
        n = 1
        for h in self.holes:
            n *= len(h.options)
        return n

    def realization_from_values(self, values: Mapping[str, object]) -> Realization:
        """Select options by their printed expression, e.g. ``{"X": 1}``."""
        out = {}
        for name, value in values.items():
            texts = [unparse(o.expr) for o in self.hole(name).options]
            out[name] = texts.index(str(value))
        return out

    def describe(self, r: Mapping[str, int]) -> str:
        return ", ".join(
            f"{h.name}={h.describe(r[h.name])}" if h.name in r else f"{h.name}=?"
            for h in self.holes)

    def satisfies_constraints(self, r: Mapping[str, int]) -> bool:
        owner = self.option_owner
        for c in self.constraints:
            if not evaluate(_constraint_as_bool(c, owner, r)):
                return False
        return True


def _constraint_as_bool(c: Expr, owner, r) -> Expr:
    def leaf(n):
        if isinstance(n, OptionRef):
            h, i = owner[n.name]
            return Lit(r[h] == i)
        return None
    return transform(c, leaf)


# -- sketch parser -----------------------------------------------------------

class _SketchParser:
    def __init__(self, text: str):
        self.ts = TokenStream(tokenize(text))
        self.consts: dict[str, Expr] = {}
        self.variables: list[Variable] = []
        self.holes: list[tuple[HoleDecl, Token]] = []
        self.constraints: list[Expr] = []
        self.commands: list[tuple] = []
        self.rewards: list[tuple] = []
        self.module = "main"

    def parse(self) -> Sketch:
        ts = self.ts
        seen_module = False
        while ts.peek().kind != "eof":
            if ts.accept("dtmc") or ts.accept("probabilistic"):
                continue
            if ts.at("const"):
                self._const()
            elif ts.at("hole"):
                self._hole()
            elif ts.at("constraint"):
                ts.next()
                self.constraints.append((ts.expression(), ts.peek()))
                ts.expect(";")
            elif ts.at("module"):
                if seen_module:
                    ts.error("only a single module is supported")
                seen_module = True
                self._module()
            elif ts.at("rewards"):
                self._rewards()
            else:
                ts.error(f"unexpected {ts.peek().text!r}")
        return self._resolve()

    def _const(self):
        ts = self.ts
        ts.expect("const")
        if ts.at("int", "double"):
            ts.next()
        name = ts.expect_kind("ident", "constant name")
        ts.expect("=")
        e = ts.expression()
        ts.expect(";")
        self._declare(name)
        self.consts[name.text] = self._resolve_expr(e, allow=("const",))

    def _hole(self):
        ts = self.ts
        ts.expect("hole")
        name = ts.expect_kind("ident", "hole identifier")
        ts.expect("either")
        ts.expect("{")
        options = []
        while True:
            opt_name = None
            if ts.peek().kind == "ident" and ts.peek(1).text == "is":
                opt_name = ts.next()
                ts.next()
            e = ts.expression()
            cost = 0
            if ts.accept("cost") or ts.accept("price"):
                tok = ts.peek()
                value = evaluate(self._resolve_expr(ts.expression(), allow=("const",)))
                if isinstance(value, bool) or value != int(value) or value < 0:
                    ts.error("option cost must be a natural number", tok)
                cost = int(value)
            options.append((e, opt_name, cost))
            if ts.accept("}"):
                break
            ts.expect(",")
        ts.accept(";")
        self.holes.append((name, options))

    def _module(self):
        ts = self.ts
        ts.expect("module")
        self.module = ts.expect_kind("ident", "module name").text
        while not ts.accept("endmodule"):
            if ts.peek().kind == "eof":
                ts.error("missing endmodule")
            if ts.peek().kind == "ident" and ts.peek(1).text == ":" and ts.peek(2).text == "[":
                self._variable()
            else:
                self._command()

    def _variable(self):
        ts = self.ts
        name = ts.next()
        ts.expect(":")
        ts.expect("[")
        low = self._const_int(ts.arith())
        ts.expect("..")
        high = self._const_int(ts.arith())
        ts.expect("]")
        init = low
        if ts.accept("init"):
            init = self._const_int(ts.arith())
        ts.expect(";")
        if low > high:
            ts.error(f"empty range for variable {name.text}", name)
        if not low <= init <= high:
            ts.error(f"initial value of {name.text} outside its bounds", name)
        self._declare(name)
        self.variables.append(Variable(name.text, low, high, init))

    def _const_int(self, e: Expr) -> int:
        value = evaluate(self._resolve_expr(e, allow=("const",)))
        if value != int(value):
            self.ts.error("expected an integer constant")
        return int(value)

    def _command(self):
        ts = self.ts
        start = ts.peek()
        if ts.accept("["):
            if not ts.accept("]"):
                ts.error("synchronisation labels are not supported")
        guard = ts.expression()
        ts.expect("->")
        branches = []
        while True:
            branches.append(self._branch())
            if ts.accept(";"):
                break
            ts.expect("+")
        self.commands.append((guard, branches, start))

    def _starts_update(self) -> bool:
        ts = self.ts
        if ts.at("true") and ts.peek(1).text in (";", "+"):
            return True
        if ts.peek().kind == "ident" and ts.peek(1).text == "'":
            return True
        return ts.at("(") and ts.peek(1).kind == "ident" and ts.peek(2).text == "'"

    def _branch(self):
        ts = self.ts
        prob: Expr = Lit(1)
        if not self._starts_update():
            prob = ts.arith()
            ts.expect(":")
        updates = []
        if ts.accept("true"):
            return prob, updates
        while True:
            paren = ts.accept("(")
            target = ts.expect_kind("ident", "variable")
            ts.expect("'")
            ts.expect("=")
            ts.stop_at_branch_plus = not paren
            value = ts.arith()
            ts.stop_at_branch_plus = False
            if paren:
                ts.expect(")")
            updates.append((target, value))
            if not ts.accept("&"):
                break
        return prob, updates

    def _rewards(self):
        ts = self.ts
        ts.expect("rewards")
        name = ts.expect_kind("string", "reward name").text.strip('"')
        items = []
        while not ts.accept("endrewards"):
            if ts.peek().kind == "eof":
                ts.error("missing endrewards")
            guard = ts.expression()
            ts.expect(":")
            value = ts.expression()
            ts.expect(";")
            items.append((guard, value))
        self.rewards.append((name, items))

    # -- resolution and validation

    def _declare(self, tok: Token):
        if tok.text in self.consts or any(v.name == tok.text for v in self.variables):
            self.ts.error(f"duplicate declaration of {tok.text}", tok)

    def _resolve_expr(self, e: Expr, allow=("const", "var", "hole"), owner=None) -> Expr:
        var_names = {v.name for v in self.variables}
        hole_names = {h.text for h, _ in self.holes}

        def leaf(n):
            if not isinstance(n, Name):
                return None
            if "option" in allow:
                if n.name in owner:
                    return OptionRef(n.name)
                raise ParseError(f"undeclared option name {n.name}", n.line, n.col)
            if n.name in self.consts and "const" in allow:
                return self.consts[n.name]
            if n.name in var_names and "var" in allow:
                return Var(n.name)
            if n.name in hole_names and "hole" in allow:
                return Hole(n.name)
            kinds = [k for k, key in (("hole", "hole"), ("variable", "var")) if key in allow]
            what = " or ".join(kinds) or "constant"
            raise ParseError(f"undeclared {what} {n.name}", n.line, n.col)

        return transform(e, leaf)

    def _check_type(self, e: Expr, want: str, tok: Token, hole_types, what: str):
        try:
            got = infer_type(e, hole_types)
        except ExprError as err:
            raise ParseError(str(err), tok.line, tok.col) from None
        if got != want:
            raise ParseError(f"{what} must be {'boolean' if want == 'bool' else 'numeric'}",
                             tok.line, tok.col)

    def _resolve(self) -> Sketch:
        seen = set()
        option_names: dict[str, Token] = {}
        holes = []
        reserved = set(self.consts) | {v.name for v in self.variables}
        for name, options in self.holes:
            if name.text in seen:
                raise ParseError(f"duplicate hole {name.text}", name.line, name.col)
            if name.text in reserved:
                raise ParseError(f"hole {name.text} clashes with another declaration",
                                 name.line, name.col)
            seen.add(name.text)
            opts = []
            for e, oname, cost in options:
                if oname is not None:
                    if oname.text in option_names or oname.text in reserved or oname.text in seen:
                        raise ParseError(f"duplicate option name {oname.text}", oname.line, oname.col)
                    option_names[oname.text] = oname
                opts.append(Option(self._resolve_expr(e, allow=("const", "var")),
                                   oname.text if oname else None, cost))
            holes.append(HoleDecl(name.text, tuple(opts)))
        clash = set(option_names) & seen
        if clash:
            tok = option_names[sorted(clash)[0]]
            raise ParseError(f"duplicate option name {tok.text}", tok.line, tok.col)

        hole_types = {}
        for (tok, _), h in zip(self.holes, holes):
            types = set()
            for o in h.options:
                try:
                    types.add(infer_type(o.expr))
                except ExprError as err:
                    raise ParseError(str(err), tok.line, tok.col) from None
            if len(types) != 1:
                raise ParseError(f"options of hole {h.name} mix numbers and booleans",
                                 tok.line, tok.col)
            hole_types[h.name] = types.pop()

        owner = {n: None for n in option_names}
        constraints = []
        for e, tok in self.constraints:
            c = self._resolve_expr(e, allow=("option",), owner=owner)
            self._check_type(c, "bool", tok, hole_types, "constraint")
            constraints.append(c)

        var_names = {v.name for v in self.variables}
        commands = []
        for idx, (guard, branches, tok) in enumerate(self.commands):
            g = self._resolve_expr(guard)
            self._check_type(g, "bool", tok, hole_types, "guard")
            out = []
            for prob, updates in branches:
                p = self._resolve_expr(prob)
                self._check_type(p, "int", tok, hole_types, "probability")
                ups = []
                for target, value in updates:
                    if target.text not in var_names:
                        raise ParseError(f"undeclared variable {target.text}", target.line, target.col)
                    if any(t == target.text for t, _ in ups):
                        raise ParseError(f"variable {target.text} updated twice", target.line, target.col)
                    v = self._resolve_expr(value)
                    self._check_type(v, "int", target, hole_types, "update")
                    ups.append((target.text, v))
                out.append(Branch(p, tuple(ups)))
            commands.append(Command(g, tuple(out), idx))

        rewards = []
        names = set()
        for name, items in self.rewards:
            if name in names:
                raise ParseError(f"duplicate reward structure {name!r}")
            names.add(name)
            its = []
            for guard, value in items:
                g = self._resolve_expr(guard, allow=("const", "var"))
                v = self._resolve_expr(value, allow=("const", "var"))
                self._check_type(g, "bool", self.ts.peek(), hole_types, "reward guard")
                self._check_type(v, "int", self.ts.peek(), hole_types, "reward value")
                its.append((g, v))
            rewards.append(RewardStructure(name, tuple(its)))

        return Sketch(
            variables=tuple(self.variables),
            holes=tuple(holes),
            constraints=tuple(constraints),
            commands=tuple(commands),
            rewards=tuple(rewards),
            module=self.module,
            command_holes=tuple(c.holes for c in commands),
        )


def parse_sketch(text: str) -> Sketch:
    """Parse sketch text; raises :class:`ParseError` with a line/column."""
    return _SketchParser(text).parse()


def parse_program(text: str) -> Program:
    sketch = parse_sketch(text)
    if sketch.holes:
        raise ParseError("program contains holes")
    return instantiate(sketch, {})


# -- printing ----------------------------------------------------------------

def _unparse_command(c: Command) -> str:
    parts = []
    for b in c.branches:
        ups = " & ".join(f"({t}'={unparse(e)})" for t, e in b.updates) or "true"
        parts.append(f"{unparse(b.prob)} : {ups}")
    return f"  {unparse(c.guard)} -> {' + '.join(parts)};"


def _unparse_body(variables, commands, rewards, module) -> list[str]:
    lines = [f"module {module}"]
    for v in variables:
        lines.append(f"  {v.name} : [{v.low}..{v.high}] init {v.init};")
    lines += [_unparse_command(c) for c in commands]
    lines.append("endmodule")
    for r in rewards:
        lines.append(f'rewards "{r.name}"')
        lines += [f"  {unparse(g)} : {unparse(v)};" for g, v in r.items]
        lines.append("endrewards")
    return lines


def unparse_sketch(s: Sketch) -> str:
    lines = []
    for h in s.holes:
        opts = []
        for o in h.options:
            text = unparse(o.expr)
            if o.name:
                text = f"{o.name} is {text}"
            if o.cost:
                text += f" cost {o.cost}"
            opts.append(text)
        lines.append(f"hole {h.name} either {{ {', '.join(opts)} }}")
    lines += [f"constraint {unparse(c)};" for c in s.constraints]
    lines += _unparse_body(s.variables, s.commands, s.rewards, s.module)
    return "\n".join(lines) + "\n"


def unparse_program(p: Program) -> str:
    return "\n".join(_unparse_body(p.variables, p.commands, p.rewards, p.module)) + "\n"


# -- instantiation -----------------------------------------------------------

def _check_realization(sketch: Sketch, r: Mapping[str, int], partial: bool = False):
    for h in sketch.holes:
        if h.name not in r:
            if partial:
                continue
            raise ValueError(f"realization leaves hole {h.name} unassigned")
        i = r[h.name]
        if not 0 <= i < len(h.options):
            raise ValueError(f"option index {i} out of range for hole {h.name}")
    extra = set(r) - set(sketch.hole_names)
    if extra:
        raise ValueError(f"unknown holes {sorted(extra)}")


def instantiate(sketch: Sketch, r: Mapping[str, int]) -> Program:
    """Replace every hole by its chosen option; constraints are dropped."""
    _check_realization(sketch, r)
    values = {h.name: h.options[r[h.name]].expr for h in sketch.holes}
    commands = tuple(
        Command(
            substitute_holes(c.guard, values),
            tuple(Branch(substitute_holes(b.prob, values),
                         tuple((t, substitute_holes(e, values)) for t, e in b.updates))
                  for b in c.branches),
            c.index)
        for c in sketch.commands)
    return Program(sketch.variables, commands, sketch.rewards, sketch.module)


def realization_cost(sketch: Sketch, r: Mapping[str, int]) -> int:
    _check_realization(sketch, r)
    return sum(h.options[r[h.name]].cost for h in sketch.holes)


def all_assignments(sketch: Sketch) -> Iterator[Realization]:
    """Every hole assignment in lexicographic order, constraints ignored."""
    names = sketch.hole_names
    for combo in itertools.product(*(range(len(h.options)) for h in sketch.holes)):
        yield dict(zip(names, combo))


def realizations(sketch: Sketch, budget: int | None = None) -> Iterator[Realization]:
    """Constraint-satisfying (and in-budget) realizations, lexicographically."""
    for r in all_assignments(sketch):
        if sketch.satisfies_constraints(r) and (budget is None or realization_cost(sketch, r) <= budget):
            yield r


# -- properties --------------------------------------------------------------

PROB_KINDS = ("reach", "bounded_reach")
REWARD_KINDS = ("reward", "cumulative")


@dataclass(frozen=True)
class Property:
    """A reachability or reward formula with a threshold.

    ``kind`` is one of ``reach`` (P[F G]), ``bounded_reach`` (P[F<=k G]),
    ``reward`` (R[F G]) and ``cumulative`` (R[C<=k]).
    """

    kind: str
    relation: str
    threshold: Fraction
    goal: Expr | None = None
    steps: int | None = None
    reward: str | None = None

    @property
    def is_upper_bound(self) -> bool:
        return self.relation in ("<", "<=")

    def holds(self, value: float) -> bool:
        t = float(self.threshold)
        return {"<": value < t, "<=": value <= t, ">": value > t, ">=": value >= t}[self.relation]

    def __str__(self) -> str:
        head = "P" if self.kind in PROB_KINDS else f'R{{"{self.reward}"}}'
        head += f"{self.relation}{format_number(self.threshold)}"
        if self.kind == "cumulative":
            return f"{head} [ C<={self.steps} ]"
        path = "F" if self.kind in ("reach", "reward") else f"F<={self.steps}"
        return f"{head} [ {path} {unparse(self.goal)} ]"


def _threshold(ts: TokenStream) -> Fraction:
    tok = ts.expect_kind("num", "threshold")
    value = Fraction(tok.text)
    if ts.accept("/"):
        den = ts.expect_kind("num", "denominator")
        if Fraction(den.text) == 0:
            ts.error("zero denominator", den)
        value /= Fraction(den.text)
    return value


def _goal_expr(e: Expr, var_names) -> Expr:
    def leaf(n):
        if isinstance(n, Name):
            if n.name == "oob":
                return Oob()
            if var_names is not None and n.name not in var_names:
                raise ParseError(f"undeclared variable {n.name}", n.line, n.col)
            return Var(n.name)
        return None
    return transform(e, leaf)


def parse_property(line: str, sketch: Sketch | Program | None = None) -> Property:
    ts = TokenStream(tokenize(line, hash_comments=True))
    var_names = None if sketch is None else {v.name for v in sketch.variables}
    reward = None
    if ts.accept("P"):
        prob = True
    elif ts.accept("R"):
        prob = False
        ts.expect("{")
        reward = ts.expect_kind("string", "reward name").text.strip('"')
        ts.expect("}")
        if sketch is not None and reward not in {r.name for r in sketch.rewards}:
            ts.error(f"unknown reward structure {reward!r}")
    else:
        ts.error("a property starts with P or R")
    rel_tok = ts.peek()
    if rel_tok.text not in ("<", "<=", ">", ">="):
        ts.error(f"malformed relation {rel_tok.text!r}")
    relation = ts.next().text
    threshold = _threshold(ts)
    if prob and threshold > 1:
        ts.error("probability threshold above 1")
    if not prob and relation not in ("<", "<="):
        ts.error("reward properties support only upper bounds (< or <=)", rel_tok)
    ts.expect("[")
    steps = None
    goal = None
    if ts.accept("C"):
        if prob:
            ts.error("cumulative formulas need a reward operator")
        ts.expect("<=")
        steps = int(ts.expect_kind("num", "step bound").text)
        kind = "cumulative"
    else:
        ts.expect("F")
        if ts.accept("<="):
            tok = ts.expect_kind("num", "step bound")
            if "." in tok.text:
                ts.error("step bound must be a natural number", tok)
            steps = int(tok.text)
            if not prob:
                ts.error("bounded reachability rewards are not supported")
        goal = _goal_expr(ts.expression(), var_names)
        try:
            if infer_type(goal) != "bool":
                ts.error("goal must be a boolean expression")
        except ExprError as err:
            ts.error(str(err))
        kind = ("reach" if steps is None else "bounded_reach") if prob else "reward"
    ts.expect("]")
    if ts.peek().kind != "eof":
        ts.error(f"trailing input {ts.peek().text!r}")
    return Property(kind, relation, threshold, goal, steps, reward)


def parse_goal(text: str, sketch: Sketch | Program | None = None) -> Expr:
    """A boolean state predicate such as ``s=3 | oob``."""
    ts = TokenStream(tokenize(text, hash_comments=True))
    var_names = None if sketch is None else {v.name for v in sketch.variables}
    goal = _goal_expr(ts.expression(), var_names)
    if ts.peek().kind != "eof":
        ts.error(f"trailing input {ts.peek().text!r}")
    try:
        if infer_type(goal) != "bool":
            ts.error("goal must be a boolean expression")
    except ExprError as err:
        ts.error(str(err))
    return goal


def parse_properties(text: str, sketch: Sketch | Program | None = None) -> list[Property]:
    """One property per non-empty line; ``#`` starts a comment."""
    props = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        try:
            props.append(parse_property(body, sketch))
        except ParseError as err:
            raise ParseError(err.message, lineno, err.col) from None
    return props


OOB_PROPERTY = Property("reach", "<=", Fraction(0), Oob())
