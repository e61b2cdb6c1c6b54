"""Expression trees shared by sketches, programs and properties.

Expressions are immutable dataclasses.  Numbers are kept exact: integer
literals are ``int`` and decimal literals are :class:`fractions.Fraction`.
For state-space construction an expression is compiled once into a Python
function of the state tuple (see :func:`compile_expr`).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Mapping, Union

Number = Union[int, Fraction]

ARITH_OPS = ("+", "-", "*", "/")
REL_OPS = ("=", "!=", "<", "<=", ">", ">=")
BOOL_OPS = ("&", "|", "=>", "<=>")
FUNCTIONS = ("min", "max")


class ExprError(Exception):
    """Raised for ill-typed or unresolvable expressions."""


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Lit(Expr):
    value: Union[bool, int, Fraction]


@dataclass(frozen=True)
class Name(Expr):
    """Unresolved identifier, as produced by the parser."""

    name: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Hole(Expr):
    name: str


@dataclass(frozen=True)
class OptionRef(Expr):
    """Atom of a sketch constraint: true iff the named option is selected."""

    name: str


@dataclass(frozen=True)
class Oob(Expr):
    """Atom that holds exactly in the out-of-bounds sink state."""


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    arg: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    args: tuple


def children(e: Expr) -> tuple:
    if isinstance(e, Unary):
        return (e.arg,)
    if isinstance(e, Binary):
        return (e.left, e.right)
    if isinstance(e, Call):
        return e.args
    return ()


def walk(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def holes_in(e: Expr) -> frozenset:
    return frozenset(n.name for n in walk(e) if isinstance(n, Hole))


def variables_in(e: Expr) -> frozenset:
    return frozenset(n.name for n in walk(e) if isinstance(n, Var))


def transform(e: Expr, fn: Callable[[Expr], Expr | None]) -> Expr:
    """Rebuild ``e`` bottom-up; ``fn`` may return a replacement for a leaf."""
    if isinstance(e, Unary):
        return Unary(e.op, transform(e.arg, fn))
    if isinstance(e, Binary):
        return Binary(e.op, transform(e.left, fn), transform(e.right, fn))
    if isinstance(e, Call):
        return Call(e.fn, tuple(transform(a, fn) for a in e.args))
    out = fn(e)
    return e if out is None else out


def substitute_holes(e: Expr, values: Mapping[str, Expr]) -> Expr:
    return transform(e, lambda n: values[n.name] if isinstance(n, Hole) else None)


# -- typing ------------------------------------------------------------------

def infer_type(e: Expr, hole_types: Mapping[str, str] | None = None) -> str:
    """Return ``"int"`` or ``"bool"``; raise :class:`ExprError` when ill-typed.

    ``"int"`` covers every numeric value, rationals included.
    """
    if isinstance(e, Lit):
        return "bool" if isinstance(e.value, bool) else "int"
    if isinstance(e, Var):
        return "int"
    if isinstance(e, (OptionRef, Oob)):
        return "bool"
    if isinstance(e, Hole):
        if hole_types is None or e.name not in hole_types:
            raise ExprError(f"undeclared hole {e.name}")
        return hole_types[e.name]
    if isinstance(e, Name):
        raise ExprError(f"unresolved identifier {e.name}")
    if isinstance(e, Unary):
        t = infer_type(e.arg, hole_types)
        want = "bool" if e.op == "!" else "int"
        if t != want:
            raise ExprError(f"operator {e.op} expects {want}, got {t}")
        return want
    if isinstance(e, Binary):
        lt = infer_type(e.left, hole_types)
        rt = infer_type(e.right, hole_types)
        if e.op in ARITH_OPS:
            if lt != "int" or rt != "int":
                raise ExprError(f"operator {e.op} expects numbers")
            return "int"
        if e.op in ("=", "!="):
            if lt != rt:
                raise ExprError(f"operator {e.op} compares {lt} with {rt}")
            return "bool"
        if e.op in REL_OPS:
            if lt != "int" or rt != "int":
                raise ExprError(f"operator {e.op} expects numbers")
            return "bool"
        if lt != "bool" or rt != "bool":
            raise ExprError(f"operator {e.op} expects booleans")
        return "bool"
    if isinstance(e, Call):
        for a in e.args:
            if infer_type(a, hole_types) != "int":
                raise ExprError(f"{e.fn} expects numbers")
        return "int"
    raise ExprError(f"unknown expression node {e!r}")


# -- evaluation --------------------------------------------------------------

def _div(a, b):
    if b == 0:
        raise ZeroDivisionError("division by zero in expression")
    return Fraction(a) / b


def _py(e: Expr, var_index: Mapping[str, int], consts: list) -> str:
    if isinstance(e, Lit):
        if isinstance(e.value, bool):
            return "True" if e.value else "False"
        if isinstance(e.value, int):
            return repr(e.value)
        consts.append(e.value)
        return f"_k{len(consts) - 1}"
    if isinstance(e, Var):
        if e.name not in var_index:
            raise ExprError(f"unknown variable {e.name}")
        return f"v[{var_index[e.name]}]"
    if isinstance(e, Oob):
        return "False"
    if isinstance(e, Unary):
        a = _py(e.arg, var_index, consts)
        return f"(not {a})" if e.op == "!" else f"(-{a})"
    if isinstance(e, Binary):
        a = _py(e.left, var_index, consts)
        b = _py(e.right, var_index, consts)
        if e.op == "/":
            return f"_div({a}, {b})"
        if e.op == "=":
            return f"({a} == {b})"
        if e.op == "&":
            return f"({a} and {b})"
        if e.op == "|":
            return f"({a} or {b})"
        if e.op == "=>":
            return f"((not {a}) or {b})"
        if e.op == "<=>":
            return f"({a} == {b})"
        return f"({a} {e.op} {b})"
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(_py(a, var_index, consts) for a in e.args)})"
    raise ExprError(f"cannot evaluate {unparse(e)}: holes and names must be resolved first")


def compile_expr(e: Expr, var_index: Mapping[str, int]) -> Callable[[tuple], object]:
    """Compile ``e`` to a function of a state tuple (values in ``var_index`` order)."""
    consts: list = []
    body = _py(e, var_index, consts)
    ns = {"_div": _div, "Fraction": Fraction}
    ns.update({f"_k{i}": c for i, c in enumerate(consts)})
    return eval(f"lambda v: {body}", ns)


def evaluate(e: Expr, env: Mapping[str, Number] | None = None):
    env = dict(env or {})
    names = sorted(env)
    fn = compile_expr(e, {n: i for i, n in enumerate(names)})
    return fn(tuple(env[n] for n in names))


def eval_partial(e: Expr, selected: Callable[[str], bool | None]):
    """Three-valued evaluation of a propositional constraint.

    ``selected(option)`` returns True/False, or None when the owning hole is
    still unassigned.  The result is True, False or None (unknown).
    """
    if isinstance(e, Lit):
        return bool(e.value)
    if isinstance(e, OptionRef):
        return selected(e.name)
    if isinstance(e, Unary) and e.op == "!":
        v = eval_partial(e.arg, selected)
        return None if v is None else not v
    if isinstance(e, Binary):
        a = eval_partial(e.left, selected)
        if e.op == "&" and a is False:
            return False
        if e.op == "|" and a is True:
            return True
        if e.op == "=>" and a is False:
            return True
        b = eval_partial(e.right, selected)
        if e.op == "&":
            if b is False:
                return False
            return None if a is None or b is None else True
        if e.op == "|":
            if b is True:
                return True
            return None if a is None or b is None else False
        if e.op == "=>":
            if b is True:
                return True
            return None if a is None or b is None else (not a or b)
        if e.op in ("<=>", "=", "!="):
            if a is None or b is None:
                return None
            return (a == b) if e.op != "!=" else (a != b)
    raise ExprError(f"not a propositional constraint: {unparse(e)}")


# -- printing ----------------------------------------------------------------

def format_number(x: Number) -> str:
    """Exact decimal rendering of a terminating rational (else ``n/d``)."""
    if isinstance(x, int) or x.denominator == 1:
        return str(int(x))
    d = x.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{x.numerator}/{x.denominator}"
    digits = max(twos, fives)
    scaled = abs(x) * 10**digits
    s = str(int(scaled)).rjust(digits + 1, "0")
    text = f"{s[:-digits]}.{s[-digits:]}"
    return "-" + text if x < 0 else text


def unparse(e: Expr) -> str:
    if isinstance(e, Lit):
        if isinstance(e.value, bool):
            return "true" if e.value else "false"
        return format_number(e.value)
    if isinstance(e, (Name, Var, Hole, OptionRef)):
        return e.name
    if isinstance(e, Oob):
        return "oob"
    if isinstance(e, Unary):
        return f"{e.op}{unparse(e.arg)}" if isinstance(e.arg, (Lit, Var, Hole, Name, OptionRef)) \
            else f"{e.op}({unparse(e.arg)})"
    if isinstance(e, Binary):
        return f"({unparse(e.left)} {e.op} {unparse(e.right)})"
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(unparse(a) for a in e.args)})"
    raise ExprError(f"unknown expression node {e!r}")


# -- tokenizer and expression parser -----------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<num>\d+\.\d+|\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<op><=>|->|=>|\.\.|<=|>=|!=|&&|\|\||[-+*/=<>!&|()\[\]{},:;'?])
    """,
    re.VERBOSE,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message, self.line, self.col = message, line, col
        where = f"line {line}, column {col}: " if line else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str, hash_comments: bool = False) -> list[Token]:
    if hash_comments:
        text = re.sub(r"#[^\n]*", "", text)
    tokens, pos, line, line_start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tok = m.group()
            if tok == "&&":
                tok = "&"
            elif tok == "||":
                tok = "|"
            tokens.append(Token(kind, tok, line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def parse_number(text: str) -> Number:
    return Fraction(text) if "." in text else int(text)


class TokenStream:
    """Cursor over tokens with the expression grammar attached.

    Precedence, loosest first: ``<=>``, ``=>``, ``|``, ``&``, ``!``,
    relations, ``+ -``, ``* /``, unary minus.
    """

    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        # set while parsing an update: a '+' that starts the next branch
        # terminates the current arithmetic expression
        self.stop_at_branch_plus = False

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        self.pos += 1
        return tok

    def at(self, *texts: str) -> bool:
        tok = self.peek()
        return tok.kind in ("op", "ident") and tok.text in texts

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if not self.at(text):
            self.error(f"expected {text!r}, found {tok.text or 'end of input'!r}")
        return self.next()

    def expect_kind(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            self.error(f"expected {what}, found {tok.text or 'end of input'!r}")
        return self.next()

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.col)

    # grammar

    def expression(self) -> Expr:
        return self._iff()

    def _iff(self) -> Expr:
        e = self._implies()
        while self.accept("<=>"):
            e = Binary("<=>", e, self._implies())
        return e

    def _implies(self) -> Expr:
        e = self._or()
        if self.accept("=>"):
            e = Binary("=>", e, self._implies())
        return e

    def _or(self) -> Expr:
        e = self._and()
        while self.accept("|"):
            e = Binary("|", e, self._and())
        return e

    def _and(self) -> Expr:
        e = self._not()
        while self.accept("&"):
            e = Binary("&", e, self._not())
        return e

    def _not(self) -> Expr:
        if self.accept("!"):
            return Unary("!", self._not())
        return self._relation()

    def _relation(self) -> Expr:
        e = self.arith()
        if self.at(*REL_OPS) and self.peek().kind == "op":
            op = self.next().text
            e = Binary(op, e, self.arith())
        return e

    def _branch_plus(self) -> bool:
        # scan ahead: "+ <tokens> :" with no separator in between
        depth, i = 0, self.pos + 1
        while True:
            tok = self.tokens[min(i, len(self.tokens) - 1)]
            if tok.kind == "eof":
                return False
            if tok.text == "(":
                depth += 1
            elif tok.text == ")":
                if depth == 0:
                    return False
                depth -= 1
            elif depth == 0 and tok.text in ("+", ";", "&", "'", "->"):
                return False
            elif depth == 0 and tok.text == ":":
                return True
            i += 1

    def arith(self) -> Expr:
        e = self._term()
        while self.at("+", "-") and self.peek().kind == "op":
            if self.stop_at_branch_plus and self.at("+") and self._branch_plus():
                break
            op = self.next().text
            e = Binary(op, e, self._term())
        return e

    def _term(self) -> Expr:
        e = self._unary()
        while self.at("*", "/") and self.peek().kind == "op":
            op = self.next().text
            e = Binary(op, e, self._unary())
        return e

    def _unary(self) -> Expr:
        if self.accept("-"):
            return Unary("-", self._unary())
        return self._atom()

    def _atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.next()
            return Lit(parse_number(tok.text))
        if tok.kind == "ident":
            self.next()
            if tok.text == "true":
                return Lit(True)
            if tok.text == "false":
                return Lit(False)
            if tok.text in FUNCTIONS and self.at("("):
                self.expect("(")
                args = [self.expression()]
                while self.accept(","):
                    args.append(self.expression())
                self.expect(")")
                return Call(tok.text, tuple(args))
            return Name(tok.text, tok.line, tok.col)
        if self.accept("("):
            saved = self.stop_at_branch_plus
            self.stop_at_branch_plus = False
            e = self.expression()
            self.stop_at_branch_plus = saved
            self.expect(")")
            return e
        self.error(f"expected an expression, found {tok.text or 'end of input'!r}")
