"""Scalar arithmetic expressions for coefficients and boundary nonlinearities.

A small recursive-descent parser over the grammar (EBNF)::

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { ("*" | "/") , unary } ;
    unary   = "-" , unary | power ;
    power   = atom , [ "^" , unary ] ;            (* right associative *)
    atom    = NUMBER | VARIABLE
            | FUNCTION , "(" , expr , { "," , expr } , ")"
            | "(" , expr , ")" ;
    NUMBER  = digits , [ "." , digits ] , [ ("e"|"E") , ["+"|"-"] , digits ]
            | "." , digits , [ exponent ] ;

Variables are ``x1``, ``x2`` and ``u1`` ... ``uk`` for the declared
component count k.  Functions: ``sin cos exp log sqrt abs atan`` (unary)
and ``min max`` (binary).  There are no user functions and no
conditionals.

Evaluation is pure IEEE double arithmetic; domain violations (log of a
non-positive value, division by zero, fractional powers of negatives)
raise :class:`ExprEvalError` naming the offending node instead of
propagating NaN.  ``diff_u`` produces exact symbolic derivatives with
respect to a solution component; ``abs``/``min``/``max`` and powers with
u-dependent exponents are rejected (write general powers as
``exp(b*log(a))``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .errors import SteklovLabError

__all__ = [
    "Expr", "Num", "Var", "Neg", "Bin", "Call",
    "ExprSyntaxError", "ExprEvalError", "NonDifferentiableError",
    "parse", "evaluate", "diff_u", "pretty", "uses_u",
]

UNARY_FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "abs", "atan")
BINARY_FUNCTIONS = ("min", "max")


class ExprSyntaxError(SteklovLabError):
    """Malformed source text.  Carries the byte offset and expected tokens."""

    def __init__(self, offset: int, expected: tuple[str, ...], found: str):
        self.offset = offset
        self.expected = expected
        self.found = found
        want = " or ".join(expected)
        super().__init__(f"syntax error at offset {offset}: expected {want}, found {found}")


class ExprEvalError(SteklovLabError):
    """A domain violation during evaluation, naming the failing node."""


class NonDifferentiableError(SteklovLabError):
    """diff_u reached a node it cannot differentiate (abs, min, max, u^u)."""


class Expr:
    """Base class of AST nodes.  Nodes are immutable and reusable."""

    __slots__ = ()


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str  # "x1", "x2", "u1", ..., "uk"


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Bin(Expr):
    op: str  # + - * / ^
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    args: tuple[Expr, ...]


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str):
    tokens = []  # (kind, text, offset)
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            rest = src[pos:].lstrip()
            if not rest:
                break
            offset = len(src) - len(rest)
            raise ExprSyntaxError(offset, ("a token",), repr(rest[0]))
        if m.lastgroup is not None:
            tokens.append((m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, k: int):
        self.src = src
        self.k = k
        self.tokens = _tokenize(src)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, text, offset = self.peek()
        if kind == "op" and text == op:
            return self.advance()
        raise ExprSyntaxError(offset, (repr(op),), repr(text) if text else "end of input")

    def fail(self, expected: tuple[str, ...]):
        kind, text, offset = self.peek()
        raise ExprSyntaxError(offset, expected, repr(text) if text else "end of input")

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, offset = self.peek()
        if kind != "end":
            raise ExprSyntaxError(offset, ("an operator", "end of input"), repr(text))
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                e = Bin(text, e, self.term())
            else:
                return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                e = Bin(text, e, self.unary())
            else:
                return e

    def unary(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            return Bin("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, text, offset = self.peek()
        if kind == "num":
            self.advance()
            return Num(float(text))
        if kind == "name":
            self.advance()
            nxt_kind, nxt_text, _ = self.peek()
            if nxt_kind == "op" and nxt_text == "(":
                return self.call(text, offset)
            return self.variable(text, offset)
        if kind == "op" and text == "(":
            self.advance()
            e = self.expr()
            self.expect_op(")")
            return e
        self.fail(("a number", "a variable", "a function", "'('"))

    def variable(self, name: str, offset: int) -> Expr:
        if name in ("x1", "x2"):
            return Var(name)
        m = re.fullmatch(r"u(\d+)", name)
        if m:
            idx = int(m.group(1))
            if 1 <= idx <= self.k:
                return Var(name)
            raise ExprSyntaxError(offset, (f"u1..u{self.k}",), f"unknown variable {name!r}")
        raise ExprSyntaxError(offset, ("x1", "x2", f"u1..u{self.k}"), f"unknown variable {name!r}")

    def call(self, fn: str, offset: int) -> Expr:
        if fn in UNARY_FUNCTIONS:
            arity = 1
        elif fn in BINARY_FUNCTIONS:
            arity = 2
        else:
            raise ExprSyntaxError(offset, UNARY_FUNCTIONS + BINARY_FUNCTIONS, f"unknown function {fn!r}")
        self.expect_op("(")
        args = [self.expr()]
        while True:
            kind, text, off = self.peek()
            if kind == "op" and text == ",":
                self.advance()
                args.append(self.expr())
            elif kind == "op" and text == ")":
                self.advance()
                break
            else:
                self.fail(("','", "')'"))
        if len(args) != arity:
            raise ExprSyntaxError(offset, (f"{fn} with {arity} argument(s)",), f"{len(args)} arguments")
        return Call(fn, tuple(args))


def parse(src: str, k: int = 1) -> Expr:
    """Parse ``src`` into an AST for component count ``k``.

    Raises :class:`ExprSyntaxError` with the byte offset and the expected
    token set on malformed input.
    """
    if k < 1:
        raise ValueError(f"parse: k must be >= 1, got {k}")
    return _Parser(src, k).parse()


def _var_value(name: str, x, u) -> float:
    if name == "x1":
        return float(x[0])
    if name == "x2":
        return float(x[1])
    idx = int(name[1:]) - 1
    if idx >= len(u):
        raise ExprEvalError(f"variable {name} out of range for {len(u)} components")
    return float(u[idx])


def evaluate(e: Expr, x=(0.0, 0.0), u=()) -> float:
    """Evaluate at point ``x`` and solution vector ``u``.

    Domain violations raise :class:`ExprEvalError` naming the node.
    """
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return _var_value(e.name, x, u)
    if isinstance(e, Neg):
        return -evaluate(e.arg, x, u)
    if isinstance(e, Bin):
        a = evaluate(e.lhs, x, u)
        b = evaluate(e.rhs, x, u)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0.0:
                raise ExprEvalError(f"division by zero in {pretty(e)}")
            return a / b
        # power
        if a == 0.0 and b < 0.0:
            raise ExprEvalError(f"zero raised to negative power in {pretty(e)}")
        if a < 0.0 and b != math.floor(b):
            raise ExprEvalError(f"fractional power of negative base in {pretty(e)}")
        try:
            return float(a ** b)
        except OverflowError:
            raise ExprEvalError(f"overflow in {pretty(e)}") from None
    if isinstance(e, Call):
        vals = [evaluate(a, x, u) for a in e.args]
        try:
            return _apply(e.fn, vals, e)
        except OverflowError:
            raise ExprEvalError(f"overflow in {pretty(e)}") from None
    raise TypeError(f"not an Expr node: {e!r}")


def _apply(fn: str, vals, node) -> float:
    v = vals[0]
    if fn == "sin":
        return math.sin(v)
    if fn == "cos":
        return math.cos(v)
    if fn == "exp":
        return math.exp(v)
    if fn == "atan":
        return math.atan(v)
    if fn == "abs":
        return abs(v)
    if fn == "log":
        if v <= 0.0:
            raise ExprEvalError(f"log of non-positive value {v!r} in {pretty(node)}")
        return math.log(v)
    if fn == "sqrt":
        if v < 0.0:
            raise ExprEvalError(f"sqrt of negative value {v!r} in {pretty(node)}")
        return math.sqrt(v)
    if fn == "min":
        return min(vals)
    if fn == "max":
        return max(vals)
    raise ExprEvalError(f"unknown function {fn!r}")


def uses_u(e: Expr) -> bool:
    """True if the expression references any solution component u_i."""
    if isinstance(e, Var):
        return e.name.startswith("u")
    if isinstance(e, Neg):
        return uses_u(e.arg)
    if isinstance(e, Bin):
        return uses_u(e.lhs) or uses_u(e.rhs)
    if isinstance(e, Call):
        return any(uses_u(a) for a in e.args)
    return False


_ZERO = Num(0.0)
_ONE = Num(1.0)


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Num) and e.value == 0.0


def _add(a: Expr, b: Expr) -> Expr:
    # drop additive zeros so derivatives stay readable; no other rewriting
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return Bin("+", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if _is_zero(a) or _is_zero(b):
        return _ZERO
    if isinstance(a, Num) and a.value == 1.0:
        return b
    if isinstance(b, Num) and b.value == 1.0:
        return a
    return Bin("*", a, b)


def diff_u(e: Expr, i: int) -> Expr:
    """Exact derivative with respect to component ``u_i`` (1-based).

    Raises :class:`NonDifferentiableError` on abs/min/max and on powers
    whose exponent depends on the solution; callers may fall back to
    finite differences in that case.
    """
    if i < 1:
        raise ValueError(f"diff_u: component index must be >= 1, got {i}")
    name = f"u{i}"

    def d(e: Expr) -> Expr:
        if isinstance(e, Num):
            return _ZERO
        if isinstance(e, Var):
            return _ONE if e.name == name else _ZERO
        if isinstance(e, Neg):
            da = d(e.arg)
            return _ZERO if _is_zero(da) else Neg(da)
        if isinstance(e, Bin):
            if e.op == "+":
                return _add(d(e.lhs), d(e.rhs))
            if e.op == "-":
                da, db = d(e.lhs), d(e.rhs)
                if _is_zero(db):
                    return da
                if _is_zero(da):
                    return Neg(db)
                return Bin("-", da, db)
            if e.op == "*":
                return _add(_mul(d(e.lhs), e.rhs), _mul(e.lhs, d(e.rhs)))
            if e.op == "/":
                da, db = d(e.lhs), d(e.rhs)
                if _is_zero(db):
                    return Bin("/", da, e.rhs)
                num = Bin("-", _mul(da, e.rhs), _mul(e.lhs, db))
                return Bin("/", num, Bin("^", e.rhs, Num(2.0)))
            # power: require a constant integer exponent when the base
            # depends on u (general powers go through exp/log)
            if uses_u(e.rhs):
                raise NonDifferentiableError(f"u-dependent exponent in {pretty(e)}")
            db = d(e.lhs)
            if _is_zero(db):
                return _ZERO
            if not (isinstance(e.rhs, Num) and e.rhs.value == math.floor(e.rhs.value)):
                raise NonDifferentiableError(
                    f"power with u-dependent base needs a literal integer exponent: {pretty(e)}")
            n = e.rhs.value
            return _mul(_mul(Num(n), Bin("^", e.lhs, Num(n - 1.0))), db)
        if isinstance(e, Call):
            if e.fn in ("abs", "min", "max"):
                raise NonDifferentiableError(f"{e.fn} is not differentiable: {pretty(e)}")
            da = d(e.args[0])
            if _is_zero(da):
                return _ZERO
            a = e.args[0]
            if e.fn == "sin":
                return _mul(Call("cos", (a,)), da)
            if e.fn == "cos":
                return Neg(_mul(Call("sin", (a,)), da))
            if e.fn == "exp":
                return _mul(Call("exp", (a,)), da)
            if e.fn == "log":
                return Bin("/", da, a)
            if e.fn == "sqrt":
                return Bin("/", da, _mul(Num(2.0), Call("sqrt", (a,))))
            if e.fn == "atan":
                return Bin("/", da, _add(_ONE, Bin("^", a, Num(2.0))))
        raise TypeError(f"not an Expr node: {e!r}")

    return d(e)


_LEVEL = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def pretty(e: Expr) -> str:
    """Render with minimal parentheses; a fixed point under re-parsing."""

    def go(e: Expr, parent: int, right_of_nonassoc: bool) -> str:
        if isinstance(e, Num):
            s = repr(e.value)
            return s
        if isinstance(e, Var):
            return e.name
        if isinstance(e, Neg):
            inner = go(e.arg, _LEVEL["neg"], False)
            s = f"-{inner}"
            need = _LEVEL["neg"] < parent or (right_of_nonassoc and _LEVEL["neg"] <= parent)
            return f"({s})" if need else s
        if isinstance(e, Bin):
            lvl = _LEVEL[e.op]
            if e.op == "^":
                # right associative, binds tighter than unary minus
                left = go(e.lhs, lvl + 1, False)
                right = go(e.rhs, _LEVEL["neg"], False)
            else:
                left = go(e.lhs, lvl, False)
                right = go(e.rhs, lvl, e.op in ("-", "/"))
            s = f"{left} {e.op} {right}" if lvl == 1 else f"{left}{e.op}{right}"
            need = lvl < parent or (right_of_nonassoc and lvl <= parent)
            return f"({s})" if need else s
        if isinstance(e, Call):
            args = ", ".join(go(a, 0, False) for a in e.args)
            return f"{e.fn}({args})"
        raise TypeError(f"not an Expr node: {e!r}")

    return go(e, 0, False)
