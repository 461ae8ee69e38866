"""Closed-form scalar expressions with exact symbolic derivatives.

Grammar (whitespace insensitive)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | "+" unary | power
    power   := atom ("^" intexp)?
    intexp  := ["-"] INTEGER | "(" ["-"] INTEGER ")"
    atom    := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"
    FUNC    := sin | cos | tan | arctan | exp | tanh | sqrt
    NUMBER  := digits ["." digits] [("e" | "E") ["+" | "-"] digits]
               | "." digits [exponent]

``NAME`` is a declared variable or one of the constants ``pi`` and ``e``.
Derivatives are built symbolically at parse time up to order 3 and all
evaluation is vectorized over numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

MAX_ORDER = 3

FUNCTIONS = ("sin", "cos", "tan", "arctan", "exp", "tanh", "sqrt")
CONSTANTS = {"pi": math.pi, "e": math.e}


class ExprError(ValueError):
    pass


class ParseError(ExprError):
    """Malformed source; ``pos`` is the 0-based character offset."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at position {pos}")
        self.pos = pos


class UnknownIdentifier(ParseError):
    pass


class ArityError(ParseError):
    pass


class DomainError(ExprError):
    """Evaluation left the real domain of a subexpression."""

    def __init__(self, message: str, subexpr: str):
        super().__init__(f"{message} in '{subexpr}'")
        self.subexpr = subexpr


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    a: "Node"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * /
    a: "Node"
    b: "Node"


@dataclass(frozen=True)
class Pow:
    a: "Node"
    n: int


@dataclass(frozen=True)
class Call:
    fn: str
    a: "Node"


Node = Union[Num, Var, Neg, Bin, Pow, Call]

ZERO = Num(0.0)
ONE = Num(1.0)


def to_source(node: Node) -> str:
    """Canonical, fully parenthesized text; ``parse`` of it gives back ``node``."""
    if isinstance(node, Num):
        r = repr(float(node.value))
        return f"({r})" if node.value < 0 or r.startswith("-") else r
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_source(node.a)})"
    if isinstance(node, Bin):
        return f"({to_source(node.a)} {node.op} {to_source(node.b)})"
    if isinstance(node, Pow):
        n = f"({node.n})" if node.n < 0 else str(node.n)
        return f"({to_source(node.a)}^{n})"
    if isinstance(node, Call):
        return f"{node.fn}({to_source(node.a)})"
    raise TypeError(node)


# ---------------------------------------------------------------------------
# simplifying constructors

def _num(node: Node) -> float | None:
    return node.value if isinstance(node, Num) else None


def neg(a: Node) -> Node:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


def add(a: Node, b: Node) -> Node:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va + vb)
    if va == 0.0:
        return b
    if vb == 0.0:
        return a
    if isinstance(b, Neg):
        return sub(a, b.a)
    return Bin("+", a, b)


def sub(a: Node, b: Node) -> Node:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va - vb)
    if vb == 0.0:
        return a
    if va == 0.0:
        return neg(b)
    if isinstance(b, Neg):
        return add(a, b.a)
    return Bin("-", a, b)


def mul(a: Node, b: Node) -> Node:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va * vb)
    if va == 0.0 or vb == 0.0:
        return ZERO
    if va == 1.0:
        return b
    if vb == 1.0:
        return a
    if va == -1.0:
        return neg(b)
    if vb == -1.0:
        return neg(a)
    return Bin("*", a, b)


def div(a: Node, b: Node) -> Node:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None and vb != 0.0:
        return Num(va / vb)
    if va == 0.0:
        return ZERO
    if vb == 1.0:
        return a
    return Bin("/", a, b)


def power(a: Node, n: int) -> Node:
    va = _num(a)
    if n == 0:
        return ONE
    if n == 1:
        return a
    if va is not None and not (va == 0.0 and n < 0):
        return Num(va ** n)
    return Pow(a, n)


def call(fn: str, a: Node) -> Node:
    return Call(fn, a)


# ---------------------------------------------------------------------------
# differentiation

def diff(node: Node, var: str) -> Node:
    if isinstance(node, Num):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.name == var else ZERO
    if isinstance(node, Neg):
        return neg(diff(node.a, var))
    if isinstance(node, Bin):
        a, b = node.a, node.b
        da, db = diff(a, var), diff(b, var)
        if node.op == "+":
            return add(da, db)
        if node.op == "-":
            return sub(da, db)
        if node.op == "*":
            return add(mul(da, b), mul(a, db))
        if node.op == "/":
            if db == ZERO:
                return div(da, b)
            return div(sub(mul(da, b), mul(a, db)), power(b, 2))
    if isinstance(node, Pow):
        da = diff(node.a, var)
        return mul(mul(Num(float(node.n)), power(node.a, node.n - 1)), da)
    if isinstance(node, Call):
        a = node.a
        da = diff(a, var)
        if da == ZERO:
            return ZERO
        fn = node.fn
        if fn == "sin":
            outer = call("cos", a)
        elif fn == "cos":
            outer = neg(call("sin", a))
        elif fn == "tan":
            outer = add(ONE, power(call("tan", a), 2))
        elif fn == "arctan":
            outer = div(ONE, add(ONE, power(a, 2)))
        elif fn == "exp":
            outer = node
        elif fn == "tanh":
            outer = sub(ONE, power(call("tanh", a), 2))
        elif fn == "sqrt":
            outer = div(ONE, mul(Num(2.0), node))
        else:  # pragma: no cover - parser rejects unknown functions
            raise ExprError(f"no derivative rule for {fn}")
        return mul(outer, da)
    raise TypeError(node)


def substitute(node: Node, values: dict[str, float]) -> Node:
    """Replace variables by constants and re-simplify."""
    if isinstance(node, Num):
        return node
    if isinstance(node, Var):
        return Num(float(values[node.name])) if node.name in values else node
    if isinstance(node, Neg):
        return neg(substitute(node.a, values))
    if isinstance(node, Bin):
        a, b = substitute(node.a, values), substitute(node.b, values)
        return {"+": add, "-": sub, "*": mul, "/": div}[node.op](a, b)
    if isinstance(node, Pow):
        return power(substitute(node.a, values), node.n)
    if isinstance(node, Call):
        a = substitute(node.a, values)
        if isinstance(a, Num):
            return Num(float(_apply(node.fn, np.float64(a.value), node)))
        return Call(node.fn, a)
    raise TypeError(node)


def free_names(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg, Pow, Call)):
        return free_names(node.a)
    return free_names(node.a) | free_names(node.b)


# ---------------------------------------------------------------------------
# evaluation

def _apply(fn: str, v, node: Node):
    with np.errstate(all="ignore"):
        if fn == "sqrt":
            if np.any(np.asarray(v) < 0):
                raise DomainError("sqrt of negative argument", to_source(node))
            return np.sqrt(v)
        if fn == "tan":
            c = np.cos(v)
            if np.any(c == 0):
                raise DomainError("tan at a pole", to_source(node))
            return np.tan(v)
        out = getattr(np, fn)(v)
    if not np.all(np.isfinite(out)) and np.all(np.isfinite(v)):
        raise DomainError(f"{fn} overflowed", to_source(node))
    return out


def _eval(node: Node, env: dict[str, np.ndarray]):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.a, env)
    if isinstance(node, Bin):
        a = _eval(node.a, env)
        b = _eval(node.b, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if np.any(np.asarray(b) == 0):
            raise DomainError("division by zero", to_source(node))
        return a / b
    if isinstance(node, Pow):
        a = _eval(node.a, env)
        if node.n < 0:
            if np.any(np.asarray(a) == 0):
                raise DomainError("negative power of zero", to_source(node))
            return 1.0 / a ** (-node.n)
        return a ** node.n
    if isinstance(node, Call):
        return _apply(node.fn, _eval(node.a, env), node)
    raise TypeError(node)


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            bad = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise ParseError(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, names: tuple[str, ...]):
        self.toks = _tokenize(src)
        self.k = 0
        self.names = names

    def peek(self):
        return self.toks[self.k]

    def take(self):
        tok = self.toks[self.k]
        self.k += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            what = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {what}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {text!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = Bin(op, node, rhs)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            node = Bin(op, node, rhs)
        return node

    def unary(self) -> Node:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            inner = self.unary()
            return Num(-inner.value) if isinstance(inner, Num) else Neg(inner)
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def intexp(self) -> int:
        kind, text, pos = self.peek()
        paren = kind == "op" and text == "("
        if paren:
            self.take()
        sign = 1
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.take()
            sign = -1
            kind, text, pos = self.peek()
        if kind != "num" or not text.isdigit():
            raise ParseError("exponent must be an integer literal", pos)
        self.take()
        if paren:
            self.expect(")")
        return sign * int(text)

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Pow(base, self.intexp())
        return base

    def atom(self) -> Node:
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                k2, t2, p2 = self.peek()
                if t2 == "," and k2 == "op":
                    raise ArityError(f"{text}() takes exactly one argument", p2)
                self.expect(")")
                return Call(text, arg)
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                raise UnknownIdentifier(f"unknown function {text!r}", pos)
            if text in self.names:
                return Var(text)
            if text in CONSTANTS:
                return Num(CONSTANTS[text])
            raise UnknownIdentifier(f"unknown identifier {text!r}", pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {what}", pos)


def parse(source: str, names: tuple[str, ...] | str = ("x",)) -> Node:
    if isinstance(names, str):
        names = (names,)
    return _Parser(source, tuple(names)).parse()


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarFunction:
    """A parsed expression in one variable, plus optional bound parameters.

    ``derivs[k]`` is the k-th derivative with respect to ``var``. Parameters
    listed in ``params`` must be bound with :meth:`bind` before evaluation.
    """

    source: str
    var: str
    ast: Node
    params: tuple[str, ...] = ()
    derivs: tuple[Node, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if not self.derivs:
            ds = [self.ast]
            for _ in range(MAX_ORDER):
                ds.append(diff(ds[-1], self.var))
            object.__setattr__(self, "derivs", tuple(ds))

    def bind(self, **values: float) -> "ScalarFunction":
        unknown = set(values) - set(self.params)
        if unknown:
            raise ExprError(f"not parameters of this function: {sorted(unknown)}")
        ast = substitute(self.ast, {k: float(v) for k, v in values.items()})
        rest = tuple(p for p in self.params if p not in values)
        return ScalarFunction(self.source, self.var, ast, rest)

    def __call__(self, x):
        return self.jet(x, 0)[0]

    def jet(self, x, order: int = 0) -> list:
        """[f(x), f'(x), ..., f^(order)(x)], each broadcast to the shape of x."""
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"derivative order must be in 0..{MAX_ORDER}")
        if self.params:
            raise ExprError(f"unbound parameters {list(self.params)}")
        xa = np.asarray(x, dtype=float)
        env = {self.var: xa}
        out = []
        for k in range(order + 1):
            v = _eval(self.derivs[k], env)
            out.append(np.broadcast_to(np.asarray(v, dtype=float), xa.shape).copy()
                       if xa.ndim else float(v))
        return out

    def derivative(self, k: int = 1) -> "ScalarFunction":
        node = self.ast
        for _ in range(k):
            node = diff(node, self.var)
        return ScalarFunction(to_source(node), self.var, node, self.params)

    def to_source(self) -> str:
        return to_source(self.ast)

    @property
    def is_constant(self) -> bool:
        return self.var not in free_names(self.ast)


def parse_scalar_function(source: str, varname: str = "x",
                          params: tuple[str, ...] = ()) -> ScalarFunction:
    ast = parse(source, (varname, *params))
    used = free_names(ast)
    return ScalarFunction(source, varname, ast,
                          tuple(p for p in params if p in used))


def eval_with_derivatives(f: ScalarFunction, x: float, order: int) -> list[float]:
    return [float(v) for v in f.jet(float(x), order)]
