"""Scalar expressions in named coordinates.

A tiny infix language (``+ - * / ^``, unary minus, ``sin cos exp log``)
with a recursive-descent parser, vectorised numpy evaluation and exact
symbolic differentiation.  Exponents of ``^`` are integer literals only, so
differentiation never leaves the language.

    >>> e = parse("x1*sin(x2)", ["x1", "x2"])
    >>> str(differentiate(e, "x2"))
    'x1*cos(x2)'
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, ExprSyntaxError, UndeclaredVariableError

FUNCTIONS = ("sin", "cos", "exp", "log")


# -- AST ---------------------------------------------------------------------

class Node:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True)
class Binary(Node):
    op: str  # one of + - * /
    left: Node
    right: Node


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: int


@dataclass(frozen=True)
class Func(Node):
    name: str
    arg: Node


ZERO = Const(0.0)
ONE = Const(1.0)


def _is_const(node, value=None):
    return isinstance(node, Const) and (value is None or node.value == value)


# Smart constructors.  They fold constants and drop neutral elements; nothing
# more ambitious than that.

def add(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if isinstance(b, Neg):
        return sub(a, b.arg)
    return Binary("+", a, b)


def sub(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    if isinstance(b, Neg):
        return add(a, b.arg)
    return Binary("-", a, b)


def mul(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    if _is_const(b) and not _is_const(a):
        a, b = b, a
    return Binary("*", a, b)


def div(a: Node, b: Node) -> Node:
    if _is_const(b, 1.0):
        return a
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return ZERO
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    return Binary("/", a, b)


def neg(a: Node) -> Node:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(a: Node, n: int) -> Node:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if _is_const(a) and (a.value != 0.0 or n > 0):
        return Const(a.value ** n)
    return Pow(a, n)


def func(name: str, a: Node) -> Node:
    if _is_const(a) and not (name == "log" and a.value <= 0.0):
        return Const(float(getattr(math, name)(a.value)))
    return Func(name, a)


# -- parsing ------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(source):
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            offset = pos + len(source[pos:]) - len(source[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {source[offset]!r}", offset)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    # expr   := term (('+'|'-') term)*
    # term   := unary (('*'|'/') unary)*
    # unary  := ('-'|'+') unary | power
    # power  := atom ('^' ['-'|'+'] INT)?
    # atom   := NUM | NAME | FUNC '(' expr ')' | '(' expr ')'

    def __init__(self, source, variables):
        self.tokens = _tokenize(source)
        self.i = 0
        self.variables = set(variables)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, offset = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", offset)

    def parse(self):
        node = self.expr()
        kind, text, offset = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", offset)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = Binary(op, node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            node = Binary(op, node, rhs)
        return node

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text in ("-", "+"):
            self.take()
            arg = self.unary()
            return Neg(arg) if text == "-" else arg
        return self.power()

    def power(self):
        base = self.atom()
        kind, text, offset = self.peek()
        if kind == "op" and text == "^":
            self.take()
            sign = 1
            kind, text, offset = self.peek()
            if kind == "op" and text in ("-", "+"):
                self.take()
                sign = -1 if text == "-" else 1
                kind, text, offset = self.peek()
            if kind != "num" or not text.isdigit():
                raise ExprSyntaxError("exponent must be an integer literal", offset)
            self.take()
            node = Pow(base, sign * int(text))
            kind, text, offset = self.peek()
            if kind == "op" and text == "^":
                raise ExprSyntaxError("chained '^' needs parentheses", offset)
            return node
        return base

    def atom(self):
        kind, text, offset = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(text, arg)
            if text not in self.variables:
                raise UndeclaredVariableError(text, offset)
            return Var(text)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", offset)


# -- evaluation ---------------------------------------------------------------

def _eval(node, env):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.arg, env)
    if isinstance(node, Binary):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if np.any(np.asarray(b) == 0):
            raise DomainError("division by zero")
        return a / b
    if isinstance(node, Pow):
        a = _eval(node.base, env)
        if node.exponent < 0:
            if np.any(np.asarray(a) == 0):
                raise DomainError("negative power of zero")
            return 1.0 / np.power(a, -node.exponent)
        return np.power(a, node.exponent)
    if isinstance(node, Func):
        a = _eval(node.arg, env)
        if node.name == "log":
            if np.any(np.asarray(a) <= 0):
                raise DomainError("log of a non-positive number")
            return np.log(a)
        return getattr(np, node.name)(a)
    raise TypeError(f"not an expression node: {node!r}")


# -- differentiation and substitution -------------------------------------------

def _diff(node, var):
    if isinstance(node, Const):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.name == var else ZERO
    if isinstance(node, Neg):
        return neg(_diff(node.arg, var))
    if isinstance(node, Binary):
        a, b = node.left, node.right
        da, db = _diff(a, var), _diff(b, var)
        if node.op == "+":
            return add(da, db)
        if node.op == "-":
            return sub(da, db)
        if node.op == "*":
            return add(mul(da, b), mul(a, db))
        # (a/b)' = a'/b - a b'/b^2
        return sub(div(da, b), div(mul(a, db), power(b, 2)))
    if isinstance(node, Pow):
        inner = _diff(node.base, var)
        if _is_const(inner, 0.0):
            return ZERO
        n = node.exponent
        return mul(mul(Const(float(n)), power(node.base, n - 1)), inner)
    if isinstance(node, Func):
        inner = _diff(node.arg, var)
        if _is_const(inner, 0.0):
            return ZERO
        if node.name == "sin":
            outer = Func("cos", node.arg)
        elif node.name == "cos":
            outer = neg(Func("sin", node.arg))
        elif node.name == "exp":
            outer = node
        else:
            return div(inner, node.arg)
        return mul(outer, inner)
    raise TypeError(f"not an expression node: {node!r}")


def _subst(node, mapping):
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Const):
        return node
    if isinstance(node, Neg):
        return neg(_subst(node.arg, mapping))
    if isinstance(node, Binary):
        a = _subst(node.left, mapping)
        b = _subst(node.right, mapping)
        return {"+": add, "-": sub, "*": mul, "/": div}[node.op](a, b)
    if isinstance(node, Pow):
        return power(_subst(node.base, mapping), node.exponent)
    if isinstance(node, Func):
        return func(node.name, _subst(node.arg, mapping))
    raise TypeError(f"not an expression node: {node!r}")


def _simplify(node):
    return _subst(node, {})


def _names(node, out):
    if isinstance(node, Var):
        out.add(node.name)
    elif isinstance(node, Neg):
        _names(node.arg, out)
    elif isinstance(node, Binary):
        _names(node.left, out)
        _names(node.right, out)
    elif isinstance(node, (Pow, Func)):
        _names(node.base if isinstance(node, Pow) else node.arg, out)
    return out


# -- printing -----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _fmt_const(value):
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def _str(node, parent=0, right=False):
    # precedence levels: 1 additive, 2 multiplicative, 3 unary minus, 4 power
    if isinstance(node, Const):
        text = _fmt_const(node.value)
        if node.value < 0 and parent > 0:
            return f"({text})"
        return text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Func):
        return f"{node.name}({_str(node.arg)})"
    if isinstance(node, Pow):
        text = f"{_str(node.base, 5)}^{node.exponent}"
        return f"({text})" if parent >= 5 else text
    if isinstance(node, Neg):
        text = "-" + _str(node.arg, 3)
        return f"({text})" if parent >= 3 or (parent and right) else text
    prec = _PREC[node.op]
    text = f"{_str(node.left, prec)}{node.op}{_str(node.right, prec, True)}"
    if prec < parent or (prec == parent and right):
        return f"({text})"
    return text


# -- public API -----------------------------------------------------------------

class Expression:
    """An immutable expression together with its declared variable list."""

    __slots__ = ("node", "variables", "_derivs")

    def __init__(self, node: Node, variables: Sequence[str]):
        variables = tuple(variables)
        undeclared = _names(node, set()) - set(variables)
        if undeclared:
            raise UndeclaredVariableError(sorted(undeclared)[0])
        object.__setattr__(self, "node", node)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "_derivs", {})

    def __setattr__(self, name, value):
        raise AttributeError("Expression is immutable")

    def __str__(self):
        return _str(self.node)

    def __repr__(self):
        return f"Expression({str(self)!r}, {list(self.variables)!r})"

    def __eq__(self, other):
        return (isinstance(other, Expression) and self.node == other.node
                and self.variables == other.variables)

    def __hash__(self):
        return hash((self.node, self.variables))

    @property
    def is_zero(self) -> bool:
        return _is_const(self.node, 0.0)

    @property
    def is_constant(self) -> bool:
        return isinstance(self.node, Const)

    def __call__(self, *point):
        return evaluate(self, point)

    def evaluate_at(self, env: Mapping[str, object]):
        """Evaluate with a name -> value (or array) mapping; arrays broadcast."""
        return _eval(self.node, env)

    def derivative(self, var: str) -> "Expression":
        if var not in self.variables:
            raise UndeclaredVariableError(var)
        if var not in self._derivs:
            self._derivs[var] = Expression(_diff(self.node, var), self.variables)
        return self._derivs[var]

    def substitute(self, mapping: Mapping[str, "Expression"], variables: Sequence[str]) -> "Expression":
        """Replace variables by expressions declared over ``variables``."""
        nodes = {name: e.node for name, e in mapping.items()}
        return Expression(_subst(self.node, nodes), variables)

    def with_variables(self, variables: Sequence[str]) -> "Expression":
        return Expression(self.node, variables)

    # arithmetic on expressions over the same variables
    def _lift(self, other):
        if isinstance(other, Expression):
            if other.variables != self.variables:
                raise ValueError("expressions declared over different variables")
            return other.node
        return Const(float(other))

    def __add__(self, other):
        return Expression(add(self.node, self._lift(other)), self.variables)

    __radd__ = __add__

    def __sub__(self, other):
        return Expression(sub(self.node, self._lift(other)), self.variables)

    def __rsub__(self, other):
        return Expression(sub(self._lift(other), self.node), self.variables)

    def __mul__(self, other):
        return Expression(mul(self.node, self._lift(other)), self.variables)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Expression(div(self.node, self._lift(other)), self.variables)

    def __neg__(self):
        return Expression(neg(self.node), self.variables)

    def __pow__(self, n: int):
        if int(n) != n:
            raise ValueError("only integer exponents are supported")
        return Expression(power(self.node, int(n)), self.variables)


def parse(source: str, variables: Iterable[str]) -> Expression:
    """Parse ``source`` into an :class:`Expression` over ``variables``."""
    variables = tuple(variables)
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    node = _Parser(source, variables).parse()
    return Expression(node, variables)


def constant(value: float, variables: Iterable[str]) -> Expression:
    return Expression(Const(float(value)), tuple(variables))


def variable(name: str, variables: Iterable[str]) -> Expression:
    return Expression(Var(name), tuple(variables))


def as_expression(value, variables: Sequence[str]) -> Expression:
    if isinstance(value, Expression):
        if value.variables != tuple(variables):
            return value.with_variables(variables)
        return value
    if isinstance(value, str):
        return parse(value, variables)
    return constant(value, variables)


def evaluate(e: Expression, point) -> float | np.ndarray:
    """Evaluate at ``point`` (one entry per declared variable).

    Entries may be numpy arrays; they broadcast against each other.  Scalar
    points give a Python float.
    """
    point = tuple(point)
    if len(point) != len(e.variables):
        raise ValueError(f"expected {len(e.variables)} coordinates, got {len(point)}")
    with np.errstate(all="ignore"):
        out = _eval(e.node, dict(zip(e.variables, point)))
    if np.ndim(out) == 0:
        out = float(out)
        if not math.isfinite(out):
            raise DomainError("non-finite value")
    return out


def differentiate(e: Expression, var: str) -> Expression:
    return e.derivative(var)


def simplify(e: Expression) -> Expression:
    return Expression(_simplify(e.node), e.variables)


def to_string(e: Expression) -> str:
    return str(e)
