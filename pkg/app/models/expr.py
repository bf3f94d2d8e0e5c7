"""Arithmetic expressions for state-dependent matrix entries.

Grammar (lowest precedence first)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("-" | "+") unary | power
    power  := atom (("^" | "**") unary)?
    atom   := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"

Names are the state variables ``u1 .. uN`` and any model parameter. The
unicode minus sign is accepted as ``-``.
"""

import re
from collections.abc import Callable, Mapping
from dataclasses import dataclass
from typing import Union

import numpy as np

from app.core.errors import (
    ExpressionDomainError,
    ExpressionSyntaxError,
    GuardedDivision,
    UnknownIdentifier,
)

FUNCTIONS: dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
}
DIVISION_GUARD = 1e-12


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # zero-based; prints as u{index+1}


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Node"


Node = Union[Const, Var, Param, Neg, BinOp, Call]


# --- tokenizer ------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()]))"
)


@dataclass(frozen=True)
class Token:
    kind: str  # num, name, op, eof
    text: str
    offset: int  # byte offset into the UTF-8 source


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


def tokenize(text: str) -> list[Token]:
    source = text.replace("−", "-")
    tokens: list[Token] = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if not m or m.end() == pos:
            start = pos + len(source[pos:]) - len(source[pos:].lstrip())
            raise ExpressionSyntaxError(
                f"unexpected character {source[start]!r}", _byte_offset(text, start)
            )
        kind = m.lastgroup
        tokens.append(Token(kind, m.group(kind), _byte_offset(text, m.start(kind))))
        pos = m.end()
    tokens.append(Token("eof", "", _byte_offset(text, len(text))))
    return tokens


# --- parser ---------------------------------------------------------------


class _Parser:
    def __init__(self, text: str, n_vars: int | None, params: Mapping[str, float]):
        self.tokens = tokenize(text)
        self.pos = 0
        self.n_vars = n_vars
        self.params = params

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> None:
        if self.current.text != text:
            raise ExpressionSyntaxError(
                f"expected {text!r}, found {self.current.text or 'end of input'!r}",
                self.current.offset,
            )
        self.advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.current.kind != "eof":
            raise ExpressionSyntaxError(
                f"unexpected {self.current.text!r}", self.current.offset
            )
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.current.text in ("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.current.text in ("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.current.text == "-":
            self.advance()
            return Neg(self.unary())
        if self.current.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.current.text in ("^", "**"):
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.current
        if tok.kind == "num":
            self.advance()
            return Const(float(tok.text))
        if tok.kind == "name":
            self.advance()
            if self.current.text == "(":
                if tok.text not in FUNCTIONS:
                    raise UnknownIdentifier(tok.text, tok.offset)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            return self.identifier(tok)
        if tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionSyntaxError(
            f"unexpected {tok.text or 'end of input'!r}", tok.offset
        )

    def identifier(self, tok: Token) -> Node:
        m = re.fullmatch(r"u(\d+)", tok.text)
        if m:
            k = int(m.group(1))
            if k >= 1 and (self.n_vars is None or k <= self.n_vars):
                return Var(k - 1)
        elif tok.text in self.params:
            return Param(tok.text)
        raise UnknownIdentifier(tok.text, tok.offset)


def parse_expr(
    text: str, n_vars: int | None = None, params: Mapping[str, float] | None = None
) -> Node:
    return _Parser(text, n_vars, params or {}).parse()


# --- printing -------------------------------------------------------------


def to_text(node: Node) -> str:
    match node:
        case Const(value):
            return repr(float(value))
        case Var(index):
            return f"u{index + 1}"
        case Param(name):
            return name
        case Neg(operand):
            return f"(-{to_text(operand)})"
        case BinOp(op, left, right):
            return f"({to_text(left)} {op} {to_text(right)})"
        case Call(fn, arg):
            return f"{fn}({to_text(arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def variables(node: Node) -> set[int]:
    match node:
        case Var(index):
            return {index}
        case Neg(operand) | Call(_, operand):
            return variables(operand)
        case BinOp(_, left, right):
            return variables(left) | variables(right)
    return set()


# --- evaluation -----------------------------------------------------------


def _divide(num, den):
    scale = np.maximum(1.0, np.abs(num))
    if np.any(np.abs(den) < DIVISION_GUARD * scale):
        raise GuardedDivision("denominator vanishes in expression evaluation")
    return num / den


def _checked(value, what: str):
    if not np.all(np.isfinite(value)):
        raise ExpressionDomainError(f"{what} left its domain")
    return value


def _apply_fn(fn: str, x):
    if fn == "sqrt" and np.isrealobj(x) and np.any(x < 0):
        raise ExpressionDomainError("sqrt of a negative number")
    return _checked(FUNCTIONS[fn](x), fn)


def _power(base, exponent):
    return _checked(np.power(base, exponent), "power")


_BINARY = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _divide,
    "^": _power,
}


def evaluate_reference(node: Node, u, params: Mapping[str, float] | None = None):
    """Plain recursive interpreter; the compiled form must agree with it."""
    params = params or {}
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return u[node.index]
    if isinstance(node, Param):
        return params[node.name]
    if isinstance(node, Neg):
        return -evaluate_reference(node.operand, u, params)
    if isinstance(node, Call):
        return _apply_fn(node.fn, evaluate_reference(node.arg, u, params))
    if node.op == "/":
        return _divide(
            evaluate_reference(node.left, u, params),
            evaluate_reference(node.right, u, params),
        )
    if node.op == "^":
        return _power(
            evaluate_reference(node.left, u, params),
            evaluate_reference(node.right, u, params),
        )
    return _BINARY[node.op](
        evaluate_reference(node.left, u, params),
        evaluate_reference(node.right, u, params),
    )


def compile_expr(node: Node, params: Mapping[str, float] | None = None) -> Callable:
    """Close over the tree once; parameters are bound at compile time."""
    params = dict(params or {})

    def build(n: Node) -> Callable:
        match n:
            case Const(value):
                return lambda u: value
            case Var(index):
                return lambda u: u[index]
            case Param(name):
                value = params[name]
                return lambda u: value
            case Neg(operand):
                inner = build(operand)
                return lambda u: -inner(u)
            case Call(fn, arg):
                inner = build(arg)
                return lambda u: _apply_fn(fn, inner(u))
            case BinOp(op, left, right):
                lf, rf, fn = build(left), build(right), _BINARY[op]
                return lambda u: fn(lf(u), rf(u))
        raise TypeError(f"not an expression node: {n!r}")

    return build(node)


@dataclass(frozen=True, eq=False)
class Expression:
    """A parsed matrix entry bound to its model parameters."""

    text: str
    ast: Node
    params: tuple[tuple[str, float], ...] = ()

    @classmethod
    def parse(
        cls, text: str, n_vars: int | None = None, params: Mapping[str, float] | None = None
    ) -> "Expression":
        params = dict(params or {})
        return cls(text, parse_expr(text, n_vars, params), tuple(sorted(params.items())))

    @property
    def depends_on_state(self) -> bool:
        return bool(variables(self.ast))

    def __call__(self, u):
        fn = self.__dict__.get("_compiled")
        if fn is None:
            fn = compile_expr(self.ast, dict(self.params))
            object.__setattr__(self, "_compiled", fn)
        return fn(u)

    def __eq__(self, other) -> bool:
        return isinstance(other, Expression) and self.ast == other.ast

    def __hash__(self) -> int:
        return hash(self.ast)

    def __str__(self) -> str:
        return self.text

