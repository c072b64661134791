"""Mini expression language for transverse coefficient profiles.

Grammar (standard precedence, '^' binds tightest, then '*', then '+'/'-'):

    expr   := term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := atom ('^' unsigned-int)?
    atom   := number | 'pi' | 'x1' | 'x2'
            | 'sin' '(' expr ')' | 'cos' '(' expr ')' | '(' expr ')'

Evaluation is pure and vectorized over numpy arrays.  ``parse`` raises
:class:`~blochgap.errors.ParseError` with the byte offset of the failure;
``to_string`` prints a form that re-parses to the identical tree.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InputError, ParseError

__all__ = ["Num", "Name", "Call", "Pow", "BinOp", "Node",
           "parse", "evaluate", "to_string"]


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Name:
    ident: str  # 'pi', 'x1' or 'x2'


@dataclass(frozen=True)
class Call:
    func: str  # 'sin' or 'cos'
    arg: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class BinOp:
    op: str  # '+', '-' or '*'
    left: "Node"
    right: "Node"


Node = Union[Num, Name, Call, Pow, BinOp]

_KNOWN_NAMES = ("pi", "x1", "x2")
_FUNCS = ("sin", "cos")

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>(\d+\.\d*|\.\d+|\d+)([eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*^()])
""", re.VERBOSE)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, off = self.peek()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", off)
        return self.advance()

    def parse_expr(self):
        node = self.parse_term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                node = BinOp(val, node, self.parse_term())
            else:
                return node

    def parse_term(self):
        node = self.parse_factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val == "*":
                self.advance()
                node = BinOp("*", node, self.parse_factor())
            else:
                return node

    def parse_factor(self):
        node = self.parse_atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            kind, val, off = self.peek()
            if kind != "number" or not val.isdigit():
                raise ParseError("exponent must be an unsigned integer", off)
            self.advance()
            node = Pow(node, int(val))
        return node

    def parse_atom(self):
        kind, val, off = self.peek()
        if kind == "number":
            self.advance()
            return Num(float(val))
        if kind == "ident":
            if val in _FUNCS:
                self.advance()
                self.expect_op("(")
                arg = self.parse_expr()
                self.expect_op(")")
                return Call(val, arg)
            if val in _KNOWN_NAMES:
                self.advance()
                return Name(val)
            raise ParseError(f"unknown identifier {val!r}", off)
        if kind == "op" and val == "(":
            self.advance()
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise ParseError("expected a number, name, function call or '('", off)


def parse(text: str) -> Node:
    """Parse ``text`` into an expression tree."""
    p = _Parser(text)
    node = p.parse_expr()
    kind, val, off = p.peek()
    if kind != "end":
        raise ParseError(f"unexpected trailing input {val!r}", off)
    return node


def evaluate(node: Node, x1, x2=None):
    """Evaluate ``node`` at transverse coordinates (vectorized).

    ``x2`` may be omitted for one-dimensional cross-sections; using the
    identifier 'x2' then raises :class:`InputError`.
    """
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Name):
        if node.ident == "pi":
            return math.pi
        if node.ident == "x1":
            return x1
        if x2 is None:
            raise InputError("profile uses 'x2' but the cross-section is one-dimensional")
        return x2
    if isinstance(node, Call):
        arg = evaluate(node.arg, x1, x2)
        return np.sin(arg) if node.func == "sin" else np.cos(arg)
    if isinstance(node, Pow):
        return evaluate(node.base, x1, x2) ** node.exponent
    if isinstance(node, BinOp):
        a = evaluate(node.left, x1, x2)
        b = evaluate(node.right, x1, x2)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        return a * b
    raise TypeError(f"not an expression node: {node!r}")


def uses_x2(node: Node) -> bool:
    if isinstance(node, Name):
        return node.ident == "x2"
    if isinstance(node, Call):
        return uses_x2(node.arg)
    if isinstance(node, Pow):
        return uses_x2(node.base)
    if isinstance(node, BinOp):
        return uses_x2(node.left) or uses_x2(node.right)
    return False


# binding powers for the printer; higher binds tighter
_PREC = {"+": 1, "-": 1, "*": 2}


def _fmt(node, parent_prec, right_side):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Name):
        return node.ident
    if isinstance(node, Call):
        return f"{node.func}({_fmt(node.arg, 0, False)})"
    if isinstance(node, Pow):
        base = _fmt(node.base, 3, False)
        if isinstance(node.base, (BinOp, Pow)):
            base = f"({base})"
        return f"{base}^{node.exponent}"
    prec = _PREC[node.op]
    left = _fmt(node.left, prec, False)
    # '-' is left-associative: the right operand needs parens at equal precedence
    right = _fmt(node.right, prec + 1, True)
    out = f"{left}{node.op}{right}"
    if prec < parent_prec:
        out = f"({out})"
    return out


def to_string(node: Node) -> str:
    """Print ``node``; ``parse(to_string(node))`` returns an identical tree."""
    return _fmt(node, 0, False)
