"""Recursive-descent parser and evaluator for coefficient expressions.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | base ('^' factor)?
    base   := NUMBER | VAR | 'pi' | 'e' | FUNC '(' expr ')' | '(' expr ')'

``FUNC`` is one of exp, log, sqrt, sin, cos.  ``VAR`` defaults to ``lambda``;
initial-condition expressions enable a larger variable set.  Evaluation is
numpy-vectorised, so an expression can be applied to a whole array of
sample points at once.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

import numpy as np

from .errors import EvaluationError, ParseError

Number = Union[float, np.ndarray]

FUNCTIONS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
}
CONSTANTS = {"pi": math.pi, "e": math.e}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _check(value: Number, what: str) -> Number:
    if not np.all(np.isfinite(value)):
        raise EvaluationError(f"non-finite value from {what}")
    if np.ndim(value) == 0:
        return float(value)
    return value


class Expression:
    """Immutable AST node.  Subclasses implement ``evaluate`` and ``__str__``."""

    def evaluate(self, env: Mapping[str, Number]) -> Number:
        raise NotImplementedError

    def __call__(self, lam: Number) -> Number:
        return self.evaluate({"lambda": lam})

    def variables(self) -> frozenset[str]:
        return frozenset()


@dataclass(frozen=True)
class Const(Expression):
    value: float
    name: str | None = None

    def evaluate(self, env):
        return self.value

    def __str__(self) -> str:
        if self.name is not None:
            return self.name
        text = repr(float(self.value))
        return f"({text})" if text.startswith("-") else text


@dataclass(frozen=True)
class Var(Expression):
    name: str

    def evaluate(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise EvaluationError(f"variable '{self.name}' is not bound") from None

    def variables(self):
        return frozenset([self.name])

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Neg(Expression):
    operand: Expression

    def evaluate(self, env):
        return -self.operand.evaluate(env)

    def variables(self):
        return self.operand.variables()

    def __str__(self) -> str:
        return f"(-{self.operand})"


_BINARY = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
}


@dataclass(frozen=True)
class Binary(Expression):
    op: str
    left: Expression
    right: Expression

    def evaluate(self, env):
        lhs = self.left.evaluate(env)
        rhs = self.right.evaluate(env)
        with np.errstate(all="ignore"):
            if self.op == "^":
                out = np.power(np.asarray(lhs, dtype=float), rhs)
            else:
                out = _BINARY[self.op](lhs, rhs)
        return _check(out, f"'{self.op}' in {self}")

    def variables(self):
        return self.left.variables() | self.right.variables()

    def __str__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Call(Expression):
    func: str
    arg: Expression

    def evaluate(self, env):
        x = self.arg.evaluate(env)
        with np.errstate(all="ignore"):
            out = FUNCTIONS[self.func](x)
        return _check(out, f"{self.func}() in {self}")

    def variables(self):
        return self.arg.variables()

    def __str__(self) -> str:
        return f"{self.func}({self.arg})"


class _Parser:
    def __init__(self, src: str, variables: Iterable[str]):
        self.src = src
        self.variables = frozenset(variables)
        self.tokens = list(self._tokenize())
        self.pos = 0

    def _offset(self, char_index: int) -> int:
        return len(self.src[:char_index].encode("utf-8"))

    def _tokenize(self):
        i = 0
        while i < len(self.src):
            m = _TOKEN_RE.match(self.src, i)
            if m is None:
                raise ParseError(f"unexpected character {self.src[i]!r}", self._offset(i), self.src)
            kind = m.lastgroup
            if kind != "ws":
                yield kind, m.group(), i
            i = m.end()
        yield "end", "", len(self.src)

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str):
        kind, value, where = self.take()
        if value != text or kind == "end":
            found = "end of input" if kind == "end" else repr(value)
            raise ParseError(f"expected {text!r}, found {found}", self._offset(where), self.src)

    def parse(self) -> Expression:
        node = self.expr()
        kind, value, where = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {value!r}", self._offset(where), self.src)
        return node

    def expr(self) -> Expression:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Expression:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.factor())
        return node

    def factor(self) -> Expression:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.factor())
        node = self.base()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            node = Binary("^", node, self.factor())
        return node

    def base(self) -> Expression:
        kind, value, where = self.take()
        if kind == "number":
            return Const(float(value))
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "ident":
            if value in FUNCTIONS:
                return self._call(value, where)
            if value in self.variables:
                return Var(value)
            if value in CONSTANTS:
                return Const(CONSTANTS[value], value)
            raise ParseError(f"unknown identifier {value!r}", self._offset(where), self.src)
        found = "end of input" if kind == "end" else repr(value)
        raise ParseError(f"unexpected {found}", self._offset(where), self.src)

    def _call(self, name: str, where: int) -> Expression:
        if self.peek()[1] != "(":
            raise ParseError(f"function {name!r} requires an argument list", self._offset(where), self.src)
        self.take()
        args = []
        if self.peek()[1] != ")":
            args.append(self.expr())
            while self.peek()[1] == ",":
                self.take()
                args.append(self.expr())
        self.expect(")")
        if len(args) != 1:
            raise ParseError(
                f"arity mismatch: {name}() takes 1 argument, got {len(args)}", self._offset(where), self.src
            )
        return Call(name, args[0])


def parse_expression(src: str, variables: Iterable[str] = ("lambda",)) -> Expression:
    """Parse ``src`` into an :class:`Expression`.

    ``variables`` lists the free identifiers the expression may use.  Raises
    :class:`ParseError` carrying the byte offset of the offending token.
    """
    if isinstance(src, bytes):
        src = src.decode("utf-8")
    return _Parser(src, variables).parse()


def constant(value: float) -> Expression:
    return Const(float(value))
