"""A small arithmetic-expression parser for config-defined fields.

Grammar (whitespace ignored):

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | CONST | VAR | FUNC '(' expr ')' | '(' expr ')'

Functions: sin, cos, exp, atan, sqrt.  Constants: pi, e.  Variables are
``t`` and ``u`` (the second coordinate of two-argument fields binds to u).
Expressions compile to plain Python closures of (t, u); no ``eval`` is
involved anywhere.
"""

from __future__ import annotations

import math

from .errors import ExpressionError

_FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "atan": math.atan,
    "sqrt": math.sqrt,
}
_CONSTANTS = {"pi": math.pi, "e": math.e}
VARIABLES = ("t", "u")


def _tokenize(src: str):
    tokens = []
    i, n = 0, len(src)
    while i < n:
        ch = src[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*/^()":
            tokens.append((ch, ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            seen_dot = False
            while j < n and (src[j].isdigit() or (src[j] == "." and not seen_dot)):
                seen_dot = seen_dot or src[j] == "."
                j += 1
            if j < n and src[j] in "eE" and j + 1 < n and (
                src[j + 1].isdigit() or (src[j + 1] in "+-" and j + 2 < n
                                         and src[j + 2].isdigit())
            ):
                j += 2
                while j < n and src[j].isdigit():
                    j += 1
            try:
                value = float(src[i:j])
            except ValueError:
                raise ExpressionError(f"bad number {src[i:j]!r} at position {i}")
            tokens.append(("num", value, i))
            i = j
            continue
        if ch.isalpha():
            j = i
            while j < n and src[j].isalnum():
                j += 1
            tokens.append(("name", src[i:j], i))
            i = j
            continue
        raise ExpressionError(f"unexpected character {ch!r} at position {i}")
    tokens.append(("end", None, n))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self, kind=None):
        tok = self.tokens[self.pos]
        if kind is not None and tok[0] != kind:
            raise ExpressionError(
                f"expected {kind!r} at position {tok[2]} in {self.src!r}, "
                f"got {tok[0]!r}"
            )
        self.pos += 1
        return tok

    def parse(self):
        fn = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExpressionError(
                f"trailing input at position {tok[2]} in {self.src!r}"
            )
        return fn

    def expr(self):
        fn = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            rhs = self.term()
            if op == "+":
                fn = (lambda a, b: lambda t, u: a(t, u) + b(t, u))(fn, rhs)
            else:
                fn = (lambda a, b: lambda t, u: a(t, u) - b(t, u))(fn, rhs)
        return fn

    def term(self):
        fn = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            rhs = self.unary()
            if op == "*":
                fn = (lambda a, b: lambda t, u: a(t, u) * b(t, u))(fn, rhs)
            else:
                fn = (lambda a, b: lambda t, u: a(t, u) / b(t, u))(fn, rhs)
        return fn

    def unary(self):
        tok = self.peek()
        if tok[0] in ("+", "-"):
            self.take()
            inner = self.unary()
            if tok[0] == "-":
                return lambda t, u: -inner(t, u)
            return inner
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "^":
            self.take()
            exponent = self.unary()
            return lambda t, u: base(t, u) ** exponent(t, u)
        return base

    def atom(self):
        tok = self.take()
        kind, value, pos = tok
        if kind == "num":
            return lambda t, u, _v=value: _v
        if kind == "(":
            inner = self.expr()
            self.take(")")
            return inner
        if kind == "name":
            if value in _CONSTANTS:
                return lambda t, u, _v=_CONSTANTS[value]: _v
            if value == "t":
                return lambda t, u: t
            if value == "u":
                return lambda t, u: u
            if value in _FUNCTIONS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                f = _FUNCTIONS[value]
                return lambda t, u, _f=f, _a=arg: _f(_a(t, u))
            raise ExpressionError(
                f"unknown name {value!r} at position {pos} "
                f"(variables: t, u; functions: {sorted(_FUNCTIONS)})"
            )
        raise ExpressionError(f"unexpected token at position {pos} in {self.src!r}")


def parse_expression(src: str):
    """Compile an expression string to a function of (t, u).

    Raises ExpressionError with the offending position on bad input; the
    returned callable raises ExpressionError on domain faults (sqrt of a
    negative number and the like).
    """
    if not isinstance(src, str) or not src.strip():
        raise ExpressionError("expression must be a non-empty string")
    raw = _Parser(src).parse()

    def evaluate(t: float, u: float = 0.0) -> float:
        try:
            return float(raw(t, u))
        except (ValueError, OverflowError, ZeroDivisionError) as exc:
            raise ExpressionError(
                f"evaluation of {src!r} failed at (t={t}, u={u}): {exc}"
            ) from exc

    evaluate.source = src
    return evaluate
