"""Recursive-descent parser for the expression language.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' int)?
    atom   := number | var | '(' expr ')' | func '(' args ')'
    func   := sq | max | norm2 | abs
    var    := 'x' int            (1-based, x1 .. xn)

Division is accepted only by constant subexpressions. Errors carry 1-based
line and column numbers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import expr as E
from .errors import ParseError

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)

FUNCTIONS = ("sq", "max", "norm2", "abs")


@dataclass(frozen=True)
class Token:
    kind: str  # num, name, op, end
    text: str
    col: int  # 1-based


def tokenize(text: str, line: int = 1, col: int = 1, source: str | None = None) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col + pos, source)
        if m.lastgroup != "ws":
            tokens.append(Token(m.lastgroup, m.group(), col + pos))
        pos = m.end()
    tokens.append(Token("end", "", col + len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int, line: int, col: int, source: str | None):
        self.n = n
        self.line = line
        self.source = source
        self.tokens = tokenize(text, line, col, source)
        self.i = 0

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        return ParseError(message, self.line, tok.col, self.source)

    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.peek().kind == "op" and self.peek().text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if not self.accept(text):
            found = tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}", tok)
        return tok

    def parse(self) -> E.Expr:
        if self.peek().kind == "end":
            raise self.error("empty expression")
        e = self.expr()
        if self.peek().kind != "end":
            raise self.error(f"unexpected {self.peek().text!r}")
        return e

    def expr(self) -> E.Expr:
        e = self.term()
        while True:
            if self.accept("+"):
                e = E.add(e, self.term())
            elif self.accept("-"):
                e = E.sub(e, self.term())
            else:
                return e

    def term(self) -> E.Expr:
        e = self.unary()
        while True:
            if self.accept("*"):
                e = E.mul(e, self.unary())
            elif self.peek().text == "/":
                tok = self.next()
                d = self.unary()
                q = d.as_quadratic()
                if q is None or q[0].any() or q[1].any():
                    raise self.error("division is only allowed by a constant", tok)
                if q[2] == 0.0:
                    raise self.error("division by zero", tok)
                e = E.scaled(1.0 / q[2], e)
            else:
                return e

    def unary(self) -> E.Expr:
        if self.accept("-"):
            return E.neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> E.Expr:
        base = self.atom()
        if self.accept("^"):
            tok = self.peek()
            negative = self.accept("-")
            tok = self.next()
            if tok.kind != "num" or not tok.text.isdigit() or negative:
                raise self.error("exponent must be a nonnegative integer literal", tok)
            return E.power(base, int(tok.text))
        return base

    def atom(self) -> E.Expr:
        tok = self.next()
        if tok.kind == "num":
            return E.constant(float(tok.text), self.n)
        if tok.kind == "op" and tok.text == "(":
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "name":
            m = re.fullmatch(r"x(\d+)", tok.text)
            if m:
                k = int(m.group(1))
                if not 1 <= k <= self.n:
                    raise self.error(f"variable {tok.text} out of range x1..x{self.n}", tok)
                return E.variable(k - 1, self.n)
            if tok.text in FUNCTIONS:
                return self.call(tok)
            raise self.error(f"unknown name {tok.text!r}", tok)
        raise self.error(f"unexpected {tok.text or 'end of input'!r}", tok)

    def call(self, name: Token) -> E.Expr:
        self.expect("(")
        args = [self.expr()]
        while self.accept(","):
            args.append(self.expr())
        self.expect(")")
        fn = name.text
        if fn in ("sq", "abs") and len(args) != 1:
            raise self.error(f"{fn} takes exactly one argument", name)
        if fn == "sq":
            return E.square(args[0])
        if fn == "abs":
            return E.absval(args[0])
        if fn == "max":
            return E.maximum(args)
        try:
            return E.norm2(args)
        except ValueError as exc:
            raise self.error(str(exc), name) from None


def parse_expr(text: str, n: int, line: int = 1, col: int = 1, source: str | None = None) -> E.Expr:
    """Parse ``text`` into an expression over ``x1 .. xn``.

    ``line`` and ``col`` locate the first character of ``text`` in its
    enclosing file and are used for error messages.
    """
    if n < 1:
        raise ValueError("dimension must be positive")
    return _Parser(text, n, line, col, source).parse()
