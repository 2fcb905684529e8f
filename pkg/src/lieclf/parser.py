"""Text syntax for expressions.

Grammar (``^`` takes an integer literal, is right-associative and binds
tighter than unary minus, so ``-x1^2`` is ``-(x1^2)``)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' int)?
    int    := '-'? INTEGER ('^' int)?
    atom   := NUMBER | xN | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Built-in functions are sin, cos, exp, sqrt, abs, min, max, plus the internal
sign/select nodes so that printed derivatives parse back. Names bound through
``macros`` are either constants/expressions (no parameters) or functions of
their parameters.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from . import expr as E
from .errors import ParseError

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
                    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))")


@dataclass(frozen=True)
class Macro:
    params: tuple
    body: str


@dataclass
class _Tok:
    kind: str
    text: str
    col: int  # 1-based


def _tokenize(text: str) -> list:
    toks, pos = [], 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos + 1)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    toks.append(_Tok("end", "", len(text) + 1))
    return toks


_ARITY = {"sin": 1, "cos": 1, "exp": 1, "sqrt": 1, "abs": 1, "sign": 1,
          "min": 2, "max": 2, "select": 3}


class _Parser:
    def __init__(self, text, dim, macros, local, depth):
        self.toks = _tokenize(text)
        self.i = 0
        self.dim = dim
        self.macros = macros or {}
        self.local = local or {}
        self.depth = depth

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        t = self.take()
        if t.text != text:
            found = t.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", t.col)
        return t

    def parse(self):
        e = self.expr()
        t = self.peek()
        if t.kind != "end":
            raise ParseError(f"unexpected {t.text!r}", t.col)
        return e

    def expr(self):
        e = self.term()
        while self.peek().text in ("+", "-"):
            o = self.take().text
            r = self.term()
            e = E.add(e, r) if o == "+" else E.sub(e, r)
        return e

    def term(self):
        e = self.unary()
        while self.peek().text in ("*", "/"):
            o = self.take().text
            r = self.unary()
            e = E.mul(e, r) if o == "*" else E.div(e, r)
        return e

    def unary(self):
        t = self.peek()
        if t.text == "-":
            self.take()
            return E.neg(self.unary())
        if t.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek().text == "^":
            self.take()
            return E.power(base, self.integer())
        return base

    def integer(self):
        sign = 1
        if self.peek().text == "-":
            self.take()
            sign = -1
        t = self.take()
        if t.kind != "num" or not re.fullmatch(r"\d+", t.text):
            raise ParseError("exponent must be an integer literal", t.col)
        n = sign * int(t.text)
        if self.peek().text == "^":
            self.take()
            m = self.integer()
            if m < 0:
                raise ParseError("nested exponent must be nonnegative", t.col)
            n = n**m
        return n

    def args(self):
        self.expect("(")
        out = [self.expr()]
        while self.peek().text == ",":
            self.take()
            out.append(self.expr())
        self.expect(")")
        return out

    def atom(self):
        t = self.take()
        if t.kind == "num":
            return E.Const(float(t.text))
        if t.text == "(":
            e = self.expr()
            self.expect(")")
            return e
        if t.kind != "name":
            found = t.text or "end of input"
            raise ParseError(f"unexpected {found!r}", t.col)
        name = t.text
        if name in self.local:
            return self.local[name]
        m = re.fullmatch(r"x(\d+)", name)
        if m and name not in self.macros:
            k = int(m.group(1))
            if k < 1 or (self.dim is not None and k > self.dim):
                raise ParseError(f"variable {name} outside x1..x{self.dim}", t.col)
            return E.Var(k - 1)
        if name in _ARITY:
            col = self.peek().col
            a = self.args()
            if len(a) != _ARITY[name]:
                raise ParseError(f"{name} takes {_ARITY[name]} argument(s), got {len(a)}", col)
            if name in ("min", "max"):
                return (E.minimum if name == "min" else E.maximum)(*a)
            if name == "select":
                return E.Select(*a)
            return E.func(name, a[0])
        if name in self.macros:
            return self.call_macro(name, t)
        raise ParseError(f"unknown name {name!r}", t.col)

    def call_macro(self, name, t):
        mac = self.macros[name]
        if isinstance(mac, E.ScalarExpr):
            return mac
        if isinstance(mac, str):
            mac = Macro((), mac)
        a = self.args() if mac.params else []
        if len(a) != len(mac.params):
            raise ParseError(f"{name} takes {len(mac.params)} argument(s), got {len(a)}", t.col)
        if self.depth > 50:
            raise ParseError(f"macro {name} expands too deeply", t.col)
        try:
            return _Parser(mac.body, self.dim, self.macros, dict(zip(mac.params, a)),
                           self.depth + 1).parse()
        except ParseError as exc:
            raise ParseError(f"in definition of {name}: {exc.args[0]}", t.col) from None


def parse_expr(text: str, dim: int | None = None, macros: dict | None = None) -> E.ScalarExpr:
    """Parse infix text into an expression tree.

    Parameters
    ----------
    text : str
        Expression such as ``"sin(x1) - 2*x2^2"``.
    dim : int, optional
        State dimension; variables beyond ``x{dim}`` are rejected.
    macros : dict, optional
        Name to :class:`Macro`, body string, or expression.

    Raises
    ------
    ParseError
        With the 1-based column of the offending token.
    """
    if not isinstance(text, str):
        raise ParseError(f"expected an expression string, got {type(text).__name__}", 1)
    return _Parser(text, dim, macros, None, 0).parse()
