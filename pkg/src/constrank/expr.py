"""Expression language for chart maps R^s -> R.

Grammar (whitespace is insignificant)::

    expr     = term { ("+" | "-") term } ;
    term     = unary { ("*" | "/") unary } ;
    unary    = ("-" | "+") unary | power ;
    power    = atom [ "^" exponent ] ;
    exponent = [ "-" ] INTEGER | "(" [ "-" ] INTEGER ")" ;
    atom     = NUMBER | PARAM | "pi" | FUNC "(" expr ")" | "(" expr ")" ;
    PARAM    = "a" INTEGER ;                 (* a1 .. as *)
    FUNC     = "sin" | "cos" | "tan" | "exp" | "log" | "sqrt" ;
    NUMBER   = ( digits [ "." [ digits ] ] | "." digits ) [ ("e" | "E") [ "+" | "-" ] digits ] ;

Error offsets are 1-based character positions.

``^`` binds tighter than unary minus, so ``-a1^2`` is ``-(a1^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

from .errors import ParameterRangeError, ParseError

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt")
CONSTANTS = {"pi": math.pi}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Param:
    index: int  # 1-based, a1 .. as


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Param, Neg, BinOp, Pow, Call]


def has_division(node: Expr) -> bool:
    """True if the tree contains a division node (needs a zero check on evaluation)."""
    if isinstance(node, BinOp):
        return node.op == "/" or has_division(node.left) or has_division(node.right)
    if isinstance(node, (Neg, Call)):
        return has_division(node.arg)
    if isinstance(node, Pow):
        return node.exponent < 0 or has_division(node.base)
    return False


def max_param(node: Expr) -> int:
    if isinstance(node, Param):
        return node.index
    if isinstance(node, BinOp):
        return max(max_param(node.left), max_param(node.right))
    if isinstance(node, (Neg, Call)):
        return max_param(node.arg)
    if isinstance(node, Pow):
        return max_param(node.base)
    return 0


# --------------------------------------------------------------------------
# tokenizer / parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, name, op, end
    text: str
    pos: int  # character index


class _Parser:
    def __init__(self, text: str, s: int):
        self.text = text
        self.s = s
        self.toks = self._tokenize()
        self.i = 0

    def offset(self, pos: int) -> int:
        return len(self.text[:pos].encode("utf-8")) + 1

    def error(self, message: str, pos: int, cls=ParseError):
        raise cls(message, self.offset(pos), self.text)

    def _tokenize(self) -> list[_Tok]:
        toks = []
        pos = 0
        text = self.text
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                toks.append(_Tok("end", "", pos))
                return toks
            m = _TOKEN_RE.match(text, pos)
            if m is None or m.end() == pos:
                self.error(f"unexpected character {text[pos]!r}", pos)
            kind = m.lastgroup
            start = m.start(kind)
            toks.append(_Tok(kind, m.group(kind), start))
            pos = m.end()

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.tok
        if t.kind != "op" or t.text != text:
            what = "end of input" if t.kind == "end" else repr(t.text)
            self.error(f"expected {text!r}, found {what}", t.pos)
        return self.advance()

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "end":
            self.error(f"unexpected {self.tok.text!r}", self.tok.pos)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        if self.tok.kind == "op" and self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return Pow(base, self.exponent())
        return base

    def exponent(self) -> int:
        paren = self.tok.kind == "op" and self.tok.text == "("
        if paren:
            self.advance()
        sign = 1
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            sign = -1
        t = self.tok
        if t.kind != "num" or not t.text.isdigit():
            self.error("exponent must be a constant integer", t.pos)
        self.advance()
        if paren:
            self.expect(")")
        return sign * int(t.text)

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            value = float(t.text)
            if not math.isfinite(value):
                self.error("numeric literal overflows", t.pos)
            return Num(value)
        if t.kind == "name":
            self.advance()
            name = t.text
            if name in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(name, arg)
            if name in CONSTANTS:
                return Num(CONSTANTS[name])
            m = re.fullmatch(r"a([1-9]\d*)", name)
            if m:
                k = int(m.group(1))
                if k > self.s:
                    self.error(f"parameter out of range: {name} (s={self.s})", t.pos,
                               ParameterRangeError)
                return Param(k)
            self.error(f"unknown identifier {name!r}", t.pos)
        if t.kind == "op" and t.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if t.kind == "end" else repr(t.text)
        self.error(f"unexpected {what}", t.pos)


def parse(text: str, s: int) -> Expr:
    """Parse ``text`` into an expression tree over parameters ``a1..as``."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return _Parser(text, s).parse()


# --------------------------------------------------------------------------
# canonical printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_text(node: Expr) -> str:
    """Canonical text; ``parse(to_text(e), s) == e`` for any tree ``e``."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Param):
        return f"a{node.index}"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if isinstance(node, Neg):
        inner = to_text(node.arg)
        return f"-({inner})" if isinstance(node.arg, BinOp) else f"-{inner}"
    if isinstance(node, Pow):
        base = to_text(node.base)
        if not isinstance(node.base, (Num, Param, Call)):
            base = f"({base})"
        exp = f"({node.exponent})" if node.exponent < 0 else str(node.exponent)
        return f"{base}^{exp}"
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        left = to_text(node.left)
        if isinstance(node.left, BinOp) and _PREC[node.left.op] < p:
            left = f"({left})"
        right = to_text(node.right)
        if isinstance(node.right, BinOp) and _PREC[node.right.op] <= p:
            right = f"({right})"
        return f"{left}{node.op}{right}"
    raise TypeError(f"not an expression node: {node!r}")
