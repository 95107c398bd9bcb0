"""STL abstract syntax, a small recursive-descent parser and a canonical printer.

Concrete syntax::

    formula := or_expr
    or_expr := and_expr ('|' and_expr)*
    and_expr := until_expr ('&' until_expr)*
    until_expr := unary ('U' '[' num ',' num ']' unary)?
    unary := '!' unary | ('G' | 'F') '[' num ',' num ']' unary | '(' or_expr ')' | atom
    atom := 'true' | ident ('>=' | '<=' | '>' | '<') num

``&`` binds tighter than ``|``; a chain ``a & b & c`` becomes one n-ary node,
parenthesised groups stay nested. ``>`` and ``<`` are accepted as spellings of
``>=`` and ``<=`` (the robustness of both is identical). ``#`` starts a comment.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Union

from .errors import IntervalError, STLSyntaxError

GE = ">="
LE = "<="


@dataclass(frozen=True)
class TrueF:
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class Predicate:
    var: str
    op: str
    threshold: float

    def __post_init__(self):
        if self.op not in (GE, LE):
            raise ValueError(f"predicate direction must be >= or <=, got {self.op!r}")
        object.__setattr__(self, "threshold", float(self.threshold))

    def __str__(self):
        return f"{self.var} {self.op} {_num(self.threshold)}"


@dataclass(frozen=True)
class Not:
    child: "Formula"

    def __str__(self):
        return f"!({self.child})"


@dataclass(frozen=True)
class And:
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) < 2:
            raise ValueError("And needs at least two children")

    def __str__(self):
        return " & ".join(f"({c})" for c in self.children)


@dataclass(frozen=True)
class Or:
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) < 2:
            raise ValueError("Or needs at least two children")

    def __str__(self):
        return " | ".join(f"({c})" for c in self.children)


def _check_interval(a, b):
    if a < 0 or b < 0:
        raise IntervalError(f"negative interval bound in [{a},{b}]")
    if a > b:
        raise IntervalError(f"interval lower bound exceeds upper bound in [{a},{b}]")


@dataclass(frozen=True)
class Eventually:
    a: float
    b: float
    child: "Formula"

    def __post_init__(self):
        _check_interval(self.a, self.b)

    def __str__(self):
        return f"F[{_num(self.a)},{_num(self.b)}] ({self.child})"


@dataclass(frozen=True)
class Globally:
    a: float
    b: float
    child: "Formula"

    def __post_init__(self):
        _check_interval(self.a, self.b)

    def __str__(self):
        return f"G[{_num(self.a)},{_num(self.b)}] ({self.child})"


@dataclass(frozen=True)
class Until:
    a: float
    b: float
    left: "Formula"
    right: "Formula"

    def __post_init__(self):
        _check_interval(self.a, self.b)

    def __str__(self):
        return f"({self.left}) U[{_num(self.a)},{_num(self.b)}] ({self.right})"


Formula = Union[TrueF, Predicate, Not, And, Or, Eventually, Globally, Until]
Temporal = (Eventually, Globally)


def _num(x):
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def children(f):
    if isinstance(f, (And, Or)):
        return list(f.children)
    if isinstance(f, (Not, Eventually, Globally)):
        return [f.child]
    if isinstance(f, Until):
        return [f.left, f.right]
    return []


def horizon(f) -> float:
    """Length of signal beyond the evaluation instant that ``f`` needs."""
    if isinstance(f, (TrueF, Predicate)):
        return 0.0
    if isinstance(f, (Eventually, Globally)):
        return float(f.b) + horizon(f.child)
    if isinstance(f, Until):
        return float(f.b) + max(horizon(f.left), horizon(f.right))
    return max(horizon(c) for c in children(f))


def subformulae(f) -> list:
    """Pre-order list of ``f`` and all of its subformulae."""
    out = [f]
    for c in children(f):
        out.extend(subformulae(c))
    return out


def variables(f) -> set:
    return {g.var for g in subformulae(f) if isinstance(g, Predicate)}


def map_predicates(f, fn: Callable[[Predicate], "Formula"]):
    """Rebuild ``f`` with every predicate replaced by ``fn(predicate)``."""
    if isinstance(f, Predicate):
        return fn(f)
    if isinstance(f, TrueF):
        return f
    if isinstance(f, Not):
        return Not(map_predicates(f.child, fn))
    if isinstance(f, And):
        return And(tuple(map_predicates(c, fn) for c in f.children))
    if isinstance(f, Or):
        return Or(tuple(map_predicates(c, fn) for c in f.children))
    if isinstance(f, Eventually):
        return Eventually(f.a, f.b, map_predicates(f.child, fn))
    if isinstance(f, Globally):
        return Globally(f.a, f.b, map_predicates(f.child, fn))
    if isinstance(f, Until):
        return Until(f.a, f.b, map_predicates(f.left, fn), map_predicates(f.right, fn))
    raise TypeError(f"not a formula: {f!r}")


# --------------------------------------------------------------------------- parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>>=|<=|>|<|!|&|\||\(|\)|\[|\]|,)
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text):
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise STLSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def cur(self):
        return self.toks[self.i]

    def peek(self, k=1):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg, tok=None):
        tok = tok or self.cur
        return STLSyntaxError(msg, tok.line, tok.col)

    def expect(self, text):
        if self.cur.text != text or self.cur.kind == "num":
            found = self.cur.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        self.i += 1

    def is_temporal(self, names):
        return self.cur.kind == "ident" and self.cur.text in names and self.peek().text == "["

    def parse(self):
        f = self.or_expr()
        if self.cur.kind != "eof":
            raise self.error(f"unexpected {self.cur.text!r}")
        return f

    def or_expr(self):
        items = [self.and_expr()]
        while self.cur.text == "|":
            self.i += 1
            items.append(self.and_expr())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def and_expr(self):
        items = [self.until_expr()]
        while self.cur.text == "&":
            self.i += 1
            items.append(self.until_expr())
        return items[0] if len(items) == 1 else And(tuple(items))

    def until_expr(self):
        left = self.unary()
        if self.is_temporal(("U",)):
            self.i += 1
            a, b = self.interval()
            right = self.unary()
            return Until(a, b, left, right)
        return left

    def interval(self):
        start = self.cur
        self.expect("[")
        a = self.number()
        self.expect(",")
        b = self.number()
        self.expect("]")
        try:
            _check_interval(a, b)
        except IntervalError as exc:
            raise IntervalError(f"{exc} (line {start.line}, column {start.col})") from None
        return a, b

    def number(self):
        tok = self.cur
        if tok.kind != "num":
            raise self.error(f"expected a number, found {tok.text or 'end of input'!r}")
        self.i += 1
        return float(tok.text)

    def unary(self):
        tok = self.cur
        if tok.text == "!":
            self.i += 1
            return Not(self.unary())
        if self.is_temporal(("G", "F")):
            self.i += 1
            a, b = self.interval()
            child = self.unary()
            return Globally(a, b, child) if tok.text == "G" else Eventually(a, b, child)
        if tok.text == "(":
            self.i += 1
            f = self.or_expr()
            self.expect(")")
            return f
        return self.atom()

    def atom(self):
        tok = self.cur
        if tok.kind != "ident":
            raise self.error(f"expected a predicate, found {tok.text or 'end of input'!r}")
        self.i += 1
        if tok.text == "true":
            return TrueF()
        op = self.cur.text
        if op not in (">=", "<=", ">", "<"):
            raise self.error(f"expected comparison after {tok.text!r}")
        self.i += 1
        value = self.number()
        return Predicate(tok.text, GE if op.startswith(">") else LE, value)


def parse(text: str):
    """Parse formula text into an AST; raises STLSyntaxError or IntervalError."""
    return _Parser(text).parse()


def load(path):
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())
