"""Parser and evaluator for scalar potential expressions.

Grammar (binary ops left-associative, '^' takes a numeric literal exponent):

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := atom ('^' number)?
    atom   := number | 'x' | 'r' | '|x|' | fn '(' expr ')' | '(' expr ')'
    fn     := 'ln' | 'exp' | 'sqrt' | 'abs'

The single free variable is written `x` (line coordinate) or `r` (radial
coordinate); `|x|` is shorthand for abs(x).  A leading '-' directly before a
digit at an atom position is read as part of the number literal, so
"0-0.5*ln(1+x^2)" and "-0.5*ln(1+x^2)" both parse.

Evaluation runs on plain arrays or on `Dual2` triples, giving exact first
and second derivatives.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Dual2
from .errors import ExprDomainError, ExprSyntaxError

_NUM_RE = re.compile(r"\d+(\.\d*)?([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?")
_FNS = ("ln", "exp", "sqrt", "abs")


def _tokenize(src: str):
    tokens = []  # (kind, text, offset)
    i, n = 0, len(src)
    while i < n:
        ch = src[i]
        if ch.isspace():
            i += 1
            continue
        if src.startswith("|x|", i):
            tokens.append(("absvar", "|x|", i))
            i += 3
            continue
        if ch in "+*/^()":
            kind = {"(": "lparen", ")": "rparen"}.get(ch, "op")
            tokens.append((kind, ch, i))
            i += 1
            continue
        if ch == "-":
            prev = tokens[-1][0] if tokens else None
            at_atom = prev in (None, "op", "lparen")
            if at_atom and i + 1 < n and (src[i + 1].isdigit() or src[i + 1] == "."):
                m = _NUM_RE.match(src, i + 1)
                tokens.append(("num", src[i : m.end()], i))
                i = m.end()
                continue
            tokens.append(("op", "-", i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            m = _NUM_RE.match(src, i)
            if m is None:
                raise ExprSyntaxError(f"bad number starting with {ch!r}", i)
            tokens.append(("num", m.group(), i))
            i = m.end()
            continue
        if ch.isalpha():
            j = i
            while j < n and src[j].isalpha():
                j += 1
            word = src[i:j]
            if word in ("x", "r"):
                tokens.append(("var", word, i))
            elif word in _FNS:
                tokens.append(("fn", word, i))
            else:
                raise ExprSyntaxError(f"unknown name {word!r}", i)
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, src):
        self.src = src
        self.tokens = _tokenize(src)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self, kind, text=None):
        tok = self.tokens[self.pos]
        if tok[0] != kind or (text is not None and tok[1] != text):
            want = text if text is not None else kind
            raise ExprSyntaxError(f"expected {want!r}, found {tok[1]!r}", tok[2])
        self.pos += 1
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExprSyntaxError(f"trailing input {tok[1]!r}", tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take("op")[1]
            rhs = self.term()
            node = ("add" if op == "+" else "sub", node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take("op")[1]
            rhs = self.factor()
            node = ("mul" if op == "*" else "div", node, rhs)
        return node

    def factor(self):
        node = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take("op")
            tok = self.take("num")
            node = ("pow", node, float(tok[1]))
        return node

    def atom(self):
        kind, text, off = self.peek()
        if kind == "num":
            self.take("num")
            return ("num", float(text))
        if kind == "var":
            self.take("var")
            return ("var",)
        if kind == "absvar":
            self.take("absvar")
            return ("fn", "abs", ("var",))
        if kind == "fn":
            self.take("fn")
            self.take("lparen")
            node = self.expr()
            self.take("rparen")
            return ("fn", text, node)
        if kind == "lparen":
            self.take("lparen")
            node = self.expr()
            self.take("rparen")
            return node
        raise ExprSyntaxError(f"expected an atom, found {text!r}", off)


def parse(src: str):
    """Parse an expression string into an AST."""
    return _Parser(src).parse()


_FN_EVAL = {"ln": ad.dln, "exp": ad.dexp, "sqrt": ad.dsqrt, "abs": ad.dabs}
_FN_PLAIN = {"ln": np.log, "exp": np.exp, "sqrt": np.sqrt, "abs": np.abs}


def eval_dual(node, x: Dual2) -> Dual2:
    kind = node[0]
    if kind == "num":
        return Dual2.constant(node[1])
    if kind == "var":
        return x
    if kind == "add":
        return eval_dual(node[1], x) + eval_dual(node[2], x)
    if kind == "sub":
        return eval_dual(node[1], x) - eval_dual(node[2], x)
    if kind == "mul":
        return eval_dual(node[1], x) * eval_dual(node[2], x)
    if kind == "div":
        return eval_dual(node[1], x) / eval_dual(node[2], x)
    if kind == "pow":
        return ad.dpow(eval_dual(node[1], x), node[2])
    if kind == "fn":
        return _FN_EVAL[node[1]](eval_dual(node[2], x))
    raise AssertionError(f"unknown node {kind}")


def unparse(node) -> str:
    """Canonical fully-parenthesized form; parse(unparse(t)) == t."""
    kind = node[0]
    if kind == "num":
        return repr(node[1])
    if kind == "var":
        return "x"
    if kind in ("add", "sub", "mul", "div"):
        op = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[kind]
        return f"({unparse(node[1])}{op}{unparse(node[2])})"
    if kind == "pow":
        return f"{unparse(node[1])}^{repr(node[2])}"
    if kind == "fn":
        return f"{node[1]}({unparse(node[2])})"
    raise AssertionError(f"unknown node {kind}")


@dataclass(frozen=True)
class PotentialExpr:
    """Compiled scalar expression with dual-number derivatives."""

    src: str
    ast: tuple

    @staticmethod
    def parse(src: str) -> "PotentialExpr":
        return PotentialExpr(src, parse(src))

    def __str__(self):
        return unparse(self.ast)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        res = _eval_plain(self.ast, x)
        if np.shape(res) != np.shape(x):
            res = np.broadcast_to(np.asarray(res, dtype=float), np.shape(x)).copy()
        return res

    def dual(self, x) -> Dual2:
        return eval_dual(self.ast, Dual2.variable(x))

    def deriv(self, x):
        return self.dual(x).d1

    def second(self, x):
        return self.dual(x).d2


def _eval_plain(node, x):
    kind = node[0]
    if kind == "num":
        return np.float64(node[1])
    if kind == "var":
        return x
    if kind == "add":
        return _eval_plain(node[1], x) + _eval_plain(node[2], x)
    if kind == "sub":
        return _eval_plain(node[1], x) - _eval_plain(node[2], x)
    if kind == "mul":
        return _eval_plain(node[1], x) * _eval_plain(node[2], x)
    if kind == "div":
        return _eval_plain(node[1], x) / _eval_plain(node[2], x)
    if kind == "pow":
        base = _eval_plain(node[1], x)
        c = node[2]
        if c != int(c) and np.any(np.asarray(base) < 0.0):
            raise ExprDomainError(f"negative base for non-integer power {c}")
        return base**c
    if kind == "fn":
        arg = _eval_plain(node[2], x)
        if node[1] == "ln" and np.any(np.asarray(arg) <= 0.0):
            raise ExprDomainError("ln of a non-positive argument")
        if node[1] == "sqrt" and np.any(np.asarray(arg) < 0.0):
            raise ExprDomainError("sqrt of a negative argument")
        return _FN_PLAIN[node[1]](arg)
    raise AssertionError(f"unknown node {kind}")
