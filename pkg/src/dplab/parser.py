"""Recursive-descent parser for the ASCII formula grammar.

    formula  := ("E"|"A") ident "." formula | disj
    disj     := conj ("|" conj)*
    conj     := unary ("&" unary)*
    unary    := "!" unary | quantified | "(" formula ")" | atom | "true" | "false"
    atom     := term ("<"|"="|">") term | "P(" term ")" | "R" nat "(" term "," term ")"
              | "vle(" term "," term ")" | "Ann(" term "," bound "," bound ")"
              | "Pow(" nat "," nat "," term ")"
    term     := summand (("+"|"-") summand)*
    summand  := "(" rational ")*" summand | "(" rational "," rational ")" | "(" rational ")"
              | "(" term ")" | "-" summand | ident "(" term ")" | ident ("." ("1"|"2"))?
              | "0" | rational

``x - y`` is read as ``x + (-1)*y``, ``s > t`` as ``t < s`` and ``x.1`` as
``pi1(x)``.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .formula import (
    FALSE, INF, TRUE, And, App, Atom, Const, Exists, Forall, Not, Or, Scale,
    Signature, Sum, Var, Zero,
)

KEYWORDS = {"E", "A", "P", "vle", "Ann", "Pow", "true", "false", "inf"}

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+)|(?P<id>[A-Za-z_][A-Za-z0-9_']*)|(?P<op>[()<>=,.+\-*/&|!]))")


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class _Fail(Exception):
    pass


def tokenize(text: str) -> list:
    tokens, pos = [], 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, sig: Signature | None):
        self.toks = tokenize(text)
        self.i = 0
        self.sig = sig
        self.best = (-1, "")
        self.hard = None

    # -- helpers
    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, msg):
        off = self.peek()[2]
        if off > self.best[0]:
            self.best = (off, msg)
        raise _Fail

    def hard_fail(self, msg, off):
        # symbol errors are not backtracked over
        self.hard = ParseError(msg, off)
        raise self.hard

    def accept(self, value):
        if self.peek()[1] == value and self.peek()[0] != "eof":
            self.i += 1
            return True
        return False

    def expect(self, value):
        if not self.accept(value):
            self.fail(f"expected {value!r}")

    def attempt(self, fn):
        save = self.i
        try:
            return fn()
        except _Fail:
            self.i = save
            return None

    # -- formulas
    def formula(self):
        kind, val, _ = self.peek()
        if kind == "id" and val in ("E", "A") and self.peek(1)[0] == "id":
            return self.quantified()
        return self.disjunction()

    def quantified(self):
        q = self.peek()[1]
        self.i += 1
        kind, name, off = self.peek()
        if kind != "id" or name in KEYWORDS:
            self.fail("expected bound variable")
        self.i += 1
        self.expect(".")
        body = self.formula()
        return Exists(name, body) if q == "E" else Forall(name, body)

    def disjunction(self):
        parts = [self.conjunction()]
        while self.accept("|"):
            parts.append(self.conjunction())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conjunction(self):
        parts = [self.unary()]
        while self.accept("&"):
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def unary(self):
        kind, val, _ = self.peek()
        if self.accept("!"):
            return Not(self.unary())
        if kind == "id" and val in ("E", "A") and self.peek(1)[0] == "id":
            return self.quantified()
        if kind == "id" and val in ("true", "false"):
            self.i += 1
            return TRUE if val == "true" else FALSE
        got = self.attempt(self.atom)
        if got is not None:
            return got

        def grouped():
            self.expect("(")
            inner = self.formula()
            self.expect(")")
            return inner

        got = self.attempt(grouped)
        if got is not None:
            return got
        self.fail("expected formula")

    def atom(self):
        kind, val, off = self.peek()
        if kind == "id" and self.peek(1)[1] == "(":
            if val == "P":
                self.i += 2
                t = self.term()
                self.expect(")")
                return self.check_rel(Atom("P", (t,)), off)
            if re.fullmatch(r"R\d+", val):
                self.i += 2
                s = self.term()
                self.expect(",")
                t = self.term()
                self.expect(")")
                return self.check_rel(Atom("R", (s, t), (int(val[1:]),)), off)
            if val == "vle":
                self.i += 2
                s = self.term()
                self.expect(",")
                t = self.term()
                self.expect(")")
                return self.check_rel(Atom("vle", (s, t)), off)
            if val == "Ann":
                self.i += 2
                t = self.term()
                self.expect(",")
                g = self.bound()
                self.expect(",")
                d = self.bound()
                self.expect(")")
                return self.check_rel(Atom("Ann", (t,), (g, d)), off)
            if val == "Pow":
                self.i += 2
                n = self.natural()
                self.expect(",")
                lam = self.natural()
                self.expect(",")
                t = self.term()
                self.expect(")")
                if n < 1:
                    self.hard_fail("Pow needs n >= 1", off)
                return self.check_rel(Atom("Pow", (t,), (n, lam)), off)
        left = self.term()
        op = self.peek()[1]
        if op not in ("<", "=", ">") or self.peek()[0] == "eof":
            self.fail("expected '<', '=' or '>'")
        self.i += 1
        right = self.term()
        if op == ">":
            return self.check_rel(Atom("<", (right, left)), off)
        return self.check_rel(Atom(op, (left, right)), off)

    def check_rel(self, atom, off):
        if self.sig is None:
            return atom
        name = atom.rel
        if name not in self.sig.relations:
            self.hard_fail(f"unknown relation {name!r}", off)
        if self.sig.relations[name] != len(atom.args):
            self.hard_fail(f"arity mismatch for {name!r}", off)
        return atom

    def natural(self):
        kind, val, _ = self.peek()
        if kind != "num":
            self.fail("expected natural number")
        self.i += 1
        return int(val)

    def bound(self):
        neg = self.accept("-")
        if self.peek()[1] == "inf" and self.peek()[0] == "id":
            self.i += 1
            return -INF if neg else INF
        n = self.natural()
        return -n if neg else n

    def rational(self):
        neg = self.accept("-")
        num = self.natural()
        den = 1
        if self.accept("/"):
            kind, val, off = self.peek()
            den = self.natural()
            if den == 0:
                self.hard_fail("zero denominator", off)
        q = Fraction(num, den)
        return -q if neg else q

    # -- terms
    def term(self):
        t = self.summand()
        while True:
            if self.accept("+"):
                t = Sum(t, self.summand())
            elif self.peek()[1] == "-" and self.peek()[0] == "op":
                self.i += 1
                t = Sum(t, Scale(Fraction(-1), self.summand()))
            else:
                return t

    def summand(self):
        kind, val, off = self.peek()
        if val == "(" and kind == "op":
            got = self.attempt(self.paren_literal)
            if got is not None:
                return got

            def grouped():
                self.expect("(")
                inner = self.term()
                self.expect(")")
                return inner

            got = self.attempt(grouped)
            if got is not None:
                return got
            self.fail("expected term")
        if val == "-" and kind == "op":
            self.i += 1
            return Scale(Fraction(-1), self.summand())
        if kind == "num":
            if val == "0" and self.peek(1)[1] != "/":
                self.i += 1
                return Zero()
            return Const(self.rational())
        if kind == "id" and val not in KEYWORDS:
            self.i += 1
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                return self.application(val, off)
            if self.peek()[1] == "." and self.peek(1)[1] in ("1", "2"):
                if self.sig is not None and "pi1" not in self.sig.functions:
                    self.hard_fail("coordinate projection not in signature", off)
                self.i += 2
                return App("pi" + self.toks[self.i - 1][1], (Var(val),))
            return Var(val)
        self.fail("expected term")

    def paren_literal(self):
        self.expect("(")
        a = self.rational()
        if self.accept(","):
            b = self.rational()
            self.expect(")")
            return Const((a, b))
        self.expect(")")
        if self.accept("*"):
            return Scale(a, self.summand())
        return Const(a)

    def application(self, name, off):
        self.expect("(")
        args = [self.term()]
        while self.accept(","):
            args.append(self.term())
        self.expect(")")
        if self.sig is not None:
            if name not in self.sig.functions:
                self.hard_fail(f"unknown function {name!r}", off)
            if self.sig.functions[name] != len(args):
                self.hard_fail(f"arity mismatch for {name!r}", off)
        return App(name, tuple(args))


def parse(text: str, sig: Signature | None = None):
    """Parse ``text`` into a Formula, checking symbols against ``sig``."""
    p = _Parser(text, sig)
    try:
        phi = p.formula()
        if p.peek()[0] != "eof":
            p.fail("unexpected trailing input")
        return phi
    except _Fail:
        off, msg = p.best
        raise ParseError(f"syntax error: {msg}", off) from None


def parse_term(text: str, sig: Signature | None = None):
    p = _Parser(text, sig)
    try:
        t = p.term()
        if p.peek()[0] != "eof":
            p.fail("unexpected trailing input")
        return t
    except _Fail:
        off, msg = p.best
        raise ParseError(f"syntax error: {msg}", off) from None
