"""Dense-order test structures: (Q,<), Q x Q with two orders, and the
lexicographic group with the column flip."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from fractions import Fraction

from .formula import (
    And, App, Atom, Const, Or, Signature, Sum, Scale, Var, Zero, atoms,
    is_quantifier_free,
)
from .semantics import Structure, UnsupportedFormula, rational_grid, register


def parse_rational(text: str) -> Fraction:
    return Fraction(text.strip())


def parse_pair(text: str) -> tuple:
    m = re.fullmatch(r"\s*\(\s*([^,()]+)\s*,\s*([^,()]+)\s*\)\s*", text)
    if not m:
        raise ValueError(f"not a pair literal: {text!r}")
    return Fraction(m.group(1).strip()), Fraction(m.group(2).strip())


def _fmt(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True, order=True)
class LexPoint:
    """Element of Q x Q; the dataclass ordering is the lexicographic order."""

    first: Fraction
    second: Fraction

    def __post_init__(self):
        if type(self.first) is not Fraction:
            object.__setattr__(self, "first", Fraction(self.first))
        if type(self.second) is not Fraction:
            object.__setattr__(self, "second", Fraction(self.second))

    def __add__(self, other):
        return lex_add(self, other)

    def __neg__(self):
        return LexPoint(-self.first, -self.second)

    def __sub__(self, other):
        return self + (-other)

    def __str__(self):
        return f"({_fmt(self.first)},{_fmt(self.second)})"


@dataclass(frozen=True)
class PairPoint:
    """Element of Q x Q read through two unrelated coordinate orders."""

    first: Fraction
    second: Fraction

    def __post_init__(self):
        if type(self.first) is not Fraction:
            object.__setattr__(self, "first", Fraction(self.first))
        if type(self.second) is not Fraction:
            object.__setattr__(self, "second", Fraction(self.second))

    def coord(self, i: int) -> Fraction:
        return self.first if i == 1 else self.second

    def __str__(self):
        return f"({_fmt(self.first)},{_fmt(self.second)})"


def lex_add(a: LexPoint, b: LexPoint) -> LexPoint:
    return LexPoint(a.first + b.first, a.second + b.second)


def lex_flip(a: LexPoint) -> LexPoint:
    return LexPoint(-a.first, a.second)


def lex_scale(q, a: LexPoint) -> LexPoint:
    q = Fraction(q)
    return LexPoint(q * a.first, q * a.second)


LEX_ZERO = LexPoint(0, 0)


def _order_atom(atom, vals):
    if atom.rel == "<":
        return vals[0] < vals[1]
    if atom.rel == "=":
        return vals[0] == vals[1]
    raise UnsupportedFormula(f"relation {atom.rel!r} not interpreted")


# ---------------------------------------------------------------- (Q,<)


@register("simple_dlo")
class SimpleDLO(Structure):
    """The rationals with their order; terms are variables and constants."""

    name = "simple_dlo"
    signature = Signature(relations={"<": 2, "=": 2}, flags=frozenset({"order"}))

    def eval_term(self, t, env):
        if isinstance(t, Var):
            return env[t.name]
        if isinstance(t, Const) and not isinstance(t.value, tuple):
            return t.value
        if isinstance(t, Zero):
            return Fraction(0)
        raise UnsupportedFormula(f"term {t!r} not in the language of (Q,<)")

    def eval_atom(self, atom, env):
        return _order_atom(atom, [self.eval_term(a, env) for a in atom.args])

    def witness_grid(self, var, instances):
        values = []
        for body, env in instances:
            for atom in atoms(body):
                if atom.rel not in ("<", "="):
                    raise UnsupportedFormula(f"relation {atom.rel!r} not interpreted")
                for t in atom.args:
                    if isinstance(t, Var):
                        if t.name != var and t.name in env:
                            values.append(env[t.name])
                    elif isinstance(t, Const) and not isinstance(t.value, tuple):
                        values.append(t.value)
                    elif isinstance(t, Zero):
                        values.append(Fraction(0))
                    else:
                        raise UnsupportedFormula(f"term {t!r} not in the language of (Q,<)")
        return rational_grid(values)

    def sample(self, rng):
        return Fraction(rng.randint(-20, 20), rng.randint(1, 4))

    def parse_element(self, text):
        return parse_rational(text)

    def format_element(self, e):
        return _fmt(e)


# ---------------------------------------------------------------- Q x Q, two orders


@register("pair_dlo")
class PairDLO(Structure):
    """Pairs compared coordinatewise through ``pi1``/``pi2`` (``x.1``, ``x.2``).

    Order atoms compare rational-valued terms (projections and rational
    constants); ``=`` may also compare whole pairs.
    """

    name = "pair_dlo"
    signature = Signature(relations={"<": 2, "=": 2}, functions={"pi1": 1, "pi2": 1},
                          flags=frozenset({"order"}))

    def eval_term(self, t, env):
        if isinstance(t, Var):
            return env[t.name]
        if isinstance(t, Const):
            if isinstance(t.value, tuple):
                return PairPoint(*t.value)
            return t.value
        if isinstance(t, App) and t.symbol in ("pi1", "pi2"):
            p = self.eval_term(t.args[0], env)
            if not isinstance(p, PairPoint):
                raise UnsupportedFormula("projection of a non-pair")
            return p.coord(int(t.symbol[2]))
        raise UnsupportedFormula(f"term {t!r} not in the language of pair_dlo")

    def eval_atom(self, atom, env):
        vals = [self.eval_term(a, env) for a in atom.args]
        if atom.rel == "<" and any(isinstance(v, PairPoint) for v in vals):
            raise UnsupportedFormula("pair_dlo has no order on pairs; compare x.1 or x.2")
        if atom.rel == "=" and isinstance(vals[0], PairPoint) != isinstance(vals[1], PairPoint):
            raise UnsupportedFormula("comparing a pair with a rational")
        return _order_atom(atom, vals)

    def _values(self, t, var, env, out):
        if isinstance(t, Var):
            if t.name != var and t.name in env:
                v = env[t.name]
                out.extend([v.first, v.second] if isinstance(v, PairPoint) else [v])
        elif isinstance(t, Const):
            out.extend(t.value if isinstance(t.value, tuple) else [t.value])
        elif isinstance(t, App) and t.symbol in ("pi1", "pi2"):
            self._values(t.args[0], var, env, out)
        else:
            raise UnsupportedFormula(f"term {t!r} not in the language of pair_dlo")

    def witness_grid(self, var, instances):
        values = []
        for body, env in instances:
            for atom in atoms(body):
                if atom.rel not in ("<", "="):
                    raise UnsupportedFormula(f"relation {atom.rel!r} not interpreted")
                for t in atom.args:
                    self._values(t, var, env, values)
        firsts = rational_grid(values)
        out = []
        for a in firsts:
            for b in rational_grid(values + [a]):
                out.append(PairPoint(a, b))
        return out

    def sample(self, rng):
        return PairPoint(Fraction(rng.randint(-20, 20), rng.randint(1, 4)),
                         Fraction(rng.randint(-20, 20), rng.randint(1, 4)))

    def parse_element(self, text):
        return PairPoint(*parse_pair(text))


# ---------------------------------------------------------------- lexicographic group


def lex_linear(t, var, env):
    """Decompose ``t`` as ``alpha*var + beta*f(var) + rest`` with rest a LexPoint.

    Returns ``(alpha, beta, rest)``; ``var`` may be None.
    """
    if isinstance(t, Var):
        if t.name == var:
            return Fraction(1), Fraction(0), LEX_ZERO
        if t.name not in env:
            raise UnsupportedFormula(f"variable {t.name!r} unassigned in a quantified body")
        return Fraction(0), Fraction(0), env[t.name]
    if isinstance(t, Zero):
        return Fraction(0), Fraction(0), LEX_ZERO
    if isinstance(t, Const):
        if not isinstance(t.value, tuple):
            raise UnsupportedFormula("qlex constants are pairs")
        return Fraction(0), Fraction(0), LexPoint(*t.value)
    if isinstance(t, Sum):
        a1, b1, r1 = lex_linear(t.left, var, env)
        a2, b2, r2 = lex_linear(t.right, var, env)
        return a1 + a2, b1 + b2, r1 + r2
    if isinstance(t, Scale):
        a, b, r = lex_linear(t.operand, var, env)
        return t.coeff * a, t.coeff * b, lex_scale(t.coeff, r)
    if isinstance(t, App) and t.symbol == "f":
        a, b, r = lex_linear(t.args[0], var, env)
        return b, a, lex_flip(r)
    raise UnsupportedFormula(f"term {t!r} not in the language of qlex")


@register("qlex")
class QLexGroup(Structure):
    """Q x Q with lexicographic order, +, (0,0), f(a,b) = (-a,b) and scalings."""

    name = "qlex"
    signature = Signature(relations={"<": 2, "=": 2}, functions={"f": 1},
                          flags=frozenset({"order", "linear"}))

    def eval_term(self, t, env):
        if isinstance(t, Var):
            return env[t.name]
        if isinstance(t, Zero):
            return LEX_ZERO
        if isinstance(t, Const):
            if not isinstance(t.value, tuple):
                raise UnsupportedFormula("qlex constants are pairs")
            return LexPoint(*t.value)
        if isinstance(t, Sum):
            return lex_add(self.eval_term(t.left, env), self.eval_term(t.right, env))
        if isinstance(t, Scale):
            return lex_scale(t.coeff, self.eval_term(t.operand, env))
        if isinstance(t, App) and t.symbol == "f":
            return lex_flip(self.eval_term(t.args[0], env))
        raise UnsupportedFormula(f"term {t!r} not in the language of qlex")

    def eval_atom(self, atom, env):
        return _order_atom(atom, [self.eval_term(a, env) for a in atom.args])

    def witness_grid(self, var, instances):
        # Each atom reads alpha*x + beta*f(x) + r = ((alpha-beta)u + r1, (alpha+beta)w + r2)
        # for x = (u, w): truth is constant off u = -r1/(alpha-beta) and, on such
        # a column, off w = -r2/(alpha+beta).
        ucrit, wcrit = [], []
        for body, env in instances:
            if not is_quantifier_free(body):
                raise UnsupportedFormula("qlex decides quantifiers over quantifier-free bodies only")
            for atom in atoms(body):
                if atom.rel not in ("<", "="):
                    raise UnsupportedFormula(f"relation {atom.rel!r} not interpreted")
                a1, b1, r1 = lex_linear(atom.args[0], var, env)
                a2, b2, r2 = lex_linear(atom.args[1], var, env)
                alpha, beta, r = a1 - a2, b1 - b2, r1 - r2
                if alpha != beta:
                    ucrit.append(-r.first / (alpha - beta))
                if alpha + beta != 0:
                    wcrit.append(-r.second / (alpha + beta))
        ws = rational_grid(wcrit)
        return [LexPoint(u, w) for u in rational_grid(ucrit) for w in ws]

    def sample(self, rng):
        return LexPoint(Fraction(rng.randint(-6, 6), rng.randint(1, 3)),
                        Fraction(rng.randint(-6, 6), rng.randint(1, 3)))

    def parse_element(self, text):
        return LexPoint(*parse_pair(text))


def same_column_formula(x="x", y="y"):
    """(x=y) | (x<y & f(x)<f(y)) | (y<x & f(y)<f(x)): equal first coordinates."""
    X, Y = Var(x), Var(y)
    fX, fY = App("f", (X,)), App("f", (Y,))
    return Or((Atom("=", (X, Y)),
               And((Atom("<", (X, Y)), Atom("<", (fX, fY)))),
               And((Atom("<", (Y, X)), Atom("<", (fY, fX))))))
