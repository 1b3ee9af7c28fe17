"""First-order syntax: terms, formulas, printing and substitution."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Union

INF = float("inf")

# ---------------------------------------------------------------- terms


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Zero:
    pass


@dataclass(frozen=True)
class Const:
    """A literal: an exact rational or a pair of rationals."""

    value: Union[Fraction, tuple]


@dataclass(frozen=True)
class Sum:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Scale:
    coeff: Fraction
    operand: "Term"


@dataclass(frozen=True)
class App:
    symbol: str
    args: tuple


Term = Union[Var, Zero, Const, Sum, Scale, App]

# ---------------------------------------------------------------- formulas


@dataclass(frozen=True)
class Atom:
    """Relation symbol applied to terms.

    ``params`` carries the non-term indices of the built-in predicates:
    ``(n,)`` for ``R``, ``(gamma, delta)`` for ``Ann`` and ``(n, lam)`` for
    ``Pow``.
    """

    rel: str
    args: tuple
    params: tuple = ()


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    parts: tuple = ()


@dataclass(frozen=True)
class Or:
    parts: tuple = ()


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"


Formula = Union[Atom, Not, And, Or, Exists, Forall]

TRUE = And(())
FALSE = Or(())


def conj(*parts):
    return And(tuple(parts))


def disj(*parts):
    return Or(tuple(parts))


def lt(s, t):
    return Atom("<", (s, t))


def eq(s, t):
    return Atom("=", (s, t))


def add(*terms):
    if not terms:
        return Zero()
    out = terms[0]
    for t in terms[1:]:
        out = Sum(out, t)
    return out


# ---------------------------------------------------------------- signature


@dataclass(frozen=True)
class Signature:
    relations: dict = field(default_factory=dict)
    functions: dict = field(default_factory=dict)
    flags: frozenset = frozenset()

    def __post_init__(self):
        clash = set(self.relations) & set(self.functions)
        if clash:
            raise ValueError(f"symbol used as relation and function: {sorted(clash)}")
        for name, arity in {**self.relations, **self.functions}.items():
            if arity < 0:
                raise ValueError(f"negative arity for {name}")

    def __hash__(self):
        return hash((tuple(sorted(self.relations.items())),
                     tuple(sorted(self.functions.items())), self.flags))


# ---------------------------------------------------------------- traversal


def term_vars(t) -> set:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Sum):
        return term_vars(t.left) | term_vars(t.right)
    if isinstance(t, Scale):
        return term_vars(t.operand)
    if isinstance(t, App):
        out = set()
        for a in t.args:
            out |= term_vars(a)
        return out
    return set()


def free_vars(phi) -> set:
    if isinstance(phi, Atom):
        out = set()
        for a in phi.args:
            out |= term_vars(a)
        return out
    if isinstance(phi, Not):
        return free_vars(phi.body)
    if isinstance(phi, (And, Or)):
        out = set()
        for p in phi.parts:
            out |= free_vars(p)
        return out
    if isinstance(phi, (Exists, Forall)):
        return free_vars(phi.body) - {phi.var}
    raise TypeError(f"not a formula: {phi!r}")


def all_vars(phi) -> set:
    if isinstance(phi, Atom):
        return free_vars(phi)
    if isinstance(phi, Not):
        return all_vars(phi.body)
    if isinstance(phi, (And, Or)):
        out = set()
        for p in phi.parts:
            out |= all_vars(p)
        return out
    return all_vars(phi.body) | {phi.var}


def atoms(phi) -> Iterator[Atom]:
    if isinstance(phi, Atom):
        yield phi
    elif isinstance(phi, Not):
        yield from atoms(phi.body)
    elif isinstance(phi, (And, Or)):
        for p in phi.parts:
            yield from atoms(p)
    else:
        yield from atoms(phi.body)


def is_quantifier_free(phi) -> bool:
    if isinstance(phi, Atom):
        return True
    if isinstance(phi, Not):
        return is_quantifier_free(phi.body)
    if isinstance(phi, (And, Or)):
        return all(is_quantifier_free(p) for p in phi.parts)
    return False


# ---------------------------------------------------------------- substitution


def fresh_name(base: str, avoid) -> str:
    name = base + "'"
    while name in avoid:
        name += "'"
    return name


def subst_term(t, var: str, s):
    if isinstance(t, Var):
        return s if t.name == var else t
    if isinstance(t, Sum):
        return Sum(subst_term(t.left, var, s), subst_term(t.right, var, s))
    if isinstance(t, Scale):
        return Scale(t.coeff, subst_term(t.operand, var, s))
    if isinstance(t, App):
        return App(t.symbol, tuple(subst_term(a, var, s) for a in t.args))
    return t


def substitute(phi, var: str, t):
    """Capture-avoiding substitution of term ``t`` for free ``var``."""
    if isinstance(phi, Atom):
        return Atom(phi.rel, tuple(subst_term(a, var, t) for a in phi.args), phi.params)
    if isinstance(phi, Not):
        return Not(substitute(phi.body, var, t))
    if isinstance(phi, (And, Or)):
        return type(phi)(tuple(substitute(p, var, t) for p in phi.parts))
    if phi.var == var or var not in free_vars(phi.body):
        return phi
    bound, body = phi.var, phi.body
    tv = term_vars(t)
    if bound in tv:
        new = fresh_name(bound, tv | all_vars(body) | {var})
        body = substitute(body, bound, Var(new))
        bound = new
    return type(phi)(bound, substitute(body, var, t))


def rename_apart(phi, avoid=None):
    """Rename bound variables so none shadows another or a free variable."""
    used = set(free_vars(phi)) if avoid is None else set(avoid)

    def go(f):
        if isinstance(f, Atom):
            return f
        if isinstance(f, Not):
            return Not(go(f.body))
        if isinstance(f, (And, Or)):
            return type(f)(tuple(go(p) for p in f.parts))
        v, body = f.var, f.body
        if v in used:
            new = fresh_name(v, used | all_vars(body))
            body = substitute(body, v, Var(new))
            v = new
        used.add(v)
        return type(f)(v, go(body))

    return go(phi)


def disjuncts(phi) -> list:
    """Top-level disjuncts of ``phi`` with nested disjunctions flattened."""
    if isinstance(phi, Or):
        out = []
        for p in phi.parts:
            out.extend(disjuncts(p))
        return out
    return [phi]


# ---------------------------------------------------------------- printing


def fmt_rational(q) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _fmt_const(value) -> str:
    if isinstance(value, tuple):
        return "(" + ",".join(fmt_rational(c) for c in value) + ")"
    if value < 0:
        return f"({fmt_rational(value)})"
    if value == 0:
        return "0/1"
    return fmt_rational(value)


def format_term(t) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Zero):
        return "0"
    if isinstance(t, Const):
        return _fmt_const(t.value)
    if isinstance(t, Sum):
        right = format_term(t.right)
        if isinstance(t.right, Sum):
            right = f"({right})"
        return f"{format_term(t.left)} + {right}"
    if isinstance(t, Scale):
        inner = format_term(t.operand)
        if isinstance(t.operand, Sum):
            inner = f"({inner})"
        return f"({fmt_rational(t.coeff)})*{inner}"
    if isinstance(t, App):
        if t.symbol in ("pi1", "pi2") and len(t.args) == 1 and isinstance(t.args[0], Var):
            return f"{t.args[0].name}.{t.symbol[2]}"
        return f"{t.symbol}(" + ", ".join(format_term(a) for a in t.args) + ")"
    raise TypeError(f"not a term: {t!r}")


def _fmt_bound(b) -> str:
    if b == INF:
        return "inf"
    if b == -INF:
        return "-inf"
    return str(b)


def format_formula(phi) -> str:
    if isinstance(phi, Atom):
        args = [format_term(a) for a in phi.args]
        if phi.rel in ("<", "="):
            return f"{args[0]} {phi.rel} {args[1]}"
        if phi.rel == "R":
            return f"R{phi.params[0]}({args[0]}, {args[1]})"
        if phi.rel == "Ann":
            g, d = phi.params
            return f"Ann({args[0]}, {_fmt_bound(g)}, {_fmt_bound(d)})"
        if phi.rel == "Pow":
            n, lam = phi.params
            return f"Pow({n}, {lam}, {args[0]})"
        return f"{phi.rel}(" + ", ".join(args) + ")"
    if isinstance(phi, Not):
        return "!" + _wrap(phi.body)
    if isinstance(phi, And):
        if not phi.parts:
            return "true"
        return " & ".join(_wrap(p) for p in phi.parts)
    if isinstance(phi, Or):
        if not phi.parts:
            return "false"
        return " | ".join(_wrap(p) for p in phi.parts)
    q = "E" if isinstance(phi, Exists) else "A"
    return f"{q} {phi.var}. {format_formula(phi.body)}"


def _wrap(phi) -> str:
    s = format_formula(phi)
    if isinstance(phi, Atom) or (isinstance(phi, (And, Or)) and not phi.parts):
        return s
    return f"({s})"
