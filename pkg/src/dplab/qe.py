"""Quantifier elimination for Q x Q with lexicographic order and f(a, b) = (-a, b).

Two rules eliminate ``E x. (s0 < x < s1 & t0 < f(x) < t1)``:

``paper_rule``
    the five-clause conjunction in its original form, kept for comparison;
    it disagrees with the semantics on some boundary-column configurations.
``validated_rule``
    a case split over the columns where the x-range and the f(x)-range can
    meet, checked against the endpoint-grid oracle.
"""

from __future__ import annotations

import itertools
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from .formula import (
    FALSE, TRUE, And, App, Atom, Const, Exists, Forall, Not, Or, Scale, Sum, Var, Zero,
    add, format_formula, free_vars, is_quantifier_free,
)
from .semantics import UnsupportedFormula, evaluate
from .structures import LEX_ZERO, LexPoint, QLexGroup, lex_flip

# ---------------------------------------------------------------- normal terms


@dataclass(frozen=True)
class NormalTerm:
    """sum q_v * v + sum r_v * f(v) + const, zero coefficients dropped."""

    lin: tuple = ()            # sorted (var, coeff)
    flip: tuple = ()
    const: LexPoint = LEX_ZERO

    @staticmethod
    def make(lin=None, flip=None, const=LEX_ZERO):
        clean = lambda d: tuple(sorted((v, Fraction(c)) for v, c in (d or {}).items() if c))
        return NormalTerm(clean(lin), clean(flip), const)

    @staticmethod
    def var(name):
        return NormalTerm.make({name: 1})

    @staticmethod
    def constant(point):
        return NormalTerm((), (), point)

    def __add__(self, other):
        lin, flip = dict(self.lin), dict(self.flip)
        for v, c in other.lin:
            lin[v] = lin.get(v, 0) + c
        for v, c in other.flip:
            flip[v] = flip.get(v, 0) + c
        return NormalTerm.make(lin, flip, self.const + other.const)

    def scale(self, q):
        q = Fraction(q)
        return NormalTerm.make({v: q * c for v, c in self.lin}, {v: q * c for v, c in self.flip},
                               LexPoint(q * self.const.first, q * self.const.second))

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def f(self):
        return NormalTerm(self.flip, self.lin, lex_flip(self.const))

    def variables(self):
        return {v for v, _ in self.lin} | {v for v, _ in self.flip}

    def is_ground(self):
        return not self.lin and not self.flip

    def coeffs(self, var):
        return dict(self.lin).get(var, Fraction(0)), dict(self.flip).get(var, Fraction(0))

    def without(self, var):
        return NormalTerm.make({v: c for v, c in self.lin if v != var},
                               {v: c for v, c in self.flip if v != var}, self.const)

    def subst(self, var, t: "NormalTerm"):
        a, b = self.coeffs(var)
        return self.without(var) + t.scale(a) + t.f().scale(b)

    def to_term(self):
        parts = []
        for v, c in self.lin:
            parts.append(Var(v) if c == 1 else Scale(c, Var(v)))
        for v, c in self.flip:
            fv = App("f", (Var(v),))
            parts.append(fv if c == 1 else Scale(c, fv))
        if self.const != LEX_ZERO or not parts:
            if self.const == LEX_ZERO:
                parts.append(Zero())
            else:
                parts.append(Const((self.const.first, self.const.second)))
        return add(*parts)

    def __str__(self):
        from .formula import format_term
        return format_term(self.to_term())


def normalize_term(t) -> NormalTerm:
    """Push f down to variables using f(f(x)) = x, f(a + b) = f(a) + f(b)
    and f(q a) = q f(a)."""
    if isinstance(t, Var):
        return NormalTerm.var(t.name)
    if isinstance(t, Zero):
        return NormalTerm()
    if isinstance(t, Const):
        if not isinstance(t.value, tuple):
            raise UnsupportedFormula("qlex constants are pairs")
        return NormalTerm.constant(LexPoint(*t.value))
    if isinstance(t, Sum):
        return normalize_term(t.left) + normalize_term(t.right)
    if isinstance(t, Scale):
        return normalize_term(t.operand).scale(t.coeff)
    if isinstance(t, App) and t.symbol == "f" and len(t.args) == 1:
        return normalize_term(t.args[0]).f()
    raise UnsupportedFormula(f"term {t!r} not in the language of qlex")


# ---------------------------------------------------------------- formula builders


def _atom(rel, s: NormalTerm, t: NormalTerm):
    """Order atom, decided outright when s - t has no variables."""
    d = s - t
    if d.is_ground():
        if rel == "<":
            return TRUE if d.const < LEX_ZERO else FALSE
        return TRUE if d.const == LEX_ZERO else FALSE
    return Atom(rel, (s.to_term(), t.to_term()))


def _and(*parts):
    flat = []
    for p in parts:
        if p == FALSE:
            return FALSE
        if p == TRUE:
            continue
        for q in (p.parts if isinstance(p, And) else [p]):
            if q not in flat:
                flat.append(q)
    return flat[0] if len(flat) == 1 else And(tuple(flat))


def _or(*parts):
    flat = []
    for p in parts:
        if p == TRUE:
            return TRUE
        if p == FALSE:
            continue
        for q in (p.parts if isinstance(p, Or) else [p]):
            if q not in flat:
                flat.append(q)
    return flat[0] if len(flat) == 1 else Or(tuple(flat))


def _not(p):
    if p == TRUE:
        return FALSE
    if p == FALSE:
        return TRUE
    return Not(p)


def _implies(a, b):
    return _or(_not(a), b)


def lt(s, t):
    return _atom("<", s, t)


def le(s, t):
    return _or(_atom("<", s, t), _atom("=", s, t))


def same_column(s: NormalTerm, t: NormalTerm):
    """(s = t) | (s < t & f(s) < f(t)) | (t < s & f(t) < f(s))."""
    return _or(_atom("=", s, t),
               _and(lt(s, t), lt(s.f(), t.f())),
               _and(lt(t, s), lt(t.f(), s.f())))


def col_lt(s, t):
    """first(s) < first(t)."""
    return _and(lt(s, t), _not(same_column(s, t)))


def col_le(s, t):
    """first(s) <= first(t)."""
    return _or(lt(s, t), same_column(s, t))


# ---------------------------------------------------------------- blocks


@dataclass(frozen=True)
class ExistsBlock:
    """E var. (s0 < var < s1 & t0 < f(var) < t1); None stands for -inf / +inf."""

    var: str
    s0: NormalTerm | None = None
    s1: NormalTerm | None = None
    t0: NormalTerm | None = None
    t1: NormalTerm | None = None

    def __post_init__(self):
        for b in (self.s0, self.s1, self.t0, self.t1):
            if b is not None and self.var in b.variables():
                raise ValueError("bounds must not mention the bound variable")

    def formula(self):
        x = NormalTerm.var(self.var)
        parts = []
        if self.s0 is not None:
            parts.append(Atom("<", (self.s0.to_term(), x.to_term())))
        if self.s1 is not None:
            parts.append(Atom("<", (x.to_term(), self.s1.to_term())))
        if self.t0 is not None:
            parts.append(Atom("<", (self.t0.to_term(), x.f().to_term())))
        if self.t1 is not None:
            parts.append(Atom("<", (x.f().to_term(), self.t1.to_term())))
        return Exists(self.var, And(tuple(parts)))

    def __str__(self):
        return format_formula(self.formula())


def paper_rule(block: ExistsBlock):
    """The five clauses as stated; a clause mentioning an infinite bound is dropped."""
    s0, s1, t0, t1 = block.s0, block.s1, block.t0, block.t1
    have = lambda *ts: all(t is not None for t in ts)
    out = []
    if have(s0, s1):
        out.append(lt(s0, s1))
    if have(t0, t1):
        out.append(lt(t0, t1))
    if have(s0, s1, t0, t1):
        ph = same_column(s0, s1)
        out.append(_implies(ph, _and(le(t0, s0.f()), le(s1.f(), t1))))
        out.append(_implies(
            _and(_not(ph), _not(same_column(t0, s1.f())), _not(same_column(t1, s0.f()))),
            _and(lt(s1.f(), t0), lt(t0, t1), lt(t1, s0.f()))))
        out.append(_implies(_and(_not(ph), same_column(t0, s1.f())),
                            _and(le(t0, s1.f()), lt(t0, t1))))
        out.append(_implies(_and(_not(ph), same_column(t1, s0.f())),
                            _and(le(s0.f(), t1), lt(t0, t1))))
    return _and(*out)


def validated_rule(block: ExistsBlock):
    """Exact elimination by columns.

    Write x = (u, w).  The x-range occupies the columns from first(s0) to
    first(s1), cut below by s0 on the left column and above by s1 on the
    right one.  Since f(x) = (-u, w), the f(x)-range occupies the columns
    from first(f(t1)) to first(f(t0)), cut above by f(t1) on its left column
    and below by f(t0) on its right one.  A witness exists iff some column
    strictly inside both ranges exists, or one of the four boundary columns
    carries every active lower cut below every active upper cut.
    """
    ft0 = block.t0.f() if block.t0 is not None else None
    ft1 = block.t1.f() if block.t1 is not None else None
    lefts = [b for b in (block.s0, ft1) if b is not None]
    rights = [b for b in (block.s1, ft0) if b is not None]
    lowers = [b for b in (block.s0, ft0) if b is not None]
    uppers = [b for b in (block.s1, ft1) if b is not None]
    interior = _and(*(col_lt(l, r) for l in lefts for r in rights))
    cases = [interior]
    for col in (block.s0, block.s1, ft0, ft1):
        if col is None:
            continue
        inside = [col_le(l, col) for l in lefts] + [col_le(col, r) for r in rights]
        cuts = [_implies(_and(same_column(lo, col), same_column(up, col)), lt(lo, up))
                for lo in lowers for up in uppers]
        cases.append(_and(*inside, *cuts))
    return _or(*cases)


RULES = {"paper": paper_rule, "validated": validated_rule}


def eliminate_exists(block: ExistsBlock, rule: str = "validated"):
    try:
        return RULES[rule](block)
    except KeyError:
        raise ValueError(f"unknown rule {rule!r}; choose from {sorted(RULES)}") from None


# ---------------------------------------------------------------- driver


def _nnf(phi, neg=False):
    """Negation normal form with negated atoms resolved by trichotomy."""
    if isinstance(phi, Atom):
        if phi.rel not in ("<", "="):
            raise UnsupportedFormula(f"relation {phi.rel!r} not in the language of qlex")
        s, t = (normalize_term(a) for a in phi.args)
        if not neg:
            return _atom(phi.rel, s, t)
        if phi.rel == "<":
            return _or(_atom("<", t, s), _atom("=", s, t))
        return _or(_atom("<", s, t), _atom("<", t, s))
    if isinstance(phi, Not):
        return _nnf(phi.body, not neg)
    if isinstance(phi, And):
        parts = [_nnf(p, neg) for p in phi.parts]
        return _or(*parts) if neg else _and(*parts)
    if isinstance(phi, Or):
        parts = [_nnf(p, neg) for p in phi.parts]
        return _and(*parts) if neg else _or(*parts)
    raise UnsupportedFormula("quantifier left inside a body")


def _dnf(phi, var=None) -> list:
    """List of conjunctions, each a list of literals.  Subformulas without
    ``var`` are kept whole as single literals."""
    if phi == TRUE:
        return [[]]
    if phi == FALSE:
        return []
    if isinstance(phi, Atom) or (var is not None and var not in free_vars(phi)):
        return [[phi]]
    if isinstance(phi, Or):
        out = []
        for p in phi.parts:
            out.extend(_dnf(p, var))
        return out
    out = [[]]
    for p in phi.parts:
        out = [a + b for a in out for b in _dnf(p, var)]
    return out


def _atom_key(a):
    """(rel, s - t) up to sign, for spotting clashing literals."""
    d = normalize_term(a.args[0]) - normalize_term(a.args[1])
    return a.rel, d


def _clash(conj) -> bool:
    """s < t together with t < s or s = t; s = t with a different ground offset."""
    lts, eqs = set(), set()
    for a in conj:
        if isinstance(a, Atom):
            rel, d = _atom_key(a)
            (lts if rel == "<" else eqs).add(d)
    for d in lts:
        if -d in lts or d in eqs or -d in eqs:
            return True
    return False


def _prune(conjs) -> list:
    """Drop duplicate, clashing and subsumed conjunctions, keeping first-seen
    order so the output text does not depend on hashing."""
    kept = []
    seen = set()
    for c in conjs:
        lits = list(dict.fromkeys(c))
        fs = frozenset(lits)
        if fs in seen or _clash(lits):
            continue
        seen.add(fs)
        kept.append((fs, lits))
    return [lits for fs, lits in kept if not any(o < fs for o, _ in kept)]


def _max_choice(bounds, upper: bool):
    """Disjunction over which bound is binding, paired with that bound."""
    if len(bounds) <= 1:
        return [(TRUE, bounds[0] if bounds else None)]
    out = []
    for i, b in enumerate(bounds):
        cond = _and(*(le(b, c) if upper else le(c, b) for j, c in enumerate(bounds) if j != i))
        out.append((cond, b))
    return out


def _eliminate_conjunct(var, atoms, rule):
    free, lo_x, hi_x, lo_f, hi_f = [], [], [], [], []
    eq = None
    for a in atoms:
        if not isinstance(a, Atom):
            free.append(a)
            continue
        d = normalize_term(a.args[0]) - normalize_term(a.args[1])
        alpha, beta = d.coeffs(var)
        if alpha == 0 and beta == 0:
            free.append(a)
            continue
        if alpha and beta:
            raise UnsupportedFormula(f"atom {format_formula(a)} mixes {var} and f({var})")
        coeff, on_f = (alpha, False) if alpha else (beta, True)
        bound = d.without(var).scale(Fraction(-1) / coeff)
        if a.rel == "=":
            if eq is None:
                eq = bound.f() if on_f else bound
            continue
        below = coeff > 0       # coeff * v + rest < 0  <=>  v < bound when coeff > 0
        target = (hi_f if below else lo_f) if on_f else (hi_x if below else lo_x)
        target.append(bound)
    if eq is not None:
        parts = []
        for a in atoms:
            if not isinstance(a, Atom):
                parts.append(a)
                continue
            s, t = (normalize_term(arg).subst(var, eq) for arg in a.args)
            parts.append(_atom(a.rel, s, t))
        return _and(*parts)
    cases = []
    for (c1, s0), (c2, s1), (c3, t0), (c4, t1) in itertools.product(
            _max_choice(lo_x, False), _max_choice(hi_x, True),
            _max_choice(lo_f, False), _max_choice(hi_f, True)):
        block = ExistsBlock(var, s0, s1, t0, t1)
        cases.append(_and(c1, c2, c3, c4, eliminate_exists(block, rule)))
    return _and(*free, _or(*cases))


def eliminate_quantifier(var, body, rule="validated"):
    """Quantifier-free equivalent of E var. body for quantifier-free body."""
    return _or(*(_eliminate_conjunct(var, conj, rule) for conj in _prune(_dnf(_nnf(body), var))))


def eliminate_all(phi, rule="validated"):
    """Innermost-first elimination of every quantifier."""
    if is_quantifier_free(phi):
        return phi
    return _elim(phi, rule)


def _elim(phi, rule):
    if isinstance(phi, Atom):
        return phi
    if isinstance(phi, Not):
        return Not(_elim(phi.body, rule))
    if isinstance(phi, (And, Or)):
        return type(phi)(tuple(_elim(p, rule) for p in phi.parts))
    body = _elim(phi.body, rule)
    if isinstance(phi, Exists):
        return eliminate_quantifier(phi.var, body, rule)
    return _nnf(Not(eliminate_quantifier(phi.var, Not(body), rule)))


# ---------------------------------------------------------------- oracle validation


QLEX = QLexGroup()


def lex_grid(coords=(-1, 0, 1)):
    return [LexPoint(a, b) for a in coords for b in coords]


@dataclass
class Disagreement:
    block: str
    assignment: dict
    oracle: bool
    rule: bool


@dataclass
class ValidationReport:
    rule: str
    blocks: int = 0
    checks: int = 0
    disagreements: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.disagreements


def check_block(block: ExistsBlock, assignments, rules=("validated",)):
    """Compare each rule's output with exact evaluation of the block.

    Returns one list of disagreements per rule; the oracle runs once per
    assignment.
    """
    ex = block.formula()
    outs = {r: eliminate_exists(block, r) for r in rules}
    names = free_vars(ex)
    for qf in outs.values():
        names |= free_vars(qf)
    found = {r: [] for r in rules}
    for env in assignments:
        if not names <= set(env):
            raise ValueError(f"assignment misses {sorted(names - set(env))}")
        want = evaluate(QLEX, ex, env, check=False)
        for r, qf in outs.items():
            got = evaluate(QLEX, qf, env, check=False)
            if want != got:
                found[r].append(Disagreement(str(block), {k: str(v) for k, v in env.items()},
                                             want, got))
    return found


RECORDED_INSTANCE = ExistsBlock(
    "x",
    NormalTerm.constant(LexPoint(0, 0)), NormalTerm.constant(LexPoint(1, 0)),
    NormalTerm.constant(LexPoint(0, 0)), NormalTerm.constant(LexPoint(1, 0)),
)


def _random_bound(rng: random.Random, names, coords):
    roll = rng.random()
    if roll < 0.08:
        return None
    c = NormalTerm.constant(LexPoint(rng.choice(coords), rng.choice(coords)))
    if roll < 0.4:
        return c
    v = NormalTerm.var(rng.choice(names))
    if rng.random() < 0.5:
        v = v.f()
    if rng.random() < 0.4:
        v = v + c
    return v


def qe_corpus(count=500, seed=0, names=("y", "z"), coords=(-1, 0, 1)):
    """Seeded ExistsBlocks over x whose bounds are constants or (f of) a
    free variable plus a constant; the recorded boundary-column instance
    comes first."""
    rng = random.Random(seed)
    blocks = [RECORDED_INSTANCE]
    while len(blocks) < count:
        blocks.append(ExistsBlock("x", *(_random_bound(rng, names, coords) for _ in range(4))))
    return blocks


def assignments_for(block: ExistsBlock, coords=(-1, 0, 1)):
    names = sorted(free_vars(block.formula()))
    grid = lex_grid(coords)
    return [dict(zip(names, combo)) for combo in itertools.product(grid, repeat=len(names))]


def _check_one(args):
    block, rules, coords = args
    envs = assignments_for(block, coords)
    return len(envs), check_block(block, envs, rules)


def validate_corpus(blocks, rules=("validated",), coords=(-1, 0, 1), workers=1) -> dict:
    """Run every block against the oracle on all grid assignments of its
    free variables; one ValidationReport per rule, in block order."""
    if isinstance(rules, str):
        rules = (rules,)
    jobs = [(b, tuple(rules), tuple(coords)) for b in blocks]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_check_one, jobs, chunksize=16))
    else:
        results = [_check_one(j) for j in jobs]
    reports = {r: ValidationReport(r) for r in rules}
    for n_env, found in results:
        for r in rules:
            reports[r].blocks += 1
            reports[r].checks += n_env
            reports[r].disagreements.extend(found[r])
    return reports
