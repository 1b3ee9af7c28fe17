"""Finite-precision p-adic numbers, RV_k classes, annuli, power cosets and
cell-like checks."""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction

from .formula import Const, Scale, Signature, Sum, Var, Zero, free_vars
from .semantics import Structure, UnsupportedFormula, evaluate, register

INF = math.inf


class PrecisionError(ArithmeticError):
    """The stored precision cannot decide the question; retry with more digits."""


def vp(p: int, n: int) -> int:
    if n == 0:
        return INF
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


class PadicApprox:
    """x = p^valuation * unit + O(p^(valuation + precision)).

    For a zero value ``valuation`` is ``inf`` and ``precision`` holds the
    absolute precision: the value is O(p^precision), or exactly 0 when that
    is ``inf`` as well.
    """

    __slots__ = ("p", "valuation", "unit", "precision")

    def __init__(self, p, valuation, unit, precision):
        self.p = p
        self.valuation = valuation
        self.precision = precision
        if valuation == INF:
            self.unit = 0
        else:
            if precision < 1:
                raise ValueError("relative precision must be >= 1")
            unit %= p ** precision
            if unit % p == 0:
                raise ValueError("unit part divisible by p")
            self.unit = unit

    # -- construction
    @classmethod
    def zero(cls, p, absprec=INF):
        return cls(p, INF, 0, absprec)

    @classmethod
    def from_int(cls, p, n: int, precision: int):
        if n == 0:
            return cls.zero(p)
        v = vp(p, n)
        return cls(p, v, n // p ** v, precision)

    @classmethod
    def from_rational(cls, p, q, precision: int):
        q = Fraction(q)
        if q == 0:
            return cls.zero(p)
        vn, vd = vp(p, q.numerator), vp(p, q.denominator)
        num, den = q.numerator // p ** vn, q.denominator // p ** vd
        mod = p ** precision
        return cls(p, vn - vd, num * pow(den, -1, mod), precision)

    @classmethod
    def from_parts(cls, p, valuation, unit, precision):
        """Build from an arbitrary integer ``unit``, pulling out its p-part."""
        if unit == 0:
            return cls.zero(p, valuation + precision)
        e = vp(p, unit)
        return cls(p, valuation + e, unit // p ** e, precision - e) if precision > e \
            else cls.zero(p, valuation + precision)

    # -- queries
    def is_zero(self) -> bool:
        return self.valuation == INF

    @property
    def absprec(self):
        return self.precision if self.is_zero() else self.valuation + self.precision

    def residue(self, k: int) -> int:
        """Unit part mod p^k."""
        if self.is_zero():
            raise PrecisionError("zero has no unit part")
        if k > self.precision:
            raise PrecisionError(f"unit known mod p^{self.precision}, asked mod p^{k}")
        return self.unit % self.p ** k

    # -- arithmetic
    def _check(self, other):
        if not isinstance(other, PadicApprox) or other.p != self.p:
            raise TypeError("operands must be PadicApprox over the same prime")

    def _combine(self, other, sign):
        if not isinstance(other, PadicApprox) or other.p != self.p:
            raise TypeError("operands must be PadicApprox over the same prime")
        p = self.p
        sv, ov = self.valuation, other.valuation
        if ov == INF and other.precision == INF:
            return self
        if sv == INF and self.precision == INF:
            return other if sign > 0 else -other
        A = min(self.precision if sv == INF else sv + self.precision,
                other.precision if ov == INF else ov + other.precision)
        m = min(sv, ov)
        if m >= A:
            return PadicApprox.zero(p, A)
        s = 0
        if sv != INF:
            s += self.unit * p ** (sv - m)
        if ov != INF:
            s += sign * other.unit * p ** (ov - m)
        s %= p ** (A - m)
        if s == 0:
            return PadicApprox.zero(p, A)
        e = 0
        while s % p == 0:
            s //= p
            e += 1
        return PadicApprox(p, m + e, s, A - m - e)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        if self.is_zero():
            return self
        return PadicApprox(self.p, self.valuation, -self.unit, self.precision)

    def __mul__(self, other):
        self._check(other)
        if self.is_zero() or other.is_zero():
            if self.is_zero() and other.is_zero():
                return PadicApprox.zero(self.p, self.precision + other.precision)
            z, w = (self, other) if self.is_zero() else (other, self)
            return PadicApprox.zero(self.p, z.precision + w.valuation)
        prec = min(self.precision, other.precision)
        return PadicApprox(self.p, self.valuation + other.valuation,
                           self.unit * other.unit, prec)

    def scale(self, q):
        q = Fraction(q)
        if q == 0:
            return PadicApprox.zero(self.p)
        c = PadicApprox.from_rational(self.p, q, max(self.precision, 1) if not self.is_zero() else 1)
        if self.is_zero():
            return PadicApprox.zero(self.p, self.precision + c.valuation)
        return PadicApprox(self.p, self.valuation + c.valuation, self.unit * c.unit, self.precision)

    def __eq__(self, other):
        return (isinstance(other, PadicApprox) and self.p == other.p
                and self.valuation == other.valuation and self.unit == other.unit
                and self.precision == other.precision)

    def __hash__(self):
        return hash((self.p, self.valuation, self.unit, self.precision))

    def __repr__(self):
        return f"PadicApprox({self})"

    def __str__(self):
        if self.is_zero():
            return "0" if self.precision == INF else f"O({self.p}^{self.precision})"
        return f"{self.p}^{self.valuation} * {self.unit} + O({self.p}^{self.absprec})"


def parse_padic(text: str, p: int, precision: int) -> PadicApprox:
    """Read ``"p^v * u"``, an integer or a rational."""
    m = re.fullmatch(r"\s*(\d+)\s*\^\s*(-?\d+)\s*\*\s*(-?\d+)\s*", text)
    if m:
        if int(m.group(1)) != p:
            raise ValueError(f"literal {text!r} is not over p={p}")
        return PadicApprox.from_parts(p, int(m.group(2)), int(m.group(3)), precision)
    return PadicApprox.from_rational(p, Fraction(text.strip()), precision)


# ---------------------------------------------------------------- RV_k


@dataclass(frozen=True)
class RVClass:
    valuation: int
    residue: int
    k: int


RV_INF = "inf"


def pi_k(x: PadicApprox, k: int):
    """Image in RV_k = K^x / (1 + p^k Z_p); RV_INF for 0."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if x.is_zero():
        return RV_INF
    return RVClass(x.valuation, x.residue(k), k)


def check_prop61(x: PadicApprox, y: PadicApprox, z: PadicApprox, k: int) -> bool:
    """True iff pi_k(x-z) = pi_k(y-z) agrees with v(x-y) >= v(y-z) + k."""
    a, b = x - z, y - z
    if a.is_zero() or b.is_zero():
        raise PrecisionError("x - z or y - z is indistinguishable from 0")
    lhs = pi_k(a, k) == pi_k(b, k)
    d = x - y
    bound = b.valuation + k
    if d.is_zero():
        if d.precision < bound:
            raise PrecisionError("v(x - y) undecided against the bound")
        rhs = True
    else:
        rhs = d.valuation >= bound
    return lhs == rhs


def random_padic(rng: random.Random, p: int, precision: int, vmax: int = 3) -> PadicApprox:
    v = rng.randrange(vmax + 1)
    u = rng.randrange(p ** (precision - 1)) * p + rng.randrange(1, p)
    return PadicApprox(p, v, u, precision)


def prop61_suite(primes=(2, 3, 5), ks=(1, 2, 3, 4), precision=12, trials=10_000, seed=0):
    """Rows ``(p, k, decidable, passed, undecided)`` over seeded random triples.

    Triples are biased so that x - y often lands deep in p^k Z_p.
    """
    rows = []
    for p in primes:
        for k in ks:
            rng = random.Random(f"{seed}:{p}:{k}")
            ok = dec = und = 0
            for _ in range(trials):
                z = random_padic(rng, p, precision)
                y = random_padic(rng, p, precision)
                if rng.random() < 0.5:
                    x = y + random_padic(rng, p, precision, vmax=k + 3)
                else:
                    x = random_padic(rng, p, precision)
                try:
                    good = check_prop61(x, y, z, k)
                except PrecisionError:
                    und += 1
                    continue
                dec += 1
                ok += good
            rows.append((p, k, dec, ok, und))
    return rows


# ---------------------------------------------------------------- cosets of P_n


def hensel_modulus_exponent(p: int, n: int) -> int:
    """m such that a unit is an n-th power iff it is one mod p^m."""
    return 2 * vp(p, n) + 1


class PowerCosets:
    """The cosets lambda * P_n in Q_p^x, keyed by (v mod n, unit class).

    Unit classes are computed mod p^h with h the Hensel-Rychlik exponent and
    labelled by their least positive residue.
    """

    def __init__(self, p: int, n: int):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.p, self.n = p, n
        self.h = hensel_modulus_exponent(p, n)
        mod = self.mod = p ** self.h
        units = [u for u in range(1, mod) if u % p]
        self.powers = sorted({pow(u, n, mod) for u in units})
        label = {}
        for u in units:
            if u not in label:
                for w in self.powers:
                    label[u * w % mod] = u
        self._label = label
        self.unit_classes = sorted(set(label.values()))

    def unit_class(self, u: int) -> int:
        return self._label[u % self.mod]

    def key(self, valuation: int, unit: int):
        return (valuation % self.n, self.unit_class(unit))

    def key_of(self, z: PadicApprox):
        if z.is_zero():
            raise PrecisionError("0 has no coset")
        return self.key(z.valuation, z.residue(self.h))

    def is_nth_power(self, z: PadicApprox) -> bool:
        return z.is_zero() or self.key_of(z) == (0, 1)

    def count(self) -> int:
        return self.n * len(self.unit_classes)

    def representatives(self) -> list:
        """Least positive integer in each coset, in increasing order."""
        want, found = self.count(), {}
        lam = 1
        while len(found) < want:
            v = vp(self.p, lam)
            k = self.key(v, lam // self.p ** v)
            found.setdefault(k, lam)
            lam += 1
        return sorted(found.values())

    def contains(self, lam: int, z: PadicApprox) -> bool:
        """z in lam * P_n; lam = 0 gives {0}, and 0 lies in every lam * P_n."""
        if z.is_zero():
            if z.precision != INF:
                raise PrecisionError("cannot tell z from 0")
            return True
        if lam == 0:
            return False
        v = vp(self.p, lam)
        return self.key_of(z) == self.key(v, lam // self.p ** v)


_COSET_CACHE = {}


def power_cosets(p: int, n: int) -> PowerCosets:
    if (p, n) not in _COSET_CACHE:
        _COSET_CACHE[(p, n)] = PowerCosets(p, n)
    return _COSET_CACHE[(p, n)]


def coset_representatives(p: int, n: int) -> list:
    return power_cosets(p, n).representatives()


# ---------------------------------------------------------------- cells


@dataclass(frozen=True)
class CellSpec:
    """Ann(c, gamma, delta) & Pow_{n,lam}(c); ``n = None`` drops the coset."""

    center: PadicApprox
    gamma: float = INF
    delta: float = -INF
    n: int | None = None
    lam: int = 1

    def __post_init__(self):
        if self.gamma != INF and self.delta != -INF and self.gamma < self.delta:
            raise ValueError("need gamma >= delta")
        if self.n is not None and self.n < 1:
            raise ValueError("n must be >= 1")


def in_annulus(z: PadicApprox, gamma, delta) -> bool:
    if z.is_zero():
        if gamma == INF:
            return True
        if z.precision > gamma:
            return False
        raise PrecisionError("cannot place v(x - c) against gamma")
    return delta <= z.valuation <= gamma


def in_cell(x: PadicApprox, cell: CellSpec) -> bool:
    z = x - cell.center
    if not in_annulus(z, cell.gamma, cell.delta):
        return False
    if cell.n is None:
        return True
    return power_cosets(x.p, cell.n).contains(cell.lam, z)


@dataclass
class CellLikeResult:
    p: int
    n: int
    k: int
    verified_modulus: int
    violations_at_k_minus_1: int | None
    tried: list = field(default_factory=list)


class BoundExhausted(RuntimeError):
    pass


def _level_violations(p, n, lams, k, M, cosets) -> int:
    """Ordered pairs (z, z') of offsets with pi_k(z) = pi_k(z'), valuations
    0..n and units mod p^M, that some lam * P_n tells apart."""
    mod = p ** M
    if M < cosets.h:
        raise ValueError("modulus below the Hensel exponent")
    bad = 0
    for v in range(n + 1):
        groups = {}
        for u in range(1, mod):
            if u % p == 0:
                continue
            z = PadicApprox(p, v, u, M)
            sig = tuple(cosets.contains(lam, z) for lam in lams)
            cls = groups.setdefault(u % p ** k, {})
            cls[sig] = cls.get(sig, 0) + 1
        for cls in groups.values():
            total = sum(cls.values())
            bad += total * total - sum(c * c for c in cls.values())
    return bad


def find_celllike_k(p: int, n: int | None, max_k: int = 12) -> CellLikeResult:
    """Least k >= 1 for which pi_k-equality of offsets preserves membership in
    every lam * P_n, checked over all residues mod p^max(k+2, h).

    ``n = None`` stands for an annulus-only set.
    """
    if n is None:
        return CellLikeResult(p, 0, 1, p ** 3, None, [1])
    cosets = power_cosets(p, n)
    lams = [0] + cosets.representatives()
    tried = []
    for k in range(1, max_k + 1):
        M = max(k + 2, cosets.h)
        tried.append(k)
        if _level_violations(p, n, lams, k, M, cosets) == 0:
            # pi_0 is not defined (1 + Z_p is not a group): k = 1 is minimal by fiat
            before = _level_violations(p, n, lams, k - 1, M, cosets) if k > 1 else None
            return CellLikeResult(p, n, k, p ** M, before, tried)
    raise BoundExhausted(f"no k <= {max_k} works for p={p}, n={n}")


# ---------------------------------------------------------------- formulas


@register("padic")
class PadicStructure(Structure):
    """Q_p at a fixed precision with =, vle, Ann and Pow; quantifier-free only."""

    name = "padic"
    signature = Signature(relations={"=": 2, "vle": 2, "Ann": 1, "Pow": 1},
                          flags=frozenset({"linear", "valued"}))

    def __init__(self, p: int = 3, precision: int = 12):
        self.p, self.precision = p, precision

    def eval_term(self, t, env):
        if isinstance(t, Var):
            return env[t.name]
        if isinstance(t, Zero):
            return PadicApprox.zero(self.p)
        if isinstance(t, Const) and not isinstance(t.value, tuple):
            return PadicApprox.from_rational(self.p, t.value, self.precision)
        if isinstance(t, Sum):
            return self.eval_term(t.left, env) + self.eval_term(t.right, env)
        if isinstance(t, Scale):
            return self.eval_term(t.operand, env).scale(t.coeff)
        raise UnsupportedFormula(f"term {t!r} not in the valued-field language")

    def eval_atom(self, atom, env):
        vals = [self.eval_term(a, env) for a in atom.args]
        if atom.rel == "=":
            d = vals[0] - vals[1]
            if not d.is_zero():
                return False
            if d.precision != INF:
                raise PrecisionError("equality undecided at this precision")
            return True
        if atom.rel == "vle":
            a, b = vals
            if a.is_zero() and b.is_zero():
                raise PrecisionError("comparing two approximate zeros")
            if b.is_zero():
                if b.precision == INF or b.precision > a.valuation:
                    return True
                raise PrecisionError("v(t) undecided")
            if a.is_zero():
                if a.precision > b.valuation:
                    return False
                raise PrecisionError("v(s) undecided")
            return a.valuation <= b.valuation
        if atom.rel == "Ann":
            g, d = atom.params
            return in_annulus(vals[0], g, d)
        if atom.rel == "Pow":
            n, lam = atom.params
            return power_cosets(self.p, n).contains(lam, vals[0])
        raise UnsupportedFormula(f"relation {atom.rel!r} not interpreted")

    def sample(self, rng):
        return random_padic(rng, self.p, self.precision)

    def parse_element(self, text):
        return parse_padic(text, self.p, self.precision)


def _formula_constants(phi):
    from .formula import atoms

    out = []

    def walk(t):
        if isinstance(t, Const) and not isinstance(t.value, tuple):
            out.append(t.value)
        elif isinstance(t, Sum):
            walk(t.left)
            walk(t.right)
        elif isinstance(t, Scale):
            walk(t.operand)

    for a in atoms(phi):
        for t in a.args:
            walk(t)
    return out


@dataclass
class CellLikeReport:
    tested: int = 0
    skipped: int = 0
    violation_count: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.violation_count == 0


def check_celllike(phi, k: int, samples: int = 10_000, *, p: int = 3, precision: int = 12,
                   x: str = "x", center: str = "y0", seed: int = 0,
                   max_violations: int = 20) -> CellLikeReport:
    """Search for (x, y0, ys, x', y0') with pi_k(x - y0) = pi_k(x' - y0'),
    phi(x; y0, ys) true and phi(x'; y0', ys) false.  The other parameters
    ys are shared by both sides.
    """
    struct = PadicStructure(p, precision)
    others = sorted(free_vars(phi) - {x, center})
    consts = _formula_constants(phi)
    rng = random.Random(seed)
    rep = CellLikeReport()
    special = [PadicApprox.from_int(p, 1, precision), PadicApprox.from_int(p, -1, precision)]
    special += [PadicApprox.from_int(p, p ** j, precision) for j in range(4)]
    special += [PadicApprox.from_rational(p, c, precision) for c in consts if c]
    for _ in range(samples):
        y0 = struct.sample(rng)
        roll = rng.random()
        if roll < 0.05:
            d = PadicApprox.zero(p)
        elif roll < 0.45:
            d = rng.choice(special)
        else:
            d = struct.sample(rng)
        env = {o: struct.sample(rng) for o in others}
        env.update({x: y0 + d, center: y0})
        y0p = struct.sample(rng) if rng.random() < 0.7 else y0
        if d.is_zero():
            dp = d
        else:
            w = PadicApprox.from_int(p, 1 + p ** k * rng.randrange(p ** precision), precision)
            dp = d * w
        env2 = {**env, x: y0p + dp, center: y0p}
        try:
            before = evaluate(struct, phi, env)
            after = evaluate(struct, phi, env2) if before else True
        except PrecisionError:
            rep.skipped += 1
            continue
        rep.tested += 1
        if before and not after:
            rep.violation_count += 1
        if before and not after and len(rep.violations) < max_violations:
            rep.violations.append({x: str(env[x]), center: str(y0), f"{x}'": str(env2[x]),
                                   f"{center}'": str(y0p)})
    return rep
