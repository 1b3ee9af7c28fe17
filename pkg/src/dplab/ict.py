"""Finite ICT and inp certificates: checking, exhaustive search, disjunct
refinement, single-formula fusion and breakpoint profiles."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .formula import Or, Var, disjuncts, format_formula, free_vars, substitute
from .parser import parse
from .semantics import Structure, evaluate, get_structure


class BudgetError(RuntimeError):
    """A search or check would exceed its configured size budget."""


class CertificateError(ValueError):
    pass


@dataclass(frozen=True)
class PatternFormula:
    """phi(var; params): one element variable and a tuple of parameter variables."""

    formula: object
    var: str = "x"
    params: tuple = ("y1", "y2")

    def __post_init__(self):
        extra = free_vars(self.formula) - {self.var, *self.params}
        if extra:
            raise ValueError(f"free variables outside var/params: {sorted(extra)}")

    def env(self, element, args) -> dict:
        if len(args) != len(self.params):
            raise ValueError(f"expected {len(self.params)} parameters, got {len(args)}")
        env = dict(zip(self.params, args))
        if element is not None:
            env[self.var] = element
        return env

    def holds(self, struct, element, args) -> bool:
        return evaluate(struct, self.formula, self.env(element, args))

    def text(self) -> str:
        return format_formula(self.formula)


@dataclass
class Limits:
    max_rows: int = 6
    max_pool: int = 8
    max_selections: int = 2_000_000
    max_subsets: int = 100_000


DEFAULT_LIMITS = Limits()


# ---------------------------------------------------------------- ICT certificates


@dataclass
class ICTCertificate:
    structure: Structure
    phi: PatternFormula
    psi: PatternFormula
    a_params: list
    b_params: list
    witnesses: list  # m rows of n elements

    @property
    def shape(self):
        return len(self.a_params), len(self.b_params)

    def to_dict(self) -> dict:
        fmt = self.structure.format_element
        return {
            "structure": self.structure.name,
            "phi": {"formula": self.phi.text(), "var": self.phi.var, "params": list(self.phi.params)},
            "psi": {"formula": self.psi.text(), "var": self.psi.var, "params": list(self.psi.params)},
            "a_params": [[fmt(e) for e in a] for a in self.a_params],
            "b_params": [[fmt(e) for e in b] for b in self.b_params],
            "witnesses": [[fmt(c) for c in row] for row in self.witnesses],
        }

    @classmethod
    def from_dict(cls, data: dict, structure: Structure | None = None) -> "ICTCertificate":
        struct = structure or get_structure(data["structure"])
        sig = struct.signature
        read = struct.parse_element

        def pat(d):
            return PatternFormula(parse(d["formula"], sig), d["var"], tuple(d["params"]))

        return cls(struct, pat(data["phi"]), pat(data["psi"]),
                   [tuple(read(e) for e in a) for a in data["a_params"]],
                   [tuple(read(e) for e in b) for b in data["b_params"]],
                   [[read(c) for c in row] for row in data["witnesses"]])


def cell_ok(struct, phi, psi, a_params, b_params, i, j, c, phi_pos=None) -> bool:
    """c satisfies the (i, j) cell: positive phi_i and psi_j, negative elsewhere.

    ``phi_pos`` optionally replaces phi on the positive side only.
    """
    if c is None:
        return False
    pos = phi_pos or phi
    if not pos.holds(struct, c, a_params[i]) or not psi.holds(struct, c, b_params[j]):
        return False
    for l, a in enumerate(a_params):
        if l != i and phi.holds(struct, c, a):
            return False
    for k, b in enumerate(b_params):
        if k != j and psi.holds(struct, c, b):
            return False
    return True


def check_ict_certificate(cert: ICTCertificate) -> bool:
    m, n = cert.shape
    if len(cert.witnesses) != m or any(len(row) != n for row in cert.witnesses):
        return False
    return all(cell_ok(cert.structure, cert.phi, cert.psi, cert.a_params, cert.b_params,
                       i, j, cert.witnesses[i][j])
               for i in range(m) for j in range(n))


def _joint_grid(struct, phi, psi, pool_a, pool_b):
    if phi.var != psi.var:
        raise ValueError("phi and psi must share the element variable")
    instances = [(phi.formula, phi.env(None, a)) for a in pool_a]
    instances += [(psi.formula, psi.env(None, b)) for b in pool_b]
    return struct.witness_grid(phi.var, instances)


def _masks(struct, formula, pool, grid):
    out = []
    for c in grid:
        mask = 0
        for idx, args in enumerate(pool):
            if formula.holds(struct, c, args):
                mask |= 1 << idx
        out.append(mask)
    return out


def _single_bit(x: int):
    return x and not (x & (x - 1))


def _cover(signatures, sel_a, sel_b):
    """Per cell (i, j) the first signature index realizing it, or None."""
    ma = sum(1 << i for i in sel_a)
    mb = sum(1 << j for j in sel_b)
    pos_a = {1 << a: r for r, a in enumerate(sel_a)}
    pos_b = {1 << b: r for r, b in enumerate(sel_b)}
    need = len(sel_a) * len(sel_b)
    found = {}
    for s, (x, y) in enumerate(signatures):
        xa, yb = x & ma, y & mb
        if _single_bit(xa) and _single_bit(yb):
            found.setdefault((pos_a[xa], pos_b[yb]), s)
            if len(found) == need:
                return found
    return None


def _scan(args):
    signatures, chunk, n_b, n = args
    for sel_a in chunk:
        for sel_b in itertools.combinations(range(n_b), n):
            cover = _cover(signatures, sel_a, sel_b)
            if cover is not None:
                return sel_a, sel_b, cover
    return None


def search_ict(struct, phi, psi, pool_a, pool_b, m, n, *, limits: Limits = DEFAULT_LIMITS,
               workers: int = 1):
    """Exhaustive search for an m x n ICT certificate over the parameter pools.

    Row and column selections are tried in lexicographic order of pool
    indices, and each cell takes the first realizing point of the joint
    endpoint grid, so the answer does not depend on ``workers``.  Returns
    None when no selection works.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    if max(m, n) > limits.max_rows:
        raise BudgetError(f"certificate size {m}x{n} exceeds cap {limits.max_rows}")
    if max(len(pool_a), len(pool_b)) > limits.max_pool:
        raise BudgetError(f"pool size exceeds cap {limits.max_pool}")
    n_sel = math.comb(len(pool_a), m) * math.comb(len(pool_b), n)
    if n_sel > limits.max_selections:
        raise BudgetError(f"{n_sel} parameter selections exceed cap {limits.max_selections}")
    if n_sel == 0:
        return None
    grid = _joint_grid(struct, phi, psi, pool_a, pool_b)
    mask_a = _masks(struct, phi, pool_a, grid)
    mask_b = _masks(struct, psi, pool_b, grid)
    # distinct (mask_a, mask_b) pairs in first-occurrence order, with a representative point
    reps = {}
    for c, x, y in zip(grid, mask_a, mask_b):
        reps.setdefault((x, y), c)
    signatures = list(reps)
    sels_a = list(itertools.combinations(range(len(pool_a)), m))
    if workers > 1 and len(sels_a) > 1:
        size = max(1, math.ceil(len(sels_a) / (4 * workers)))
        chunks = [sels_a[i:i + size] for i in range(0, len(sels_a), size)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_scan, [(signatures, ch, len(pool_b), n) for ch in chunks]))
        hit = next((r for r in results if r is not None), None)
    else:
        hit = _scan((signatures, sels_a, len(pool_b), n))
    if hit is None:
        return None
    sel_a, sel_b, cover = hit
    witnesses = [[reps[signatures[cover[(i, j)]]] for j in range(n)] for i in range(m)]
    cert = ICTCertificate(struct, phi, psi, [pool_a[i] for i in sel_a],
                          [pool_b[j] for j in sel_b], witnesses)
    assert check_ict_certificate(cert), "search produced an invalid certificate"
    return cert


# ---------------------------------------------------------------- refinement and fusion


@dataclass
class Refinement:
    index: int                 # 1-based disjunct number
    rows: list                 # retained row indices of the input certificate
    certificate: ICTCertificate
    note: str = ""


def refine_disjunct(cert: ICTCertificate, *, min_rows: int = 2) -> Refinement:
    """Pick a disjunct phi_l of phi and the largest row subset on which
    phi_l can take over the positive side while the exclusions keep full phi.

    Witnesses are searched afresh on the endpoint grid.  Because not-phi
    implies not-phi_l, the result is an ordinary certificate for phi_l and
    psi over the retained rows.
    """
    if not check_ict_certificate(cert):
        raise CertificateError("input certificate is not valid")
    struct, phi, psi = cert.structure, cert.phi, cert.psi
    parts = disjuncts(phi.formula)
    m, n = cert.shape
    grid = _joint_grid(struct, phi, psi, cert.a_params, cert.b_params)
    for size in range(m, min_rows - 1, -1):
        for l, part in enumerate(parts, start=1):
            pos = PatternFormula(part, phi.var, phi.params)
            for rows in itertools.combinations(range(m), size):
                a_sub = [cert.a_params[i] for i in rows]
                wit = []
                for i in range(size):
                    row = []
                    for j in range(n):
                        c = next((g for g in grid
                                  if cell_ok(struct, phi, psi, a_sub, cert.b_params, i, j, g, pos)), None)
                        if c is None:
                            break
                        row.append(c)
                    if len(row) < n:
                        break
                    wit.append(row)
                if len(wit) == size:
                    sub = ICTCertificate(struct, pos, psi, a_sub, list(cert.b_params), wit)
                    if not check_ict_certificate(sub):
                        raise AssertionError("refined certificate failed re-verification")
                    note = "" if size == m else f"dropped {m - size} row(s) to keep one disjunct"
                    return Refinement(l, list(rows), sub, note)
    raise CertificateError(f"no disjunct supports {min_rows} or more rows across all columns")


def fuse_single_formula(cert: ICTCertificate) -> ICTCertificate:
    """theta(x; u, w) := phi(x; u) | psi(x; w) with both families built from
    concatenated rows: c_i = a_i b_i (i < m/2), d_j = a_{m/2+j} b_{m/2+j}."""
    m, n = cert.shape
    if m != n or m % 2:
        raise CertificateError("fusion needs an even square certificate")
    if not check_ict_certificate(cert):
        raise CertificateError("input certificate is not valid")
    phi, psi = cert.phi, cert.psi
    used = set(phi.params) | {phi.var}
    renamed, psi_body = [], psi.formula
    if psi.var != phi.var:
        psi_body = substitute(psi_body, psi.var, Var(phi.var))
    for name in psi.params:
        new = name
        while new in used:
            new += "'"
        used.add(new)
        renamed.append(new)
        if new != name:
            psi_body = substitute(psi_body, name, Var(new))
    theta = PatternFormula(Or((phi.formula, psi_body)), phi.var, tuple(phi.params) + tuple(renamed))
    h = m // 2
    rows = [tuple(cert.a_params[i]) + tuple(cert.b_params[i]) for i in range(h)]
    cols = [tuple(cert.a_params[h + j]) + tuple(cert.b_params[h + j]) for j in range(h)]
    wit = [[cert.witnesses[i][h + j] for j in range(h)] for i in range(h)]
    out = ICTCertificate(cert.structure, theta, theta, rows, cols, wit)
    if not check_ict_certificate(out):
        raise AssertionError("fused certificate failed re-verification")
    return out


# ---------------------------------------------------------------- inp


@dataclass
class InpCertificate:
    structure: Structure
    phi: PatternFormula
    psi: PatternFormula
    k0: int
    k1: int
    a_params: list
    b_params: list
    witnesses: list
    subsets_checked: int = 0


def _inconsistent(struct, pat, params, k, limits) -> tuple:
    """(every k-subset of the instances is jointly empty, subsets examined)."""
    if k > len(params):
        return True, 0
    total = math.comb(len(params), k)
    if total > limits.max_subsets:
        raise BudgetError(f"{total} subsets exceed cap {limits.max_subsets}")
    grid = struct.witness_grid(pat.var, [(pat.formula, pat.env(None, a)) for a in params])
    sat = [[pat.holds(struct, c, a) for a in params] for c in grid]
    for sub in itertools.combinations(range(len(params)), k):
        if any(all(row[i] for i in sub) for row in sat):
            return False, total
    return True, total


def check_inp_certificate(cert: InpCertificate, *, limits: Limits = DEFAULT_LIMITS) -> bool:
    s = cert.structure
    m, n = len(cert.a_params), len(cert.b_params)
    if len(cert.witnesses) != m or any(len(r) != n for r in cert.witnesses):
        return False
    for i, a in enumerate(cert.a_params):
        for j, b in enumerate(cert.b_params):
            c = cert.witnesses[i][j]
            if not (cert.phi.holds(s, c, a) and cert.psi.holds(s, c, b)):
                return False
    ok0, n0 = _inconsistent(s, cert.phi, cert.a_params, cert.k0, limits)
    ok1, n1 = _inconsistent(s, cert.psi, cert.b_params, cert.k1, limits)
    cert.subsets_checked = n0 + n1
    return ok0 and ok1


def build_inp_certificate(struct, phi, psi, a_params, b_params, k0, k1):
    """Fill in pairwise witnesses from the endpoint grid; None if some pair is empty."""
    grid = _joint_grid(struct, phi, psi, a_params, b_params)
    wit = []
    for a in a_params:
        row = []
        for b in b_params:
            c = next((g for g in grid if phi.holds(struct, g, a) and psi.holds(struct, g, b)), None)
            if c is None:
                return None
            row.append(c)
        wit.append(row)
    return InpCertificate(struct, phi, psi, k0, k1, list(a_params), list(b_params), wit)


# ---------------------------------------------------------------- breakpoints


@dataclass
class BreakpointProfile:
    blocks: list               # (start, stop) index pairs, stop inclusive
    fingerprints: list         # one tuple of booleans per block

    @property
    def count(self) -> int:
        return len(self.blocks)


def breakpoint_profile(struct, sequence, c, delta, *, tuple_vars=("x",), elem_var="c"):
    """Maximal runs of constant Delta-type over c along the sequence."""
    if not sequence:
        raise ValueError("empty sequence")
    blocks, prints = [], []
    for idx, item in enumerate(sequence):
        item = item if isinstance(item, tuple) else (item,)
        env = dict(zip(tuple_vars, item))
        env[elem_var] = c
        fp = tuple(evaluate(struct, d, env) for d in delta)
        if prints and prints[-1] == fp:
            blocks[-1] = (blocks[-1][0], idx)
        else:
            blocks.append((idx, idx))
            prints.append(fp)
    return BreakpointProfile(blocks, prints)
