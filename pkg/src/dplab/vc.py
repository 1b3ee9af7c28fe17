"""Exact Delta-type counts over finite parameter sets and log-log growth fits."""

from __future__ import annotations

import itertools
import math
import random
import statistics
from dataclasses import dataclass, field
from fractions import Fraction

from .semantics import Structure
from .structures import PairPoint


@dataclass
class TypeTable:
    """Realized Delta-types: boolean vector -> first grid witness."""

    instances: list            # (PatternFormula, args) in bit order
    types: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.types)


def count_types(struct: Structure, var: str, instances) -> TypeTable:
    """Count the distinct truth vectors of the instances as x runs over the
    structure, using the joint endpoint grid (exact for supported classes)."""
    table = TypeTable(list(instances))
    if not table.instances:
        table.types[()] = None
        return table
    grid = struct.witness_grid(var, [(pat.formula, pat.env(None, args)) for pat, args in table.instances])
    for c in grid:
        vec = tuple(pat.holds(struct, c, args) for pat, args in table.instances)
        table.types.setdefault(vec, c)
    return table


def delta_instances(delta, A):
    out = []
    for pat in delta:
        for args in itertools.product(A, repeat=len(pat.params)):
            out.append((pat, args))
    return out


def count_delta_types(struct: Structure, delta, A) -> TypeTable:
    """S^Delta(A): every formula of Delta instantiated at every tuple from A."""
    if not delta:
        return count_types(struct, "x", [])
    var = delta[0].var
    if any(p.var != var for p in delta):
        raise ValueError("Delta formulas must share the element variable")
    return count_types(struct, var, delta_instances(delta, A))


# ---------------------------------------------------------------- recipes


def build_parameters(struct: Structure, recipe: str, size: int, seed: int = 0) -> list:
    """Parameter set of the given size from a named recipe.

    ``uniform_grid``: 1..size on the line, or the diagonal (i, i) for pairs.
    ``ict_families``: for pairs, the two families (i, i) and (i, h+1-i),
    i = 1..h with h = size // 2, so every coordinate sees h values twice.
    ``random``: seeded draws from the structure's sampler.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    pairs = struct.name == "pair_dlo"
    if recipe == "uniform_grid":
        return [PairPoint(i, i) if pairs else Fraction(i) for i in range(1, size + 1)]
    if recipe == "ict_families":
        if not pairs:
            return build_parameters(struct, "uniform_grid", size)
        if size % 2:
            raise ValueError("ict_families needs an even size")
        h = size // 2
        return [PairPoint(i, i) for i in range(1, h + 1)] + \
               [PairPoint(i, h + 1 - i) for i in range(1, h + 1)]
    if recipe == "random":
        rng = random.Random(f"{seed}:{struct.name}:{size}")
        out = []
        while len(out) < size:
            e = struct.sample(rng)
            if e not in out:
                out.append(e)
        return out
    raise ValueError(f"unknown recipe {recipe!r}")


@dataclass
class Profile:
    sizes: list
    counts: list
    slope: float
    intercept: float
    residuals: list
    max_ratio: float           # max count / size; no uniform bound is claimed


def fit_loglog(sizes, counts):
    xs = [math.log(s) for s in sizes]
    ys = [math.log(c) for c in counts]
    if len(set(ys)) == 1:
        return 0.0, ys[0], [0.0] * len(ys)
    slope, intercept = statistics.linear_regression(xs, ys)
    return slope, intercept, [y - (slope * x + intercept) for x, y in zip(xs, ys)]


def vc_density_profile(struct: Structure, delta, sizes, *, recipe="uniform_grid", seed=0) -> Profile:
    sizes = list(sizes)
    if len(sizes) < 2 or any(a >= b for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be strictly increasing with at least two entries")
    counts = [count_delta_types(struct, delta, build_parameters(struct, recipe, n, seed)).count
              for n in sizes]
    slope, intercept, res = fit_loglog(sizes, counts)
    return Profile(sizes, counts, slope, intercept, res, max(c / n for c, n in zip(counts, sizes)))
