"""Tarski semantics over concrete structures with exact quantifier handling."""

from __future__ import annotations

import random
from fractions import Fraction

from .formula import And, Atom, Exists, Forall, Not, Or, Signature, free_vars


class UnsupportedFormula(ValueError):
    """The structure cannot decide this formula exactly."""


class Structure:
    """A concrete structure with exact atomic evaluation.

    Subclasses interpret terms and atoms and, when they can, provide
    ``witness_grid``: a finite set of elements that is guaranteed to contain
    a witness for every satisfiable instance passed in.
    """

    name = "structure"
    signature = Signature()

    def eval_term(self, t, env):
        raise NotImplementedError

    def eval_atom(self, atom, env) -> bool:
        raise NotImplementedError

    def witness_grid(self, var, instances) -> list:
        """Candidates for ``var`` covering every cell of the joint case split.

        ``instances`` is a sequence of ``(body, env)`` pairs; the grid is
        exact for all of them at once.
        """
        raise UnsupportedFormula(f"{self.name} has no exact witness domain")

    def sample(self, rng: random.Random):
        raise NotImplementedError

    def parse_element(self, text: str):
        raise NotImplementedError

    def format_element(self, e) -> str:
        return str(e)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


def evaluate(struct: Structure, phi, env: dict, *, check: bool = True) -> bool:
    """Truth value of ``phi`` in ``struct`` under the assignment ``env``.

    ``check=False`` skips the free-variable check for callers that already
    did it once for many assignments.
    """
    if check:
        missing = free_vars(phi) - set(env)
        if missing:
            raise ValueError(f"unassigned free variables: {sorted(missing)}")
    return _eval(struct, phi, env)


def _eval(struct, phi, env):
    if isinstance(phi, Atom):
        return struct.eval_atom(phi, env)
    if isinstance(phi, Not):
        return not _eval(struct, phi.body, env)
    if isinstance(phi, And):
        return all(_eval(struct, p, env) for p in phi.parts)
    if isinstance(phi, Or):
        return any(_eval(struct, p, env) for p in phi.parts)
    grid = struct.witness_grid(phi.var, [(phi.body, env)])
    if isinstance(phi, Exists):
        return any(_eval(struct, phi.body, {**env, phi.var: c}) for c in grid)
    if isinstance(phi, Forall):
        return all(_eval(struct, phi.body, {**env, phi.var: c}) for c in grid)
    raise TypeError(f"not a formula: {phi!r}")


def rational_grid(values) -> list:
    """Points, midpoints and one point beyond each end of a rational set."""
    pts = sorted(set(values))
    if not pts:
        return [Fraction(0)]
    out = [pts[0] - 1]
    for a, b in zip(pts, pts[1:]):
        out.append(a)
        out.append((a + b) / 2)
    out.append(pts[-1])
    out.append(pts[-1] + 1)
    return out


_REGISTRY = {}


def register(name):
    def deco(factory):
        _REGISTRY[name] = factory
        return factory
    return deco


def get_structure(name: str, **options) -> Structure:
    if name not in _REGISTRY:
        raise KeyError(f"unknown structure {name!r}; known: {sorted(_REGISTRY)}")
    return _REGISTRY[name](**options)


def structure_names():
    return sorted(_REGISTRY)
