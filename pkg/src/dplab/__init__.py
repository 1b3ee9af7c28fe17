"""Desk-scale workbench for dp-minimality: certificates, type counts,
quantifier elimination and the valued-group and p-adic toolkits."""

from .formula import (
    And, App, Atom, Const, Exists, Forall, Not, Or, Scale, Signature, Sum, Var,
    Zero, disjuncts, format_formula, format_term, free_vars, substitute,
)
from .parser import ParseError, parse, parse_term
from .semantics import Structure, UnsupportedFormula, evaluate, get_structure
from . import structures  # noqa: F401  (registers structures)

__version__ = "0.1.0"
