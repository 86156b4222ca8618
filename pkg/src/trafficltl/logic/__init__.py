"""Formulas, labeling and one-pair Rabin automata."""
from .dra import RabinAutomaton, accepts_lasso, classify, compile_to_dra, minimize_dra
from .formula import (
    And,
    Atom,
    Const,
    Finally,
    Formula,
    FormulaError,
    Globally,
    Implies,
    Next,
    Not,
    Or,
    PhaseAP,
    Prop,
    SignalAP,
    StateAP,
    Until,
    atoms,
    pretty,
)
from .hoa import HOAError, export_hoa, import_hoa
from .labeling import Labeling, evaluate_atoms, label_partition
from .parser import parse_formula, resolve
from .semantics import holds_on_lasso

__all__ = [
    "And", "Atom", "Const", "Finally", "Formula", "FormulaError", "Globally", "HOAError",
    "Implies", "Labeling", "Next", "Not", "Or", "PhaseAP", "Prop", "RabinAutomaton",
    "SignalAP", "StateAP", "Until", "accepts_lasso", "atoms", "classify", "compile_to_dra",
    "evaluate_atoms", "export_hoa", "holds_on_lasso", "import_hoa", "label_partition",
    "minimize_dra", "parse_formula", "pretty", "resolve",
]
