"""Formula syntax tree and pretty-printer."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..network import natural_key


class FormulaError(ValueError):
    """Syntax, resolution or fragment error; ``pos`` is a character offset when known."""

    def __init__(self, message: str, pos: int | None = None, text: str | None = None):
        self.pos = pos
        self.text = text
        if pos is not None and text is not None:
            message = f"{message} at position {pos}\n  {text}\n  {' ' * pos}^"
        elif pos is not None:
            message = f"{message} at position {pos}"
        super().__init__(message)


@dataclass(frozen=True)
class Formula:
    def children(self) -> tuple["Formula", ...]:
        return ()

    def __str__(self) -> str:
        return pretty(self)


# -- atoms ----------------------------------------------------------------

@dataclass(frozen=True)
class Atom(Formula):
    pass


@dataclass(frozen=True)
class Const(Atom):
    value: bool


@dataclass(frozen=True)
class Prop(Atom):
    """Uninterpreted proposition, only usable where a valuation is supplied directly."""

    name: str
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class StateAP(Atom):
    """``x[link] <= threshold`` or ``x[link] >= threshold``."""

    link: str
    op: str
    threshold: float
    pos: int = field(default=-1, compare=False, repr=False)

    def holds(self, value: float) -> bool:
        return value <= self.threshold if self.op == "<=" else value >= self.threshold


@dataclass(frozen=True)
class SignalAP(Atom):
    """``link in sig``: the link is actuated by the current signal."""

    link: str
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class PhaseAP(Atom):
    """``sig(v) == {..}`` or ``sig(v) == k``: intersection ``v`` runs the given phase."""

    intersection: str
    phase: frozenset | int
    pos: int = field(default=-1, compare=False, repr=False)


# -- connectives ----------------------------------------------------------

@dataclass(frozen=True)
class Unary(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Not(Unary):
    pass


@dataclass(frozen=True)
class Next(Unary):
    pass


@dataclass(frozen=True)
class Globally(Unary):
    pass


@dataclass(frozen=True)
class Finally(Unary):
    pass


@dataclass(frozen=True)
class Binary(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class And(Binary):
    pass


@dataclass(frozen=True)
class Or(Binary):
    pass


@dataclass(frozen=True)
class Implies(Binary):
    pass


@dataclass(frozen=True)
class Until(Binary):
    pass


UNARY_SYMBOL = {Not: "!", Next: "X", Globally: "G", Finally: "F"}
BINARY_SYMBOL = {And: "&", Or: "|", Implies: "->", Until: "U"}


def _number(v: float) -> str:
    s = repr(float(v))
    return s[:-2] if s.endswith(".0") else s


def pretty_atom(a: Atom) -> str:
    if isinstance(a, Const):
        return "true" if a.value else "false"
    if isinstance(a, Prop):
        return a.name
    if isinstance(a, StateAP):
        return f"x[{a.link}] {a.op} {_number(a.threshold)}"
    if isinstance(a, SignalAP):
        return f"{a.link} in sig"
    if isinstance(a, PhaseAP):
        if isinstance(a.phase, int):
            return f"sig({a.intersection}) == {a.phase}"
        return f"sig({a.intersection}) == {{{','.join(sorted(a.phase, key=natural_key))}}}"
    raise TypeError(f"not an atom: {a!r}")


def pretty(f: Formula) -> str:
    """Text form that parses back to an equal tree; binary operands are parenthesised."""
    if isinstance(f, Atom):
        return pretty_atom(f)
    if isinstance(f, Unary):
        inner = pretty(f.arg)
        if isinstance(f.arg, Binary) or (isinstance(f.arg, Atom) and " " in inner and not isinstance(f, Not)):
            inner = f"({inner})"
        sym = UNARY_SYMBOL[type(f)]
        return f"{sym}{inner}" if sym == "!" else f"{sym} {inner}"
    if isinstance(f, Binary):
        parts = []
        for child in (f.left, f.right):
            s = pretty(child)
            parts.append(f"({s})" if isinstance(child, Binary) else s)
        return f"{parts[0]} {BINARY_SYMBOL[type(f)]} {parts[1]}"
    raise TypeError(f"not a formula: {f!r}")


def atoms(f: Formula) -> list[Atom]:
    """Distinct non-constant atoms in left-to-right order of first occurrence."""
    seen: dict[Atom, None] = {}

    def walk(g):
        if isinstance(g, Const):
            return
        if isinstance(g, Atom):
            seen.setdefault(g, None)
            return
        for c in g.children():
            walk(c)

    walk(f)
    return list(seen)


def conjuncts(f: Formula) -> list[Formula]:
    if isinstance(f, And):
        return conjuncts(f.left) + conjuncts(f.right)
    return [f]


def is_boolean(f: Formula) -> bool:
    if isinstance(f, Atom):
        return True
    if isinstance(f, (Not, And, Or, Implies)):
        return all(is_boolean(c) for c in f.children())
    return False


def next_depth(f: Formula) -> int | None:
    """Nesting depth of ``X`` for formulas built from atoms, boolean connectives and ``X``; else None."""
    if isinstance(f, Atom):
        return 0
    if isinstance(f, Next):
        d = next_depth(f.arg)
        return None if d is None else d + 1
    if isinstance(f, (Not, And, Or, Implies)):
        ds = [next_depth(c) for c in f.children()]
        return None if None in ds else max(ds)
    return None
