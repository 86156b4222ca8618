"""Recursive-descent parser for the formula text grammar.

Precedence from tightest to loosest: unary operators (``! X G F``), ``U``,
``&``, ``|``, ``->``. ``U`` and ``->`` associate to the right.
"""
from __future__ import annotations

import re

from ..network import TrafficNetwork
from .formula import (
    And,
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
)

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_.]*)"
    r"|(?P<op>->|<=|>=|==|[!&|()\[\]{},])"
    r")"
)
UNARY = {"!": Not, "X": Next, "G": Globally, "F": Finally}
KEYWORDS = {"X", "G", "F", "U", "true", "false", "in"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise FormulaError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), start))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, k: int = 0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg: str, tok=None):
        tok = tok or self.peek()
        return FormulaError(msg, tok[2], self.text)

    def expect(self, value: str):
        tok = self.next()
        if tok[1] != value or tok[0] == "end":
            raise self.error(f"expected {value!r}, found {tok[1] or 'end of input'!r}", tok)
        return tok

    def parse(self) -> Formula:
        f = self.implies()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return f

    def implies(self) -> Formula:
        left = self.disj()
        if self.peek()[1] == "->":
            self.next()
            return Implies(left, self.implies())
        return left

    def disj(self) -> Formula:
        f = self.conj()
        while self.peek()[1] == "|":
            self.next()
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.until()
        while self.peek()[1] == "&":
            self.next()
            f = And(f, self.until())
        return f

    def until(self) -> Formula:
        left = self.unary()
        if self.peek()[:2] == ("ident", "U"):
            self.next()
            return Until(left, self.until())
        return left

    def unary(self) -> Formula:
        kind, val, _ = self.peek()
        if (kind == "op" and val == "!") or (kind == "ident" and val in ("X", "G", "F")):
            self.next()
            return UNARY[val](self.unary())
        return self.primary()

    def primary(self) -> Formula:
        kind, val, pos = self.peek()
        if val == "(" and kind == "op":
            self.next()
            f = self.implies()
            self.expect(")")
            return f
        if kind == "ident" and val in ("true", "false"):
            self.next()
            return Const(val == "true")
        if kind == "ident" and val == "x" and self.peek(1)[1] == "[":
            return self.state_ap()
        if kind == "ident" and val == "sig" and self.peek(1)[1] == "(":
            return self.phase_ap()
        if kind in ("ident", "num") and self.peek(1)[1] == "in":
            if kind == "ident" and val in KEYWORDS:
                raise self.error(f"keyword {val!r} cannot name a link")
            self.next()
            self.next()
            tok = self.next()
            if tok[1] != "sig":
                raise self.error("expected 'sig' after 'in'", tok)
            return SignalAP(val, pos=pos)
        if kind == "ident" and val not in KEYWORDS and val not in ("x", "sig"):
            self.next()
            return Prop(val, pos=pos)
        if kind == "end":
            raise self.error("unexpected end of input")
        raise self.error(f"unexpected token {val!r}")

    def link_id(self) -> str:
        kind, val, _ = self.peek()
        if kind not in ("ident", "num"):
            raise self.error(f"expected a link id, found {val or 'end of input'!r}")
        self.next()
        return val

    def state_ap(self) -> Formula:
        pos = self.next()[2]
        self.expect("[")
        link = self.link_id()
        self.expect("]")
        tok = self.next()
        if tok[1] not in ("<=", ">="):
            raise self.error("expected '<=' or '>='", tok)
        num = self.next()
        if num[0] != "num":
            raise self.error("expected a numeric threshold", num)
        return StateAP(link, tok[1], float(num[1]), pos=pos)

    def phase_ap(self) -> Formula:
        pos = self.next()[2]
        self.expect("(")
        kind, v, _ = self.next()
        if kind not in ("ident", "num"):
            raise self.error("expected an intersection id")
        self.expect(")")
        self.expect("==")
        if self.peek()[1] == "{":
            self.next()
            links = []
            if self.peek()[1] != "}":
                links.append(self.link_id())
                while self.peek()[1] == ",":
                    self.next()
                    links.append(self.link_id())
            self.expect("}")
            return PhaseAP(v, frozenset(links), pos=pos)
        num = self.next()
        if num[0] != "num" or not num[1].isdigit():
            raise self.error("expected a phase set or a phase index", num)
        return PhaseAP(v, int(num[1]), pos=pos)


def parse_formula(text: str, net: TrafficNetwork | None = None) -> Formula:
    """Parse ``text``; with a network, every atom is also resolved against it."""
    f = _Parser(text).parse()
    if net is not None:
        resolve(f, net, text)
    return f


def parse_atom(text: str) -> Formula:
    p = _Parser(text)
    f = p.primary()
    if p.peek()[0] != "end":
        raise p.error(f"unexpected token {p.peek()[1]!r}")
    return f


def resolve(f: Formula, net: TrafficNetwork, text: str | None = None) -> None:
    """Check that links, intersections, phases and thresholds exist in ``net``."""

    def fail(msg, atom):
        pos = atom.pos if atom.pos >= 0 else None
        raise FormulaError(msg, pos, text if pos is not None else None)

    for a in atoms(f):
        if isinstance(a, StateAP):
            if a.link not in net.by_id:
                fail(f"unknown link {a.link!r}", a)
            cap = net.by_id[a.link].capacity
            if not 0.0 <= a.threshold <= cap:
                fail(f"threshold {a.threshold:g} for link {a.link!r} outside [0, {cap:g}]", a)
        elif isinstance(a, SignalAP):
            if a.link not in net.by_id:
                fail(f"unknown link {a.link!r}", a)
        elif isinstance(a, PhaseAP):
            if a.intersection not in net.inter_by_id:
                fail(f"unknown intersection {a.intersection!r}", a)
            phases = net.inter_by_id[a.intersection].phases
            if isinstance(a.phase, int):
                if not 0 <= a.phase < len(phases):
                    fail(f"phase index {a.phase} out of range for intersection {a.intersection!r}", a)
            elif a.phase not in phases:
                for lid in a.phase:
                    if lid not in net.by_id:
                        fail(f"unknown link {lid!r}", a)
                fail(f"{sorted(a.phase)} is not a phase of intersection {a.intersection!r}", a)
        elif isinstance(a, Prop):
            fail(f"proposition {a.name!r} has no meaning on this network", a)
