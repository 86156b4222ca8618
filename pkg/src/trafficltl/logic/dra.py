"""Deterministic Rabin automata with one acceptance pair, and a compiler for a fragment.

Supported conjuncts (each ``b`` a boolean combination of atoms):

* ``G psi`` with ``psi`` built from atoms, boolean connectives and ``X``
  (bounded safety; covers ``G b``, ``G(b1 -> X b2)``, ``G(b1 & X b2 -> X X b3)``)
* ``G F b`` (recurrence)
* ``F G b`` (persistence)
* ``G(b1 -> F b2)`` (response)

Safety conjuncts keep a sliding window of recent letters and fall into an
absorbing sink on violation. Recurrence and response obligations are
discharged round-robin; states entered when a round completes form ``F``.
Persistence conjuncts mark states entered on a violating letter, which go
into ``E`` together with the sink.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

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
    atoms,
    conjuncts,
    is_boolean,
    next_depth,
    pretty,
    pretty_atom,
)

MAX_WINDOW_TABLE = 1 << 20


@dataclass(eq=False)
class RabinAutomaton:
    """Letters are bitmasks over ``aps``; acceptance is Fin(E) and Inf(F)."""

    aps: tuple[Atom, ...]
    delta: np.ndarray
    initial: int
    E: np.ndarray
    F: np.ndarray

    def __post_init__(self) -> None:
        self.aps = tuple(self.aps)
        self.delta = np.asarray(self.delta, dtype=np.int64)
        self.E = np.asarray(self.E, dtype=bool)
        self.F = np.asarray(self.F, dtype=bool)
        n = self.delta.shape[0]
        if self.delta.ndim != 2 or self.delta.shape[1] != 1 << len(self.aps):
            raise ValueError("transition table must have one column per valuation of the propositions")
        if n == 0 or np.any(self.delta < 0) or np.any(self.delta >= n):
            raise ValueError("transition table must be total with targets in range")
        if not 0 <= self.initial < n:
            raise ValueError("initial state out of range")
        if self.E.shape != (n,) or self.F.shape != (n,):
            raise ValueError("acceptance sets must be indexed by state")

    @property
    def n_states(self) -> int:
        return self.delta.shape[0]

    @property
    def n_letters(self) -> int:
        return self.delta.shape[1]

    def step(self, a: int, letter: int) -> int:
        return int(self.delta[a, letter])

    def letter(self, valuation) -> int:
        """Bitmask for an int, a collection of true atoms (or their texts), or an atom-to-bool mapping."""
        if isinstance(valuation, (int, np.integer)):
            return int(valuation)
        names = {pretty_atom(a): i for i, a in enumerate(self.aps)}
        index = {a: i for i, a in enumerate(self.aps)}

        def bit(key):
            i = index.get(key) if isinstance(key, Atom) else names.get(key)
            if i is None:
                raise KeyError(f"unknown proposition {key!r}")
            return i

        if isinstance(valuation, Mapping):
            return sum(1 << bit(k) for k, v in valuation.items() if v)
        return sum(1 << bit(k) for k in valuation)

    def run(self, word: Iterable) -> list[int]:
        a = self.initial
        out = [a]
        for w in word:
            a = int(self.delta[a, self.letter(w)])
            out.append(a)
        return out


def accepts_lasso(dra: RabinAutomaton, prefix: Sequence, cycle: Sequence) -> bool:
    """Acceptance of ``prefix . cycle^omega``, by pumping until a (state, position) pair repeats."""
    if len(cycle) == 0:
        raise ValueError("lasso cycle must be nonempty")
    cyc = [dra.letter(w) for w in cycle]
    a = dra.initial
    for w in prefix:
        a = int(dra.delta[a, dra.letter(w)])
    seen: dict[tuple[int, int], int] = {}
    visited: list[int] = []
    pos = 0
    while (a, pos) not in seen:
        seen[(a, pos)] = len(visited)
        a = int(dra.delta[a, cyc[pos]])
        visited.append(a)
        pos = (pos + 1) % len(cyc)
    periodic = visited[seen[(a, pos)]:]
    return not dra.E[periodic].any() and bool(dra.F[periodic].any())


# -- fragment classification ----------------------------------------------

@dataclass(frozen=True)
class Conjunct:
    kind: str  # "safety", "recurrence", "persistence", "response"
    formula: Formula
    parts: tuple
    depth: int = 0


def classify(f: Formula) -> list[Conjunct]:
    """Split ``f`` into fragment conjuncts, or raise naming the first unsupported one."""
    out = []
    for c in conjuncts(f):
        if isinstance(c, Const) and c.value:
            continue
        if isinstance(c, Globally):
            body = c.arg
            depth = next_depth(body)
            if depth is not None:
                out.append(Conjunct("safety", c, (body,), depth))
                continue
            if isinstance(body, Finally) and is_boolean(body.arg):
                out.append(Conjunct("recurrence", c, (body.arg,)))
                continue
            if isinstance(body, Implies) and is_boolean(body.left) and isinstance(body.right, Finally) \
                    and is_boolean(body.right.arg):
                out.append(Conjunct("response", c, (body.left, body.right.arg)))
                continue
        if isinstance(c, Finally) and isinstance(c.arg, Globally) and is_boolean(c.arg.arg):
            out.append(Conjunct("persistence", c, (c.arg.arg,)))
            continue
        raise FormulaError(f"subformula outside the supported fragment: {pretty(c)}")
    return out


# -- vectorised evaluation of boolean / bounded formulas -------------------

def eval_bounded(f: Formula, words: np.ndarray, offset: int, index: dict[Atom, int]) -> np.ndarray:
    """Truth of a next-bounded formula at ``offset`` over columns of ``words`` (shape (k+1, M))."""
    if isinstance(f, Const):
        return np.full(words.shape[1], f.value)
    if isinstance(f, Atom):
        return (words[offset] >> index[f]) & 1 == 1
    if isinstance(f, Not):
        return ~eval_bounded(f.arg, words, offset, index)
    if isinstance(f, And):
        return eval_bounded(f.left, words, offset, index) & eval_bounded(f.right, words, offset, index)
    if isinstance(f, Or):
        return eval_bounded(f.left, words, offset, index) | eval_bounded(f.right, words, offset, index)
    if isinstance(f, Implies):
        return ~eval_bounded(f.left, words, offset, index) | eval_bounded(f.right, words, offset, index)
    if isinstance(f, Next):
        return eval_bounded(f.arg, words, offset + 1, index)
    raise FormulaError(f"not a bounded formula: {pretty(f)}")


def letter_table(b: Formula, aps: Sequence[Atom]) -> np.ndarray:
    """Truth value of boolean formula ``b`` for every letter over ``aps``."""
    letters = np.arange(1 << len(aps), dtype=np.int64)[None, :]
    return eval_bounded(b, letters, 0, {a: i for i, a in enumerate(aps)})


class _Window:
    """Sliding-window monitor for one bounded safety conjunct."""

    def __init__(self, conj: Conjunct, aps: Sequence[Atom]):
        psi = conj.parts[0]
        local = atoms(psi)
        self.k = conj.depth
        self.width = len(local)
        if (1 << self.width) ** (self.k + 1) > MAX_WINDOW_TABLE:
            raise FormulaError(f"safety window too large to tabulate: {pretty(conj.formula)}")
        gidx = [aps.index(a) for a in local]
        letters = np.arange(1 << len(aps), dtype=np.int64)
        self.project = np.zeros(len(letters), dtype=np.int64)
        for j, g in enumerate(gidx):
            self.project |= ((letters >> g) & 1) << j
        m = (1 << self.width) ** (self.k + 1)
        codes = np.arange(m, dtype=np.int64)
        words = np.stack([(codes >> (self.width * i)) & ((1 << self.width) - 1) for i in range(self.k + 1)])
        self.table = eval_bounded(psi, words, 0, {a: j for j, a in enumerate(local)})

    def step(self, window: tuple, letter: int):
        w = window + (int(self.project[letter]),)
        if len(w) < self.k + 1:
            return w, True
        code = sum(v << (self.width * i) for i, v in enumerate(w))
        return w[1:], bool(self.table[code])


def compile_to_dra(f: Formula, aps: Sequence[Atom] | None = None, minimize: bool = True) -> RabinAutomaton:
    """One-pair DRA for a conjunction of fragment patterns.

    ``aps`` fixes the letter bit order; it defaults to the formula's atoms in
    order of first occurrence and may list extra atoms.
    """
    parts = classify(f)
    aps = list(atoms(f) if aps is None else aps)
    missing = [a for a in atoms(f) if a not in aps]
    if missing:
        raise FormulaError(f"propositions missing from the letter order: {[pretty_atom(a) for a in missing]}")
    windows = [_Window(c, aps) for c in parts if c.kind == "safety"]
    live = [c for c in parts if c.kind in ("recurrence", "response")]
    responses = [c for c in parts if c.kind == "response"]
    persist = [c for c in parts if c.kind == "persistence"]

    trig = [letter_table(c.parts[0], aps) for c in responses]
    answer = [letter_table(c.parts[1], aps) for c in responses]
    recur = {id(c): letter_table(c.parts[0], aps) for c in live if c.kind == "recurrence"}
    resp_pos = {id(c): i for i, c in enumerate(responses)}
    stable = np.ones(1 << len(aps), dtype=bool)
    for c in persist:
        stable &= letter_table(c.parts[0], aps)
    m = len(live)

    SINK = "sink"
    init = (tuple(() for _ in windows), tuple(False for _ in responses), 0, False, False)

    def succ(state, letter):
        wins, pend, _, _, _ = state
        new_wins = []
        for mon, w in zip(windows, wins):
            w2, ok = mon.step(w, letter)
            if not ok:
                return SINK
            new_wins.append(w2)
        new_pend = tuple(
            bool(not answer[i][letter] and (trig[i][letter] or pend[i])) for i in range(len(responses))
        )
        counter, flag = state[2], False
        for _ in range(m):
            c = live[counter]
            met = recur[id(c)][letter] if c.kind == "recurrence" else not new_pend[resp_pos[id(c)]]
            if not met:
                break
            counter += 1
            if counter == m:
                counter, flag = 0, True
                break
        bad = bool(persist) and not stable[letter]
        return (tuple(new_wins), new_pend, counter, flag, bad)

    ids = {init: 0}
    order = [init]
    rows = []
    i = 0
    while i < len(order):
        st = order[i]
        row = []
        for letter in range(1 << len(aps)):
            nxt = SINK if st == SINK else succ(st, letter)
            if nxt not in ids:
                ids[nxt] = len(order)
                order.append(nxt)
            row.append(ids[nxt])
        rows.append(row)
        i += 1
    delta = np.array(rows, dtype=np.int64)
    sink = np.array([s == SINK for s in order])
    bad = np.array([s != SINK and s[4] for s in order])
    if m > 0:
        F = np.array([s != SINK and s[3] for s in order])
    else:
        F = ~sink & ~bad
    dra = RabinAutomaton(tuple(aps), delta, 0, sink | bad, F)
    return minimize_dra(dra) if minimize else dra


def minimize_dra(dra: RabinAutomaton) -> RabinAutomaton:
    """Quotient by the coarsest bisimulation that respects membership in E and F."""
    cls = np.unique(np.stack([dra.E, dra.F], axis=1), axis=0, return_inverse=True)[1].ravel()
    while True:
        sig = np.concatenate([cls[:, None], cls[dra.delta]], axis=1)
        new = np.unique(sig, axis=0, return_inverse=True)[1].ravel()
        if new.max() == cls.max():
            cls = new
            break
        cls = new
    # renumber classes in breadth-first order from the initial state
    order = {int(cls[dra.initial]): 0}
    queue = [dra.initial]
    rep = {int(cls[dra.initial]): dra.initial}
    while queue:
        s = queue.pop(0)
        for t in dra.delta[s]:
            c = int(cls[t])
            if c not in order:
                order[c] = len(order)
                rep[c] = int(t)
                queue.append(int(t))
    k = len(order)
    reps = [0] * k
    for c, j in order.items():
        reps[j] = rep[c]
    remap = np.full(cls.max() + 1, -1, dtype=np.int64)
    for c, j in order.items():
        remap[c] = j
    delta = remap[cls[dra.delta[reps]]]
    return RabinAutomaton(dra.aps, delta, 0, dra.E[reps], dra.F[reps])
