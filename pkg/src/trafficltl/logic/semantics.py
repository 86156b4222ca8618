"""Exact LTL evaluation on ultimately periodic words.

Letters are integer bitmasks over an ordered list of atoms. A lasso
``prefix . cycle^omega`` has ``n = len(prefix) + len(cycle)`` distinct
positions; the successor of the last one is ``len(prefix)``.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .formula import (
    And,
    Atom,
    Const,
    Finally,
    Formula,
    Globally,
    Implies,
    Next,
    Not,
    Or,
    Until,
)


def _truth(f: Formula, word: np.ndarray, succ: np.ndarray, index: dict[Atom, int]) -> np.ndarray:
    n = len(word)
    if isinstance(f, Const):
        return np.full(n, f.value)
    if isinstance(f, Atom):
        return (word >> index[f]) & 1 == 1
    if isinstance(f, Not):
        return ~_truth(f.arg, word, succ, index)
    if isinstance(f, And):
        return _truth(f.left, word, succ, index) & _truth(f.right, word, succ, index)
    if isinstance(f, Or):
        return _truth(f.left, word, succ, index) | _truth(f.right, word, succ, index)
    if isinstance(f, Implies):
        return ~_truth(f.left, word, succ, index) | _truth(f.right, word, succ, index)
    if isinstance(f, Next):
        return _truth(f.arg, word, succ, index)[succ]
    if isinstance(f, (Until, Finally, Globally)):
        if isinstance(f, Until):
            hold, goal = _truth(f.left, word, succ, index), _truth(f.right, word, succ, index)
        elif isinstance(f, Finally):
            hold, goal = np.ones(n, bool), _truth(f.arg, word, succ, index)
        else:
            hold, goal = np.ones(n, bool), ~_truth(f.arg, word, succ, index)
        # least fixpoint of r = goal | (hold & r[succ]); n rounds suffice
        r = goal.copy()
        for _ in range(n):
            nr = goal | (hold & r[succ])
            if np.array_equal(nr, r):
                break
            r = nr
        return ~r if isinstance(f, Globally) else r
    raise TypeError(f"unsupported formula node {type(f).__name__}")


def holds_on_lasso(f: Formula, prefix: Sequence[int], cycle: Sequence[int], aps: Sequence[Atom]) -> bool:
    """Whether ``prefix . cycle^omega`` satisfies ``f``; letter bit ``i`` is ``aps[i]``."""
    if len(cycle) == 0:
        raise ValueError("lasso cycle must be nonempty")
    word = np.asarray(list(prefix) + list(cycle), dtype=np.int64)
    n = len(word)
    succ = np.arange(1, n + 1)
    succ[-1] = len(prefix)
    index = {a: i for i, a in enumerate(aps)}
    return bool(_truth(f, word, succ, index)[0])
