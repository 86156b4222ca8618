"""Product Rabin games, their solution, and finite-memory controllers.

Game nodes pair an abstraction state with a Rabin automaton state. From a
node ``(q, a)`` the controller picks a signal ``s``; the automaton reads the
letter of ``(q, s)`` and moves to ``a'``; the environment then picks any
successor ``q'`` of ``(q, s)``, giving node ``(q', a')``. The single Rabin
pair is solved as a parity game with priorities 3 on E, 2 on F minus E and
1 elsewhere (the controller wants the top recurring priority to be even).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .abstraction import TransitionSystem
from .logic.dra import RabinAutomaton
from .logic.formula import pretty_atom
from .logic.labeling import Labeling

EVEN, ODD = 0, 1


class SynthesisError(RuntimeError):
    """No winning strategy from some required initial condition."""

    def __init__(self, message: str, uncovered: Sequence[tuple[int, int]] = ()):
        self.uncovered = list(uncovered)
        if self.uncovered:
            shown = ", ".join(f"(q={q}, sigma={s})" for q, s in self.uncovered[:20])
            more = f" and {len(self.uncovered) - 20} more" if len(self.uncovered) > 20 else ""
            message = f"{message}; uncovered (cell, last signal) pairs: {shown}{more}"
        super().__init__(message)


class ControllerError(RuntimeError):
    pass


def _gather(indptr: np.ndarray, indices: np.ndarray, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated CSR rows and the per-row counts."""
    starts = indptr[rows]
    counts = indptr[rows + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return indices[:0], counts
    offs = np.repeat(starts - np.concatenate([[0], np.cumsum(counts)[:-1]]), counts)
    return indices[offs + np.arange(total)], counts


@dataclass(eq=False)
class ProductGame:
    """Bipartite arena: controller nodes ``n`` and environment nodes ``n * n_actions + s``."""

    n_actions: int
    env_indptr: np.ndarray
    env_indices: np.ndarray
    E: np.ndarray
    F: np.ndarray
    node_state: np.ndarray | None = None
    node_dra: np.ndarray | None = None
    ts: TransitionSystem | None = None
    dra: RabinAutomaton | None = None
    letters: np.ndarray | None = None
    _lookup: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.E = np.asarray(self.E, dtype=bool)
        self.F = np.asarray(self.F, dtype=bool)
        self.env_indptr = np.asarray(self.env_indptr, dtype=np.int64)
        self.env_indices = np.asarray(self.env_indices, dtype=np.int64)
        if len(self.env_indptr) != self.n_nodes * self.n_actions + 1:
            raise ValueError("environment index pointer has the wrong length")
        if np.any(np.diff(self.env_indptr) <= 0):
            raise ValueError("every environment node needs at least one successor")

    @property
    def n_nodes(self) -> int:
        return len(self.E)

    def priorities(self) -> np.ndarray:
        return np.where(self.E, 3, np.where(self.F, 2, 1))

    def env_successors(self, n: int, s: int) -> np.ndarray:
        m = n * self.n_actions + s
        return self.env_indices[self.env_indptr[m]:self.env_indptr[m + 1]]

    def node(self, state: int, a: int) -> int:
        """Node id of ``(state, a)``, or -1 if it was not built."""
        return int(self._lookup[state * self.dra.n_states + a])

    def initial_nodes(self, sigma_init: int) -> tuple[np.ndarray, list[tuple[int, int]]]:
        """Required initial nodes for ``sigma_init``, with their (cell, sigma) keys."""
        states, a = _initial_keys(self.ts, self.dra, self.letters, sigma_init)
        ids = self._lookup[states * self.dra.n_states + a]
        cells = self.ts.cell_of[states]
        return ids, [(int(q), sigma_init) for q in cells]


def _initial_keys(ts, dra, letters, sigma):
    if ts.augmented:
        states = np.flatnonzero(ts.last_signal_of == sigma)
    else:
        states = np.arange(ts.n_states)
    a = dra.delta[dra.initial, letters[ts.cell_of[states], sigma]]
    return states, a


def build_product_game(
    ts: TransitionSystem,
    dra: RabinAutomaton,
    labeling: Labeling,
    sigma_init: int | Sequence[int] | None = None,
    full: bool = False,
) -> ProductGame:
    """Product of ``ts`` with ``dra``.

    By default only nodes reachable from the initial nodes of the given
    ``sigma_init`` values (all signals if None) are built; ``full=True``
    builds every (state, automaton state) pair.
    """
    if tuple(labeling.aps) != tuple(dra.aps):
        raise ValueError(
            "labeling and automaton disagree on propositions: "
            f"{[pretty_atom(a) for a in labeling.aps]} vs {[pretty_atom(a) for a in dra.aps]}"
        )
    letters = labeling.letters()
    ns = ts.n_actions
    if letters.shape[1] != ns:
        raise ValueError("labeling and transition system disagree on the number of signals")
    na = dra.n_states
    indptr, indices = ts.indptr, ts.indices
    succ_counts = np.diff(indptr)
    lookup = np.full(ts.n_states * na, -1, dtype=np.int64)

    if full:
        frontier = np.arange(ts.n_states * na, dtype=np.int64)
    else:
        sigmas = range(ns) if sigma_init is None else np.atleast_1d(sigma_init)
        seeds = []
        for sg in sigmas:
            st, a = _initial_keys(ts, dra, letters, int(sg))
            seeds.append(st * na + a)
        frontier = np.unique(np.concatenate(seeds))

    keys_all, edge_chunks, count_chunks = [], [], []
    n_nodes = 0
    while len(frontier):
        lookup[frontier] = np.arange(n_nodes, n_nodes + len(frontier))
        n_nodes += len(frontier)
        keys_all.append(frontier)
        st, a = frontier // na, frontier % na
        a2 = dra.delta[a[:, None], letters[ts.cell_of[st]][:, :]]  # (f, ns)
        pairs = (st[:, None] * ns + np.arange(ns)).ravel()
        succ, counts = _gather(indptr, indices, pairs)
        keys = succ * na + np.repeat(a2.ravel(), counts)
        edge_chunks.append(keys)
        count_chunks.append(counts)
        if full:
            break
        new = keys[lookup[keys] < 0]
        frontier = np.unique(new)

    keys_all = np.concatenate(keys_all)
    env_indices = lookup[np.concatenate(edge_chunks)]
    env_indptr = np.concatenate([[0], np.cumsum(np.concatenate(count_chunks))])
    node_state, node_dra = keys_all // na, keys_all % na
    return ProductGame(
        ns,
        env_indptr,
        env_indices,
        dra.E[node_dra],
        dra.F[node_dra],
        node_state,
        node_dra,
        ts,
        dra,
        letters,
        lookup,
    )


# -- solver -------------------------------------------------------------------

class _Arena:
    def __init__(self, game: ProductGame):
        self.N = game.n_nodes
        self.S = game.n_actions
        self.M = self.N * self.S
        self.ptr = game.env_indptr
        self.idx = game.env_indices
        order = np.argsort(self.idx, kind="stable")
        src = np.repeat(np.arange(self.M), np.diff(self.ptr))
        self.rptr = np.concatenate([[0], np.cumsum(np.bincount(self.idx, minlength=self.N))])
        self.ridx = src[order]
        self.prio = game.priorities()

    def attractor(self, player, tN, tM, aliveN, aliveM):
        """Attractor for ``player`` to targets within the alive subgame; returns (N mask, M mask, strategy)."""
        N, S = self.N, self.S
        inN = tN & aliveN
        inM = tM & aliveM
        strat = np.full(N, -1, dtype=np.int64)
        if player == EVEN:
            # env nodes join once all alive successors are in; owners join via any action
            alive_succ = aliveN[self.idx].astype(np.int64)
            remaining = np.add.reduceat(alive_succ, self.ptr[:-1])
        else:
            remaining_actions = aliveM.reshape(N, S).sum(axis=1)
        frontN = np.flatnonzero(inN)
        frontM = np.flatnonzero(inM)
        first = True
        while len(frontN) or len(frontM):
            newM = np.empty(0, dtype=np.int64)
            if len(frontN):
                preds, _ = _gather(self.rptr, self.ridx, frontN)
                preds = preds[aliveM[preds] & ~inM[preds]]
                if len(preds):
                    u, c = np.unique(preds, return_counts=True)
                    if player == EVEN:
                        remaining[u] -= c
                        newM = u[remaining[u] == 0]
                    else:
                        newM = u
                    inM[newM] = True
            if first:
                newM = np.union1d(newM, frontM)
                first = False
            newN = np.empty(0, dtype=np.int64)
            if len(newM):
                owners = newM // S
                keep = aliveN[owners] & ~inN[owners]
                owners, ms = owners[keep], newM[keep]
                if player == EVEN:
                    newN, first_idx = np.unique(owners, return_index=True)
                    strat[newN] = ms[first_idx] % S
                else:
                    u, c = np.unique(owners, return_counts=True)
                    remaining_actions[u] -= c
                    newN = u[remaining_actions[u] == 0]
                inN[newN] = True
            frontN = newN
            frontM = np.empty(0, dtype=np.int64)
        return inN, inM, strat

    def solve(self, aliveN, aliveM):
        N, S = self.N, self.S
        winN = [np.zeros(N, bool), np.zeros(N, bool)]
        winM = [np.zeros(self.M, bool), np.zeros(self.M, bool)]
        strat = np.full(N, -1, dtype=np.int64)
        aliveN = aliveN.copy()
        aliveM = aliveM.copy()
        while aliveN.any():
            d = int(self.prio[aliveN].max())
            p = d % 2
            U = aliveN & (self.prio == d)
            AN, AM, astrat = self.attractor(p, U, np.zeros(self.M, bool), aliveN, aliveM)
            (wN, wM, ws) = self.solve(aliveN & ~AN, aliveM & ~AM)
            if not wN[1 - p].any():
                winN[p] |= aliveN
                winM[p] |= aliveM
                if p == EVEN:
                    sub = aliveN & ~AN
                    strat[sub] = ws[sub]
                    rest = AN & ~U
                    strat[rest] = astrat[rest]
                    u = np.flatnonzero(U)
                    ok = aliveM.reshape(N, S)[u]
                    strat[u] = np.argmax(ok, axis=1)
                break
            q = 1 - p
            BN, BM, bstrat = self.attractor(q, wN[q], wM[q], aliveN, aliveM)
            winN[q] |= BN
            winM[q] |= BM
            if q == EVEN:
                strat[wN[q]] = ws[wN[q]]
                rest = BN & ~wN[q]
                strat[rest] = bstrat[rest]
            aliveN &= ~BN
            aliveM &= ~BM
        return winN, winM, strat


def solve_one_pair_rabin(game: ProductGame) -> tuple[np.ndarray, np.ndarray]:
    """Winning controller nodes and a positional strategy (action per node, -1 where losing)."""
    arena = _Arena(game)
    winN, _, strat = arena.solve(np.ones(arena.N, bool), np.ones(arena.M, bool))
    win = winN[EVEN]
    strat = np.where(win, strat, -1)
    return win, strat


# -- controllers --------------------------------------------------------------

@dataclass(eq=False)
class Controller:
    """Lookup tables indexed by (automaton state, abstraction state); memory is (automaton state, last signal).

    For a plain abstraction the table does not depend on the last signal, so
    it is stored per cell and applies to every last signal.
    """

    dra: RabinAutomaton
    letters: np.ndarray
    table: np.ndarray
    augmented: bool
    sigma_init: int
    partition: dict | None = None

    @property
    def n_signals(self) -> int:
        return self.letters.shape[1]

    def initial_memory(self, cell: int) -> tuple[int, int]:
        return int(self.dra.delta[self.dra.initial, self.letters[cell, self.sigma_init]]), self.sigma_init

    def _state(self, cell: int, sigma: int) -> int:
        return cell * self.n_signals + sigma if self.augmented else cell

    def covers(self, cell: int, memory: tuple[int, int]) -> bool:
        a, sigma = memory
        return bool(self.table[a, self._state(cell, sigma)] >= 0)

    def to_dict(self) -> dict:
        return {
            "aps": [pretty_atom(a) for a in self.dra.aps],
            "memory_states": self.dra.n_states,
            "initial_memory": self.dra.initial,
            "delta": self.dra.delta.tolist(),
            "E": np.flatnonzero(self.dra.E).tolist(),
            "F": np.flatnonzero(self.dra.F).tolist(),
            "letters": self.letters.tolist(),
            "table_key": "cell,last_signal" if self.augmented else "cell",
            "table": self.table.tolist(),
            "sigma_init": self.sigma_init,
            "partition": self.partition,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, data: dict) -> "Controller":
        from .logic.hoa import _ap_atom

        n = data["memory_states"]
        E = np.zeros(n, bool)
        E[data["E"]] = True
        F = np.zeros(n, bool)
        F[data["F"]] = True
        dra = RabinAutomaton(tuple(_ap_atom(a) for a in data["aps"]), np.array(data["delta"]),
                             data["initial_memory"], E, F)
        return cls(
            dra,
            np.array(data["letters"], dtype=np.int64),
            np.array(data["table"], dtype=np.int64),
            data["table_key"] == "cell,last_signal",
            int(data["sigma_init"]),
            data.get("partition"),
        )

    @classmethod
    def load(cls, path) -> "Controller":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def controller_step(controller: Controller, cell: int, memory: tuple[int, int] | None = None):
    """Signal for ``cell`` and the updated memory; ``memory=None`` starts a run."""
    if memory is None:
        memory = controller.initial_memory(cell)
    a, sigma = memory
    s = int(controller.table[a, controller._state(cell, sigma)])
    if s < 0:
        raise ControllerError(f"no control action for cell {cell} with memory {memory}")
    a2 = int(controller.dra.delta[a, controller.letters[cell, s]])
    return s, (a2, s)


def extract_controller(
    game: ProductGame,
    win: np.ndarray,
    strategy: np.ndarray,
    sigma_init: int = 0,
    required_initials: np.ndarray | None = None,
) -> Controller:
    """Lookup-table controller from a solved game; fails if a required initial node is losing."""
    if required_initials is None:
        required_initials, keys = game.initial_nodes(sigma_init)
    else:
        keys = [(int(game.ts.cell_of[game.node_state[n]]), sigma_init) for n in required_initials]
    required_initials = np.asarray(required_initials)
    bad = [keys[i] for i, n in enumerate(required_initials) if n < 0 or not win[n]]
    if bad:
        raise SynthesisError("specification not realizable from every initial cell", bad)
    table = np.full((game.dra.n_states, game.ts.n_states), -1, dtype=np.int64)
    nodes = np.flatnonzero(win)
    table[game.node_dra[nodes], game.node_state[nodes]] = strategy[nodes]
    return Controller(game.dra, game.letters, table, game.ts.augmented, sigma_init)


def coverage(game: ProductGame, win: np.ndarray) -> dict[int, int]:
    """Number of cells winning from each initial signal."""
    out = {}
    for sg in range(game.n_actions):
        ids, _ = game.initial_nodes(sg)
        out[sg] = int(np.sum((ids >= 0) & win[np.maximum(ids, 0)]))
    return out
