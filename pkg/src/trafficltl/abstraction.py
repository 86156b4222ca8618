"""Finite transition systems induced by corner-point reach bounds.

``(q, s, q')`` is a transition iff cell ``q'`` meets the over-approximated
image of the closure of cell ``q`` under signal ``s``. For gridded partitions
the relation is first computed in compressed form (per disturbance box, a
product of per-link interval index ranges) and expanded into sorted
successor lists on demand.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .network import TrafficNetwork
from .partition import (
    GeneralPartition,
    GriddedPartition,
    PartitionError,
    coarsest_grid_refinement,
)
from .reach import reach_bounds, traffic_signature

REFINEMENT_LIMIT = 2_000_000


@dataclass
class BuildReport:
    cells: int
    signals: int
    disturbance_boxes: int
    evaluations: int
    edge_seconds: float
    expand_seconds: float = 0.0
    edges: int | None = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


class TransitionSystem:
    """Nondeterministic finite transition system with per-(state, action) successor lists.

    ``cell_of[state]`` gives the partition cell of a state; for augmented
    systems ``last_signal_of[state]`` is the signal applied on entry.
    """

    def __init__(
        self,
        n_states: int,
        n_actions: int,
        indptr: np.ndarray | None = None,
        indices: np.ndarray | None = None,
        cell_of: np.ndarray | None = None,
        last_signal_of: np.ndarray | None = None,
        ranges: tuple[np.ndarray, np.ndarray] | None = None,
        partition: GriddedPartition | None = None,
    ):
        self.n_states = n_states
        self.n_actions = n_actions
        self._indptr = indptr
        self._indices = indices
        self.cell_of = np.arange(n_states) if cell_of is None else np.asarray(cell_of)
        self.last_signal_of = last_signal_of
        self.ranges = ranges
        self.partition = partition
        self._reverse = None

    @property
    def augmented(self) -> bool:
        return self.last_signal_of is not None

    @property
    def n_cells(self) -> int:
        return int(self.cell_of.max()) + 1 if self.n_states else 0

    def _ensure_expanded(self) -> None:
        if self._indptr is not None:
            return
        jlo, jhi = self.ranges
        grid = self.partition
        counts = np.empty(self.n_states * self.n_actions, dtype=np.int64)
        chunks = []
        for q in range(self.n_states):
            for s in range(self.n_actions):
                parts = [grid.expand_ranges(jlo[q, s, i], jhi[q, s, i]) for i in range(jlo.shape[2])]
                succ = parts[0] if len(parts) == 1 else np.unique(np.concatenate(parts))
                counts[q * self.n_actions + s] = len(succ)
                chunks.append(succ)
        self._indptr = np.concatenate([[0], np.cumsum(counts)])
        self._indices = np.concatenate(chunks).astype(np.int64)

    @property
    def indptr(self) -> np.ndarray:
        self._ensure_expanded()
        return self._indptr

    @property
    def indices(self) -> np.ndarray:
        self._ensure_expanded()
        return self._indices

    def successors(self, q: int, s: int) -> np.ndarray:
        p = q * self.n_actions + s
        return self.indices[self.indptr[p]:self.indptr[p + 1]]

    def has_transition(self, q: int, s: int, q2: int) -> bool:
        if self._indptr is None and self.ranges is not None:
            jlo, jhi = self.ranges
            multi = np.asarray(self.partition.decode(q2))
            return bool(np.any(np.all((jlo[q, s] <= multi) & (multi <= jhi[q, s]), axis=1)))
        succ = self.successors(q, s)
        i = np.searchsorted(succ, q2)
        return bool(i < len(succ) and succ[i] == q2)

    @property
    def n_edges(self) -> int:
        return int(self.indptr[-1])

    def predecessors(self, q2: int) -> list[tuple[int, int]]:
        """``(state, action)`` pairs with a transition into ``q2``."""
        if self._reverse is None:
            pair = np.repeat(np.arange(self.n_states * self.n_actions), np.diff(self.indptr))
            order = np.argsort(self.indices, kind="stable")
            rptr = np.concatenate([[0], np.cumsum(np.bincount(self.indices, minlength=self.n_states))])
            self._reverse = (rptr, pair[order])
        rptr, pairs = self._reverse
        sel = pairs[rptr[q2]:rptr[q2 + 1]]
        return [(int(p // self.n_actions), int(p % self.n_actions)) for p in sel]

    def is_total(self) -> bool:
        return bool(np.all(np.diff(self.indptr) > 0))

    def edges(self):
        ptr, idx = self.indptr, self.indices
        for p in range(self.n_states * self.n_actions):
            q, s = divmod(p, self.n_actions)
            for q2 in idx[ptr[p]:ptr[p + 1]]:
                yield q, s, int(q2)

    # -- export -----------------------------------------------------------

    def to_dict(self) -> dict:
        succ = []
        ptr, idx = self.indptr, self.indices
        for p in range(self.n_states * self.n_actions):
            succ.append(idx[ptr[p]:ptr[p + 1]].tolist())
        data = {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "cell_of": self.cell_of.tolist(),
            "successors": succ,
        }
        if self.augmented:
            data["last_signal_of"] = self.last_signal_of.tolist()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "TransitionSystem":
        succ = data["successors"]
        counts = [len(x) for x in succ]
        indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        indices = np.array([q for x in succ for q in x], dtype=np.int64)
        last = data.get("last_signal_of")
        return cls(
            data["n_states"],
            data["n_actions"],
            indptr,
            indices,
            np.asarray(data["cell_of"]),
            None if last is None else np.asarray(last),
        )

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    def to_dot(self, state_names=None, action_names=None) -> str:
        sname = state_names or (lambda q: f"q{q}")
        aname = action_names or (lambda s: f"s{s}")
        lines = ["digraph abstraction {", "  rankdir=LR;"]
        for q in range(self.n_states):
            lines.append(f'  {q} [label="{sname(q)}"];')
        labels: dict[tuple[int, int], list[str]] = {}
        for q, s, q2 in self.edges():
            labels.setdefault((q, q2), []).append(aname(s))
        for (q, q2), acts in labels.items():
            lines.append(f'  {q} -> {q2} [label="{",".join(acts)}"];')
        lines.append("}")
        return "\n".join(lines)


def _gridded_ranges(net, grid, lo, hi, sig, s):
    y_lo, y_hi = reach_bounds(net, lo, hi, s, sig)
    return grid.index_ranges(y_lo, y_hi)


def build_transition_system(
    net: TrafficNetwork,
    partition: GriddedPartition | GeneralPartition,
    signals=None,
    workers: int = 1,
    expand: bool = True,
    report: dict | None = None,
) -> TransitionSystem:
    """Abstraction of ``net`` over ``partition``.

    ``workers`` fans the per-signal work out over threads; the result does
    not depend on it. With ``expand=False`` a gridded abstraction keeps only
    the compressed index-range form until successor lists are requested.
    """
    signals = list(range(len(net.signals))) if signals is None else [getattr(s, "index", s) for s in signals]
    sig = traffic_signature(net)
    lo, hi, _, _ = partition.cell_arrays()
    nq, ns, nd, nl = len(partition), len(signals), len(net.disturbance), len(net.links)
    evals_before = net.evaluations
    t0 = time.perf_counter()

    if isinstance(partition, GriddedPartition):
        jlo = np.empty((nq, ns, nd, nl), dtype=np.int64)
        jhi = np.empty_like(jlo)

        def work(k):
            return k, _gridded_ranges(net, partition, lo, hi, sig, signals[k])

        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            for k, (a, b) in pool.map(work, range(ns)):
                jlo[:, k] = a
                jhi[:, k] = b
        ts = TransitionSystem(nq, ns, ranges=(jlo, jhi), partition=partition)
        edge_seconds = time.perf_counter() - t0
    else:
        ts = _build_general(net, partition, signals, sig, workers)
        edge_seconds = time.perf_counter() - t0

    t1 = time.perf_counter()
    if expand:
        ts._ensure_expanded()
    rep = BuildReport(
        cells=nq,
        signals=ns,
        disturbance_boxes=nd,
        evaluations=net.evaluations - evals_before,
        edge_seconds=edge_seconds,
        expand_seconds=time.perf_counter() - t1,
        edges=ts.n_edges if expand else None,
    )
    ts.report = rep
    if report is not None:
        report.update(rep.as_dict())
    return ts


def _build_general(net, partition: GeneralPartition, signals, sig, workers) -> TransitionSystem:
    lo, hi, _, _ = partition.cell_arrays()
    nq, ns = len(partition), len(signals)
    grid = mapping = None
    refined_size = 1
    for l in range(partition.dim):
        refined_size *= len(np.unique(np.concatenate([[0.0], partition.lower[:, l], partition.upper[:, l]])))
    if refined_size <= REFINEMENT_LIMIT:
        try:
            grid, mapping = coarsest_grid_refinement(partition)
        except PartitionError:
            grid = None

    def work(k):
        y_lo, y_hi = reach_bounds(net, lo, hi, signals[k], sig)
        out = []
        for q in range(nq):
            found = set()
            for i in range(y_lo.shape[1]):
                if grid is not None:
                    a, b = grid.index_ranges(y_lo[q, i], y_hi[q, i])
                    found.update(mapping[grid.expand_ranges(a, b)].tolist())
                else:
                    a = np.where(partition.strict_lower, partition.lower < y_hi[q, i], partition.lower <= y_hi[q, i])
                    b = np.where(partition.strict_upper, y_lo[q, i] < partition.upper, y_lo[q, i] <= partition.upper)
                    found.update(np.flatnonzero(np.all(a & b, axis=1)).tolist())
            out.append(sorted(found))
        return k, out

    table: list[list[list[int]]] = [None] * ns
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for k, out in pool.map(work, range(ns)):
            table[k] = out
    counts = np.array([len(table[s][q]) for q in range(nq) for s in range(ns)], dtype=np.int64)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    indices = np.array([x for q in range(nq) for s in range(ns) for x in table[s][q]], dtype=np.int64)
    return TransitionSystem(nq, ns, indptr, indices)


def augment(ts: TransitionSystem, n_signals: int | None = None) -> TransitionSystem:
    """Pair each cell with the last applied signal; state ``(q, sigma)`` is ``q * |S| + sigma``."""
    if ts.augmented:
        raise ValueError("transition system is already augmented")
    ns = ts.n_actions if n_signals is None else n_signals
    if ns != ts.n_actions:
        raise ValueError("signal count does not match the transition system's actions")
    nq = ts.n_states
    base_counts = np.diff(ts.indptr)  # indexed by q * ns + s
    counts = np.tile(base_counts.reshape(nq, 1, ns), (1, ns, 1)).ravel()
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    chunks = []
    for q in range(nq):
        row = []
        for s in range(ns):
            row.append(ts.successors(q, s) * ns + s)
        row = np.concatenate(row)
        chunks.extend([row] * ns)
    indices = np.concatenate(chunks).astype(np.int64) if chunks else np.empty(0, np.int64)
    return TransitionSystem(
        nq * ns,
        ns,
        indptr,
        indices,
        cell_of=np.repeat(np.arange(nq), ns),
        last_signal_of=np.tile(np.arange(ns), nq),
    )
