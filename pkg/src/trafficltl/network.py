"""Signalized traffic network model and its one-step queue dynamics.

Links carry vehicle queues bounded by their capacity. At every step each
intersection actuates one of its phases; an actuated link sends the minimum
of its queue, its saturation flow and the downstream supply (weighted by
turn and supply ratios). Queues then update by mass conservation, clamped
at capacity when exogenous arrivals would overflow the link.

Link order in the input defines the vector index order used everywhere.
"""
from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

RATIO_TOL = 1e-9


class NetworkError(ValueError):
    """Structurally malformed network input."""


def natural_key(ident: str) -> tuple:
    return tuple(int(p) if p.isdigit() else p for p in re.split(r"(\d+)", ident) if p)


@dataclass(frozen=True)
class Link:
    id: str
    capacity: float
    saturation: float
    head: str
    tail: str | None = None


@dataclass(frozen=True)
class Intersection:
    id: str
    phases: tuple[frozenset[str], ...]


@dataclass(frozen=True, eq=False)
class DisturbanceBox:
    lower: np.ndarray
    upper: np.ndarray

    def contains(self, d: np.ndarray, tol: float = 1e-12) -> bool:
        return bool(np.all(d >= self.lower - tol) and np.all(d <= self.upper + tol))


@dataclass(frozen=True)
class SignalInput:
    """One phase per intersection; ``phases`` follows ``TrafficNetwork.intersection_order``."""

    index: int
    phases: tuple[int, ...]
    links: frozenset[str]


@dataclass(frozen=True)
class Diagnostic:
    condition: str
    links: tuple[str, ...]
    message: str

    def __str__(self) -> str:
        return f"[{self.condition}] {self.message}"


@dataclass
class TrafficNetwork:
    links: list[Link]
    intersections: list[Intersection]
    turn_ratios: dict[tuple[str, str], float]
    supply_ratios: dict[tuple[str, int, str, str], float] = field(default_factory=dict)
    disturbance: list[DisturbanceBox] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.link_ids = [l.id for l in self.links]
        if len(set(self.link_ids)) != len(self.link_ids):
            raise NetworkError("duplicate link ids")
        self.index = {lid: i for i, lid in enumerate(self.link_ids)}
        self.by_id = {l.id: l for l in self.links}
        self.inter_by_id = {v.id: v for v in self.intersections}
        if len(self.inter_by_id) != len(self.intersections):
            raise NetworkError("duplicate intersection ids")
        self.intersection_order = sorted(self.inter_by_id, key=natural_key)
        self._check_structure()
        self._fill_default_supply_ratios()
        self._derive_adjacency()
        self._compile()
        self.signals = enumerate_signals(self)
        self._compile_signals()
        self.evaluations = 0

    # -- construction -----------------------------------------------------

    def _check_structure(self) -> None:
        for l in self.links:
            if l.head not in self.inter_by_id:
                raise NetworkError(f"link {l.id}: unknown head intersection {l.head!r}")
            if l.tail is not None and l.tail not in self.inter_by_id:
                raise NetworkError(f"link {l.id}: unknown tail intersection {l.tail!r}")
            if l.head == l.tail:
                raise NetworkError(f"link {l.id}: self-loop at intersection {l.head}")
            if not l.capacity > 0:
                raise NetworkError(f"link {l.id}: capacity must be positive")
            if not l.saturation > 0:
                raise NetworkError(f"link {l.id}: saturation flow must be positive")
        for v in self.intersections:
            if not v.phases:
                raise NetworkError(f"intersection {v.id}: no phases")
            if len(set(v.phases)) != len(v.phases):
                raise NetworkError(f"intersection {v.id}: duplicate phases")
            for phase in v.phases:
                for lid in phase:
                    if lid not in self.by_id:
                        raise NetworkError(f"intersection {v.id}: phase references unknown link {lid!r}")
                    if self.by_id[lid].head != v.id:
                        raise NetworkError(
                            f"intersection {v.id}: phase link {lid} does not enter this intersection"
                        )
        for (l, k), beta in self.turn_ratios.items():
            if l not in self.by_id or k not in self.by_id:
                raise NetworkError(f"turn ratio ({l},{k}) references an unknown link")
            if beta != 0 and self.by_id[l].head != self.by_id[k].tail:
                raise NetworkError(f"turn ratio ({l},{k}): link {k} does not leave the head of link {l}")
            if not 0 <= beta <= 1:
                raise NetworkError(f"turn ratio ({l},{k}) must lie in [0, 1]")
        for (v, p, l, k), alpha in self.supply_ratios.items():
            if v not in self.inter_by_id:
                raise NetworkError(f"supply ratio references unknown intersection {v!r}")
            phases = self.inter_by_id[v].phases
            if not 0 <= p < len(phases):
                raise NetworkError(f"supply ratio: intersection {v} has no phase {p}")
            if l not in self.by_id or k not in self.by_id:
                raise NetworkError(f"supply ratio ({l},{k}) references an unknown link")
            if l not in phases[p]:
                raise NetworkError(f"supply ratio ({l},{k}): link {l} is not in phase {p} of {v}")
            if self.by_id[k].tail != v:
                raise NetworkError(f"supply ratio ({l},{k}): link {k} does not leave intersection {v}")
            if not 0 < alpha <= 1:
                raise NetworkError(f"supply ratio ({l},{k}) must lie in (0, 1]")
        for box in self.disturbance:
            if box.lower.shape != (len(self.links),) or box.upper.shape != (len(self.links),):
                raise NetworkError("disturbance box dimension does not match the number of links")
            if np.any(box.lower < 0) or np.any(box.lower > box.upper):
                raise NetworkError("disturbance box must satisfy 0 <= lower <= upper")

    def beta(self, l: str, k: str) -> float:
        return self.turn_ratios.get((l, k), 0.0)

    def _fill_default_supply_ratios(self) -> None:
        ratios = dict(self.supply_ratios)
        for v in self.intersections:
            for p, phase in enumerate(v.phases):
                for k in self.link_ids:
                    if self.by_id[k].tail != v.id:
                        continue
                    senders = [l for l in phase if self.beta(l, k) != 0]
                    for l in senders:
                        ratios.setdefault((v.id, p, l, k), 1.0 / len(senders))
        self.supply_ratios = ratios

    def _derive_adjacency(self) -> None:
        self.upstream: dict[str, frozenset[str]] = {}
        self.downstream: dict[str, frozenset[str]] = {}
        self.adjacent: dict[str, frozenset[str]] = {}
        for l in self.links:
            up = {k.id for k in self.links if l.tail is not None and k.head == l.tail}
            down = {k.id for k in self.links if k.tail == l.head} | {l.id}
            adj = {k.id for k in self.links if l.tail is not None and k.tail == l.tail} - {l.id}
            self.upstream[l.id] = frozenset(up)
            self.downstream[l.id] = frozenset(down)
            self.adjacent[l.id] = frozenset(adj)
        for lid in self.link_ids:
            if self.downstream[lid] & self.adjacent[lid] or self.upstream[lid] & self.adjacent[lid]:
                raise NetworkError(f"link {lid}: adjacency sets overlap")

    def local(self, lid: str) -> frozenset[str]:
        return self.downstream[lid] | self.upstream[lid] | self.adjacent[lid]

    def _compile(self) -> None:
        n = len(self.links)
        self.cap = np.array([l.capacity for l in self.links], dtype=float)
        self.sat = np.array([l.saturation for l in self.links], dtype=float)
        self.beta_matrix = np.zeros((n, n))
        for (l, k), b in self.turn_ratios.items():
            self.beta_matrix[self.index[l], self.index[k]] = b
        self.beta_mask = self.beta_matrix != 0
        self.exit_fraction = 1.0 - self.beta_matrix.sum(axis=1)

    # -- signals ----------------------------------------------------------

    def _compile_signals(self) -> None:
        n = len(self.links)
        sigs = self.signals
        self.actuated = np.zeros((len(sigs), n), dtype=bool)
        # alpha/beta weights on the supply of downstream link k; only read where beta != 0
        self.supply_weight = np.zeros((len(sigs), n, n))
        for s in sigs:
            for vpos, p in enumerate(s.phases):
                v = self.intersection_order[vpos]
                for l in self.inter_by_id[v].phases[p]:
                    li = self.index[l]
                    self.actuated[s.index, li] = True
                    for k in self.link_ids:
                        b = self.beta(l, k)
                        if b != 0:
                            a = self.supply_ratios[(v, p, l, k)]
                            self.supply_weight[s.index, li, self.index[k]] = a / b

    def signal_from_phases(self, phases: Mapping[str, int] | Sequence[int]) -> SignalInput:
        if isinstance(phases, Mapping):
            phases = tuple(int(phases[v]) for v in self.intersection_order)
        phases = tuple(int(p) for p in phases)
        for s in self.signals:
            if s.phases == phases:
                return s
        raise NetworkError(f"no signal input with phases {phases}")

    # -- dynamics ---------------------------------------------------------

    def outflows(self, x: np.ndarray, s: int) -> np.ndarray:
        """Outflow of every link; ``x`` may carry leading batch dimensions."""
        supply = self.cap - x
        weighted = self.supply_weight[s] * supply[..., None, :]
        weighted = np.where(self.beta_mask, weighted, np.inf)
        limit = np.minimum(np.minimum(x, self.sat), weighted.min(axis=-1))
        return np.where(self.actuated[s], limit, 0.0)

    def dynamics(self, x: np.ndarray, s: int, d: np.ndarray) -> np.ndarray:
        out = self.outflows(x, s)
        inflow = out @ self.beta_matrix
        return np.minimum(self.cap, x - out + inflow + d)

    def link_update(self, lid: str | int, x: np.ndarray, s: int, d_l: float) -> float:
        """Update of a single link from its local coordinates only."""
        self.evaluations += 1
        li = lid if isinstance(lid, (int, np.integer)) else self.index[lid]
        lid = self.link_ids[li]
        total = x[li] - self._outflow_idx(li, x, s) + d_l
        for j in self.upstream[lid]:
            ji = self.index[j]
            b = self.beta_matrix[ji, li]
            if b != 0:
                total += b * self._outflow_idx(ji, x, s)
        return min(self.cap[li], total)

    def link_update_rows(self, xi: np.ndarray, s: int, d: np.ndarray) -> np.ndarray:
        """Vectorised ``link_update``: row ``l`` of ``xi[..., l, :]`` is the argument of link ``l``.

        ``d`` has shape ``(..., n)``; returns shape ``(..., n)``.
        """
        n = len(self.links)
        self.evaluations += int(np.prod(xi.shape[:-1]))
        out = self.outflows(xi, s)  # (..., n_rows, n)
        diag = np.arange(n)
        own = out[..., diag, diag]
        inflow = np.einsum("...lj,jl->...l", out, self.beta_matrix)
        x_own = xi[..., diag, diag]
        return np.minimum(self.cap, x_own - own + inflow + d)

    def _outflow_idx(self, li: int, x: np.ndarray, s: int) -> float:
        if not self.actuated[s, li]:
            return 0.0
        val = min(x[li], self.sat[li])
        for ki in np.flatnonzero(self.beta_mask[li]):
            val = min(val, self.supply_weight[s, li, ki] * (self.cap[ki] - x[ki]))
        return float(val)

    def in_domain(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(x >= -tol) and np.all(x <= self.cap + tol))

    def in_disturbance_set(self, d: np.ndarray) -> bool:
        return any(box.contains(d) for box in self.disturbance)

    # -- serialisation ----------------------------------------------------

    @classmethod
    def from_dict(cls, data: Mapping) -> "TrafficNetwork":
        for key in ("links", "intersections"):
            if key not in data:
                raise NetworkError(f"network config: missing key {key!r}")
        links = []
        for i, item in enumerate(data["links"]):
            try:
                links.append(
                    Link(
                        id=str(item["id"]),
                        capacity=float(item["capacity"]),
                        saturation=float(item["saturation"]),
                        head=str(item["to"]),
                        tail=None if item.get("from") is None else str(item["from"]),
                    )
                )
            except KeyError as exc:
                raise NetworkError(f"network config: links[{i}] missing key {exc.args[0]!r}") from None
        inters = []
        for i, item in enumerate(data["intersections"]):
            try:
                phases = tuple(frozenset(str(l) for l in ph) for ph in item["phases"])
                inters.append(Intersection(id=str(item["id"]), phases=phases))
            except KeyError as exc:
                raise NetworkError(
                    f"network config: intersections[{i}] missing key {exc.args[0]!r}"
                ) from None
        turn = {}
        for i, item in enumerate(data.get("turn_ratios", [])):
            try:
                turn[(str(item["from"]), str(item["to"]))] = float(item["beta"])
            except KeyError as exc:
                raise NetworkError(f"network config: turn_ratios[{i}] missing key {exc.args[0]!r}") from None
        supply = {}
        for i, item in enumerate(data.get("supply_ratios", [])):
            try:
                key = (str(item["intersection"]), int(item["phase_index"]), str(item["from"]), str(item["to"]))
                supply[key] = float(item["alpha"])
            except KeyError as exc:
                raise NetworkError(
                    f"network config: supply_ratios[{i}] missing key {exc.args[0]!r}"
                ) from None
        boxes = []
        for i, item in enumerate(data.get("disturbance", [])):
            try:
                boxes.append(
                    DisturbanceBox(np.asarray(item["lower"], dtype=float), np.asarray(item["upper"], dtype=float))
                )
            except KeyError as exc:
                raise NetworkError(f"network config: disturbance[{i}] missing key {exc.args[0]!r}") from None
        if not boxes:
            n = len(links)
            boxes.append(DisturbanceBox(np.zeros(n), np.zeros(n)))
        return cls(links, inters, turn, supply, boxes)

    def to_dict(self) -> dict:
        return {
            "links": [
                {"id": l.id, "capacity": l.capacity, "saturation": l.saturation, "from": l.tail, "to": l.head}
                for l in self.links
            ],
            "intersections": [
                {"id": v.id, "phases": [sorted(ph, key=natural_key) for ph in v.phases]}
                for v in self.intersections
            ],
            "turn_ratios": [{"from": l, "to": k, "beta": b} for (l, k), b in self.turn_ratios.items()],
            "supply_ratios": [
                {"intersection": v, "phase_index": p, "from": l, "to": k, "alpha": a}
                for (v, p, l, k), a in self.supply_ratios.items()
            ],
            "disturbance": [{"lower": b.lower.tolist(), "upper": b.upper.tolist()} for b in self.disturbance],
        }


def load_network(path: str | Path) -> TrafficNetwork:
    with open(path, encoding="utf-8") as fh:
        return TrafficNetwork.from_dict(json.load(fh))


def validate_network(net: TrafficNetwork) -> list[Diagnostic]:
    """Check turn-ratio sums, supply-ratio sums and the queue-blocking condition.

    The blocking condition requires, for every link ``l`` and every upstream
    sender ``k`` with nonzero turn ratio, ``c_l <= cap_l - (beta_kl / alpha_kl) c_k``
    using the smallest supply ratio over all phases that actuate ``k``.
    """
    diags: list[Diagnostic] = []
    for l in net.link_ids:
        total = sum(b for (src, _), b in net.turn_ratios.items() if src == l)
        if total > 1 + RATIO_TOL:
            diags.append(
                Diagnostic("turn ratio sum", (l,), f"turn ratios out of link {l} sum to {total:g} > 1")
            )
    for v in net.intersections:
        for p, phase in enumerate(v.phases):
            if not phase:
                continue
            for k in net.link_ids:
                if net.by_id[k].tail != v.id:
                    continue
                senders = sorted(l for l in phase if net.beta(l, k) != 0)
                if not senders:
                    continue
                total = sum(net.supply_ratios[(v.id, p, l, k)] for l in senders)
                if abs(total - 1) > RATIO_TOL:
                    diags.append(
                        Diagnostic(
                            "supply ratio sum",
                            (*senders, k),
                            f"supply ratios into link {k} under phase {p} of {v.id} sum to {total:g} != 1",
                        )
                    )
    for l in net.links:
        for k in sorted(net.upstream[l.id], key=natural_key):
            b = net.beta(k, l.id)
            if b == 0:
                continue
            alphas = [a for (v, p, src, dst), a in net.supply_ratios.items() if src == k and dst == l.id]
            if not alphas:
                continue
            bound = l.capacity - b / min(alphas) * net.by_id[k].saturation
            if l.saturation > bound + RATIO_TOL:
                diags.append(
                    Diagnostic(
                        "queue-blocking condition",
                        (l.id, k),
                        f"saturation {l.saturation:g} of link {l.id} exceeds "
                        f"capacity minus scaled upstream saturation of link {k} ({bound:g})",
                    )
                )
    return diags


def enumerate_signals(net: TrafficNetwork) -> list[SignalInput]:
    """All combinations of one phase per intersection, by intersection id then phase index."""
    order = net.intersection_order
    ranges = [range(len(net.inter_by_id[v].phases)) for v in order]
    out = []
    for i, combo in enumerate(itertools.product(*ranges)):
        links = frozenset().union(*(net.inter_by_id[v].phases[p] for v, p in zip(order, combo)))
        out.append(SignalInput(i, tuple(combo), links))
    return out


def _signal_index(net: TrafficNetwork, s: SignalInput | int) -> int:
    return s.index if isinstance(s, SignalInput) else int(s)


def outflow(net: TrafficNetwork, l: str, x: Sequence[float], s: SignalInput | int) -> float:
    x = np.asarray(x, dtype=float)
    return net._outflow_idx(net.index[l], x, _signal_index(net, s))


def step(
    net: TrafficNetwork,
    x: Sequence[float],
    s: SignalInput | int,
    d: Sequence[float],
    check: bool = True,
) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    if check and not net.in_disturbance_set(d):
        raise ValueError("disturbance vector lies outside the declared disturbance set")
    return net.dynamics(x, _signal_index(net, s), d)
