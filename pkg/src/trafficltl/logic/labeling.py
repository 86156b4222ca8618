"""Whole-cell labeling of partition cells and signals with atomic propositions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..network import TrafficNetwork
from ..partition import GeneralPartition, GriddedPartition
from .formula import Atom, FormulaError, PhaseAP, Prop, SignalAP, StateAP, pretty_atom


@dataclass(eq=False)
class Labeling:
    """``state_bits[q]`` and ``signal_bits[s]`` are bitmasks over ``aps``; a letter is their union."""

    aps: tuple[Atom, ...]
    state_bits: np.ndarray
    signal_bits: np.ndarray

    def letter(self, q: int, s: int) -> int:
        return int(self.state_bits[q] | self.signal_bits[s])

    def letters(self) -> np.ndarray:
        """Letter matrix of shape ``(|Q|, |S|)``."""
        return self.state_bits[:, None] | self.signal_bits[None, :]


def signal_ap_holds(net: TrafficNetwork, ap: Atom, s: int) -> bool:
    sig = net.signals[s]
    if isinstance(ap, SignalAP):
        return ap.link in sig.links
    if isinstance(ap, PhaseAP):
        pos = net.intersection_order.index(ap.intersection)
        chosen = sig.phases[pos]
        if isinstance(ap.phase, int):
            return chosen == ap.phase
        return net.inter_by_id[ap.intersection].phases[chosen] == ap.phase
    raise TypeError(f"{pretty_atom(ap)} is not a signal proposition")


def _check_alignment(ap: StateAP, l: int, lower: np.ndarray, upper: np.ndarray, link_id: str) -> None:
    C = ap.threshold
    straddle = (lower[:, l] < C) & (C < upper[:, l])
    if straddle.any():
        edges = np.unique(np.concatenate([lower[:, l], upper[:, l]]))
        below = edges[edges < C]
        above = edges[edges > C]
        near = []
        if len(below):
            near.append(f"{below.max():g}")
        if len(above):
            near.append(f"{above.min():g}")
        raise FormulaError(
            f"threshold {C:g} of '{pretty_atom(ap)}' on link {link_id!r} does not align with a cell "
            f"boundary; nearest cuts are {' and '.join(near)}"
        )


def label_partition(
    net: TrafficNetwork,
    partition: GriddedPartition | GeneralPartition,
    aps: Sequence[Atom],
) -> Labeling:
    """Label cells with the state propositions they satisfy throughout, and signals with the rest.

    Thresholds must coincide with cell boundaries on their link.
    """
    lower, upper, strict_lo, _ = partition.cell_arrays()
    nq, ns = len(lower), len(net.signals)
    if len(aps) > 62:
        raise FormulaError("too many propositions for a 64-bit letter")
    state_bits = np.zeros(nq, dtype=np.int64)
    signal_bits = np.zeros(ns, dtype=np.int64)
    for i, ap in enumerate(aps):
        if isinstance(ap, StateAP):
            if ap.link not in net.index:
                raise FormulaError(f"unknown link {ap.link!r}")
            l = net.index[ap.link]
            _check_alignment(ap, l, lower, upper, ap.link)
            if ap.op == "<=":
                holds = upper[:, l] <= ap.threshold
            else:
                holds = lower[:, l] >= ap.threshold
            state_bits |= holds.astype(np.int64) << i
        elif isinstance(ap, (SignalAP, PhaseAP)):
            holds = np.array([signal_ap_holds(net, ap, s) for s in range(ns)])
            signal_bits |= holds.astype(np.int64) << i
        elif isinstance(ap, Prop):
            raise FormulaError(f"proposition {ap.name!r} has no meaning on this network")
        else:
            raise FormulaError(f"cannot label {pretty_atom(ap)}")
    return Labeling(tuple(aps), state_bits, signal_bits)


def evaluate_atoms(net: TrafficNetwork, aps: Sequence[Atom], x: np.ndarray, s: int) -> int:
    """Letter of a concrete state and signal, evaluating thresholds on ``x`` itself."""
    bits = 0
    for i, ap in enumerate(aps):
        if isinstance(ap, StateAP):
            v = ap.holds(float(x[net.index[ap.link]]))
        elif isinstance(ap, (SignalAP, PhaseAP)):
            v = signal_ap_holds(net, ap, s)
        else:
            raise FormulaError(f"cannot evaluate {pretty_atom(ap)} on a trace")
        bits |= int(v) << i
    return bits
