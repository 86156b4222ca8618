"""End-to-end synthesis: abstraction, automaton, labeling, game, controller."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .abstraction import TransitionSystem, build_transition_system
from .logic.dra import RabinAutomaton, compile_to_dra
from .logic.formula import Formula
from .logic.labeling import Labeling, label_partition
from .network import TrafficNetwork
from .synthesis import (
    Controller,
    ProductGame,
    SynthesisError,
    build_product_game,
    coverage,
    extract_controller,
    solve_one_pair_rabin,
)


@dataclass(eq=False)
class SynthesisResult:
    controller: Controller
    ts: TransitionSystem
    dra: RabinAutomaton
    labeling: Labeling
    game: ProductGame
    win: np.ndarray
    coverage: dict[int, int]
    sigma_init: int
    timings: dict = field(default_factory=dict)

    def report(self) -> dict:
        return {
            "cells": int(self.ts.n_cells),
            "signals": int(self.ts.n_actions),
            "automaton_states": int(self.dra.n_states),
            "game_nodes": int(self.game.n_nodes),
            "winning_nodes": int(self.win.sum()),
            "sigma_init": int(self.sigma_init),
            "cells_covered_by_sigma_init": {str(k): v for k, v in self.coverage.items()},
            "seconds": self.timings,
        }


def synthesize(
    net: TrafficNetwork,
    partition,
    formula: Formula | None = None,
    automaton: RabinAutomaton | None = None,
    sigma_init: int | None = None,
    workers: int = 1,
    ts: TransitionSystem | None = None,
) -> SynthesisResult:
    """Controller for ``formula`` (or a ready-made automaton) on ``net`` over ``partition``.

    With ``sigma_init=None`` the first initial signal from which every cell
    wins is used; if there is none, the error lists the cells that lose
    under the best candidate.
    """
    timings = {}
    t0 = time.perf_counter()
    if ts is None:
        ts = build_transition_system(net, partition, workers=workers)
    timings["abstraction"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    dra = automaton if automaton is not None else compile_to_dra(formula)
    labeling = label_partition(net, partition, dra.aps)
    timings["automaton"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    game = build_product_game(ts, dra, labeling, sigma_init)
    timings["product"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    win, strategy = solve_one_pair_rabin(game)
    timings["solve"] = time.perf_counter() - t0

    cov = coverage(game, win) if sigma_init is None else {sigma_init: coverage_one(game, win, sigma_init)}
    n_cells = ts.n_cells
    if sigma_init is None:
        full = [s for s, c in cov.items() if c == n_cells]
        chosen = full[0] if full else max(cov, key=lambda s: (cov[s], -s))
    else:
        chosen = sigma_init
    controller = extract_controller(game, win, strategy, chosen)
    controller.partition = partition.to_dict(net.link_ids) if hasattr(partition, "cuts") else partition.to_dict()
    return SynthesisResult(controller, ts, dra, labeling, game, win, cov, chosen, timings)


def coverage_one(game: ProductGame, win: np.ndarray, sigma: int) -> int:
    ids, _ = game.initial_nodes(sigma)
    return int(np.sum((ids >= 0) & win[np.maximum(ids, 0)]))


__all__ = ["SynthesisResult", "SynthesisError", "synthesize"]
