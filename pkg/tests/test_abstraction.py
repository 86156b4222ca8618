import json

import numpy as np
import pytest

from trafficltl import (
    GriddedPartition,
    TrafficNetwork,
    augment,
    build_gridded,
    build_transition_system,
)
from trafficltl.abstraction import TransitionSystem
from trafficltl.partition import partition_from_dict


def one_link(phases=(("1",), ()), d_hi=5.0):
    return TrafficNetwork.from_dict(
        {
            "links": [{"id": "1", "capacity": 40, "saturation": 10, "to": "v"}],
            "intersections": [{"id": "v", "phases": [list(p) for p in phases]}],
            "disturbance": [{"lower": [0], "upper": [d_hi]}],
        }
    )


@pytest.fixture
def halves():
    return GriddedPartition([[0, 20, 40]])


def test_one_link_transitions(halves):
    net = one_link()
    ts = build_transition_system(net, halves)
    actuated, idle = 0, 1
    assert ts.successors(0, actuated).tolist() == [0]
    assert ts.successors(1, actuated).tolist() == [0, 1]
    assert ts.successors(0, idle).tolist() == [0, 1]
    assert ts.successors(1, idle).tolist() == [0, 1]
    assert ts.is_total()


def test_frozen_dynamics_keeps_closed_cell(halves):
    # no phase actuates the link and there is no inflow
    net = one_link(phases=((),), d_hi=0.0)
    ts = build_transition_system(net, halves)
    assert ts.successors(0, 0).tolist() == [0]
    # the closure of (20,40] touches 20, which belongs to the first cell
    assert ts.successors(1, 0).tolist() == [0, 1]


def test_evaluation_count(case_net, case_partition):
    report = {}
    build_transition_system(case_net, case_partition, expand=False, report=report)
    assert report["evaluations"] == case_partition.size * 16 * 2 * 2 * 10


def test_case_study_abstraction_is_total(case_net, case_partition):
    ts = build_transition_system(case_net, case_partition)
    assert ts.n_states == 500 and ts.n_actions == 16
    assert ts.is_total()
    ptr, idx = ts.indptr, ts.indices
    for p in range(0, ts.n_states * ts.n_actions, 37):
        row = idx[ptr[p]:ptr[p + 1]]
        assert np.all(np.diff(row) > 0)


def test_compressed_and_expanded_agree(case_net, case_partition, rng):
    lazy = build_transition_system(case_net, case_partition, expand=False)
    full = build_transition_system(case_net, case_partition)
    for _ in range(300):
        q, s, q2 = int(rng.integers(500)), int(rng.integers(16)), int(rng.integers(500))
        assert lazy.has_transition(q, s, q2) == full.has_transition(q, s, q2)
    assert np.array_equal(lazy.indices, full.indices)


def test_workers_do_not_change_result(case_net, case_partition):
    a = build_transition_system(case_net, case_partition, workers=1)
    b = build_transition_system(case_net, case_partition, workers=4)
    assert np.array_equal(a.indptr, b.indptr) and np.array_equal(a.indices, b.indices)


def test_general_partition_matches_gridded(chain):
    grid = build_gridded(chain, [[0, 10, 25, 40], [0, 15, 40]])
    a = build_transition_system(chain, grid)
    b = build_transition_system(chain, grid.to_general())
    assert np.array_equal(a.indptr, b.indptr) and np.array_equal(a.indices, b.indices)


def test_irregular_general_partition(chain):
    cells = {
        "cells": [
            {"lower": [0, 0], "upper": [20, 40]},
            {"lower": [20, 0], "upper": [40, 10], "strict_lower": [True, False]},
            {"lower": [20, 10], "upper": [40, 40], "strict_lower": [True, True]},
        ]
    }
    part = partition_from_dict(chain, cells)
    ts = build_transition_system(chain, part)
    assert ts.is_total()
    # brute force: every sampled transition must be present
    rng = np.random.default_rng(3)
    x = rng.random((4000, 2)) * 40
    d = np.column_stack([rng.random(4000) * 2, np.zeros(4000)])
    q = part.project_many(x)
    for s in range(len(chain.signals)):
        q2 = part.project_many(chain.dynamics(x, s, d))
        for a, b in set(zip(q.tolist(), q2.tolist())):
            assert ts.has_transition(a, s, b)


def test_augment_counts(halves):
    ts = build_transition_system(one_link(), halves)
    aug = augment(ts)
    assert aug.n_states == 4 and aug.augmented
    for state in range(4):
        q = int(aug.cell_of[state])
        for s in range(2):
            expect = [int(q2) * 2 + s for q2 in ts.successors(q, s)]
            assert aug.successors(state, s).tolist() == expect
    single = build_transition_system(one_link(phases=(("1",),)), halves)
    assert augment(single).n_states == 2


@pytest.mark.parametrize("nq", [1, 408, 500])
def test_augment_scales_with_signals(case_net, nq):
    ptr = np.arange(nq * 16 + 1)
    ts = TransitionSystem(nq, 16, ptr, np.repeat(np.arange(nq), 16))
    assert augment(ts).n_states == 16 * nq


def test_augment_rejects_twice(halves):
    aug = augment(build_transition_system(one_link(), halves))
    with pytest.raises(ValueError):
        augment(aug)


def test_json_and_dot_round_trip(tmp_path, halves):
    ts = augment(build_transition_system(one_link(), halves))
    path = tmp_path / "ts.json"
    ts.to_json(path)
    again = TransitionSystem.from_dict(json.loads(path.read_text()))
    assert again.to_dict() == ts.to_dict()
    dot = ts.to_dot()
    assert dot.startswith("digraph") and dot.count("->") == len({(q, q2) for q, _, q2 in ts.edges()})


def test_predecessors(halves):
    ts = build_transition_system(one_link(), halves)
    assert set(ts.predecessors(1)) == {(0, 1), (1, 0), (1, 1)}


def test_random_runs_stay_in_relation(chain):
    grid = build_gridded(chain, [[0, 5, 10, 20, 40], [0, 10, 20, 30, 40]])
    ts = build_transition_system(chain, grid)
    rng = np.random.default_rng(11)
    x = rng.random((300, 2)) * 40
    for _ in range(40):
        s = rng.integers(len(chain.signals), size=300)
        d = np.column_stack([rng.random(300) * 2, np.zeros(300)])
        y = np.empty_like(x)
        for k in range(len(chain.signals)):
            sel = s == k
            y[sel] = chain.dynamics(x[sel], k, d[sel])
        for q, sk, q2 in zip(grid.project_many(x), s, grid.project_many(y)):
            assert ts.has_transition(int(q), int(sk), int(q2))
        x = y
