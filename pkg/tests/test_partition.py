import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trafficltl import (
    Box,
    GeneralPartition,
    GriddedPartition,
    PartitionError,
    box_intersects,
    build_gridded,
    coarsest_grid_refinement,
    successors_generic,
    successors_gridded,
)
from trafficltl.partition import partition_from_dict


def test_build_counts(chain, case_net, case_partition):
    assert build_gridded(chain, [[0, 20, 40], [0, 20, 40]]).size == 4
    assert build_gridded(chain, {}).size == 1
    assert case_partition.size == 4 * 5 * 5 * 5
    mixed = build_gridded(case_net, {"1": [0, 40], "2": [0, 10, 50], "9": [0, 1, 2, 40]})
    assert mixed.size == 2 * 3
    assert len(set(mixed.encode(mixed.decode(np.arange(mixed.size))).tolist())) == mixed.size


@pytest.mark.parametrize(
    "cuts",
    [[[0, 20, 30], [0, 40]], [[5, 40], [0, 40]], [[0, 20, 20, 40], [0, 40]], [[0, 30, 20, 40], [0, 40]], [[0], [0, 40]]],
)
def test_build_rejects_bad_cuts(chain, cuts):
    with pytest.raises(PartitionError):
        build_gridded(chain, cuts)


def test_build_rejects_unknown_link(chain):
    with pytest.raises(PartitionError, match="unknown"):
        build_gridded(chain, {"7": [0, 40]})


def test_projection_boundaries():
    grid = GriddedPartition([[0, 20, 40]])
    assert grid.project([0]) == 0
    assert grid.project([20]) == 0
    assert grid.project([20.5]) == 1
    assert grid.project([40]) == 1
    with pytest.raises(PartitionError):
        grid.project([40.5])
    with pytest.raises(PartitionError):
        grid.project([-1])


def test_projection_round_trip(case_partition, rng):
    caps = np.array([c[-1] for c in case_partition.cuts])
    x = rng.random((3000, 10)) * caps
    x[::3, 1] = 30.0  # sit on a cut
    x[1::3, 0] = 0.0
    general = case_partition.to_general()
    q = case_partition.project_many(x)
    assert np.array_equal(q, general.project_many(x))
    for i in range(0, 3000, 97):
        assert case_partition.project(x[i]) == q[i]
        assert case_partition.cell(int(q[i])).contains(x[i])


def test_box_intersects_examples():
    assert not box_intersects(Box([20], [40], [True], [False]), [0], [20])
    assert box_intersects(Box([0], [20]), [20], [30])
    assert box_intersects(Box([5, 5], [7, 9]), [5, 5], [7, 9])
    assert box_intersects(Box([20], [40], [True], [True]), [40], [50]) is False


def test_successor_examples():
    grid = GriddedPartition([[0, 20, 40], [0, 25, 50]])
    general = grid.to_general()
    assert successors_generic(general, [0, 0], [40, 50]) == set(range(4))
    expect = {int(grid.encode([0, 0])), int(grid.encode([1, 0]))}
    assert successors_generic(general, [10, 0], [30, 10]) == expect
    assert successors_gridded(grid, [10, 0], [30, 10]) == expect
    assert len(successors_generic(general, [7, 33], [7, 33])) == 1


def test_gridded_index_bounds():
    grid = GriddedPartition([[0, 20, 40]])
    jlo, jhi = grid.index_ranges(np.array([10.0]), np.array([30.0]))
    assert (jlo[0], jhi[0]) == (0, 1)
    jlo, jhi = grid.index_ranges(np.array([20.0]), np.array([20.0]))
    assert (jlo[0], jhi[0]) == (0, 0)
    jlo, jhi = grid.index_ranges(np.array([0.0]), np.array([0.0]))
    assert (jlo[0], jhi[0]) == (0, 0)


def test_zero_width_first_interval():
    grid = GriddedPartition([[0, 0, 40]])
    assert grid.project([0]) == 0
    assert grid.project([1e-9]) == 1
    assert successors_gridded(grid, [0], [0]) == {0}
    assert successors_gridded(grid, [0], [5]) == {0, 1}
    assert successors_generic(grid.to_general(), [0], [5]) == {0, 1}


@st.composite
def grid_and_query(draw):
    dim = draw(st.integers(1, 4))
    cuts, lo, hi = [], [], []
    for _ in range(dim):
        cap = draw(st.sampled_from([10.0, 40.0, 50.0]))
        n = draw(st.integers(1, 5))
        inner = sorted(set(draw(st.lists(st.integers(1, int(cap) - 1), min_size=n - 1, max_size=n - 1))))
        c = [0.0] + [float(v) for v in inner] + [cap]
        cuts.append(c)
        # queries often land exactly on cut points
        pool = st.one_of(st.sampled_from(c), st.floats(0, cap, allow_nan=False))
        a, b = draw(pool), draw(pool)
        lo.append(min(a, b))
        hi.append(max(a, b))
    return GriddedPartition(cuts), np.array(lo), np.array(hi)


@settings(max_examples=300, deadline=None)
@given(grid_and_query())
def test_gridded_matches_generic(case):
    grid, lo, hi = case
    assert successors_gridded(grid, lo, hi) == successors_generic(grid.to_general(), lo, hi)


def staircase_partition():
    """Five cells on [0,40]^2; the top-right cell (10,40]x(10,40] is crossed by cuts at 25 on both links."""
    lo = [[0, 0], [0, 25], [10, 0], [25, 0], [10, 10]]
    hi = [[10, 25], [10, 40], [25, 10], [40, 10], [40, 40]]
    sl = [[False, False], [False, True], [True, False], [True, False], [True, True]]
    return GeneralPartition(lo, hi, sl, None, caps=[40, 40])


def test_general_partition_validation():
    staircase_partition()
    with pytest.raises(PartitionError):
        GeneralPartition([[0], [10]], [[20], [40]], [[False], [False]], None, caps=[40])
    with pytest.raises(PartitionError):
        GeneralPartition([[0], [20]], [[10], [40]], [[False], [True]], None, caps=[40])
    with pytest.raises(PartitionError):
        # the shared boundary point 20 belongs to both cells
        GeneralPartition([[0], [20]], [[20], [40]], None, None, caps=[40])


def test_refinement_labels_split_cells():
    part = staircase_partition()
    grid, mapping = coarsest_grid_refinement(part)
    assert [c.tolist() for c in grid.cuts] == [[0, 10, 25, 40], [0, 10, 25, 40]]
    assert np.sum(mapping == 4) == 4
    assert np.sum(mapping == 0) == 2
    assert np.sum(mapping == 1) == 1
    assert sorted(set(mapping.tolist())) == [0, 1, 2, 3, 4]


def test_refinement_four_way_split():
    lo = [[0, 0], [0, 20], [20, 0], [20, 10]]
    hi = [[20, 20], [20, 40], [40, 10], [40, 40]]
    sl = [[False, False], [False, True], [True, False], [True, True]]
    part = GeneralPartition(lo, hi, sl, None, caps=[40, 40])
    grid, mapping = coarsest_grid_refinement(part)
    # cell 3 is (20,40] x (10,40], cut by 20 on the second link only
    assert np.sum(mapping == 3) == 2
    assert np.sum(mapping == 0) == 2


def test_refinement_identity_for_gridded():
    grid = GriddedPartition([[0, 20, 40], [0, 5, 25, 50]])
    refined, mapping = coarsest_grid_refinement(grid.to_general())
    assert [c.tolist() for c in refined.cuts] == [c.tolist() for c in grid.cuts]
    assert mapping.tolist() == list(range(grid.size))


def test_refinement_lookup_matches_projection(rng):
    part = staircase_partition()
    grid, mapping = coarsest_grid_refinement(part)
    x = rng.random((2000, 2)) * 40
    x[::4] = np.round(x[::4] / 5) * 5
    assert np.array_equal(mapping[grid.project_many(x)], part.project_many(x))


def test_partition_from_dict(chain):
    assert partition_from_dict(chain, {"gridded": {"1": [0, 20, 40]}}).size == 2
    cells = {
        "cells": [
            {"lower": [0, 0], "upper": [20, 40]},
            {"lower": [20, 0], "upper": [40, 40], "strict_lower": [True, False], "strict_upper": [False, False]},
        ]
    }
    part = partition_from_dict(chain, cells)
    assert isinstance(part, GeneralPartition) and part.size == 2
    assert partition_from_dict(chain, part.to_dict()).to_dict() == part.to_dict()
    with pytest.raises(PartitionError):
        partition_from_dict(chain, {"boxes": []})
