"""Box partitions of the state domain.

A gridded partition is a product of per-link interval decompositions
``[c_0, c_1], (c_1, c_2], ..., (c_{N-1}, c_N]`` with ``c_0 = 0`` and
``c_N`` the link capacity. Cells are numbered by the mixed-radix encoding of
their 0-based interval indices, last link varying fastest.

A general partition is an explicit list of boxes with strictness flags.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .network import TrafficNetwork
from .reach import Box


class PartitionError(ValueError):
    pass


def box_intersects(cell: Box, y_lo: Sequence[float], y_hi: Sequence[float]) -> bool:
    """Whether ``cell`` meets the closed box ``[y_lo, y_hi]``."""
    y_lo = np.asarray(y_lo, dtype=float)
    y_hi = np.asarray(y_hi, dtype=float)
    a = np.where(cell.strict_lower, cell.lower < y_hi, cell.lower <= y_hi)
    b = np.where(cell.strict_upper, y_lo < cell.upper, y_lo <= cell.upper)
    return bool(np.all(a & b))


@dataclass(eq=False)
class GriddedPartition:
    cuts: list[np.ndarray]

    def __post_init__(self) -> None:
        self.cuts = [np.asarray(c, dtype=float) for c in self.cuts]
        self.shape = tuple(len(c) - 1 for c in self.cuts)
        self.size = int(np.prod(self.shape))

    @property
    def dim(self) -> int:
        return len(self.cuts)

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, GriddedPartition) or self.shape != other.shape:
            return NotImplemented if not isinstance(other, GriddedPartition) else False
        return all(np.array_equal(a, b) for a, b in zip(self.cuts, other.cuts))

    __hash__ = None

    def encode(self, multi: Sequence[int] | np.ndarray) -> int | np.ndarray:
        return np.ravel_multi_index(tuple(np.asarray(multi).T), self.shape)

    def decode(self, q: int | np.ndarray) -> tuple[int, ...] | np.ndarray:
        idx = np.unravel_index(q, self.shape)
        if np.ndim(q) == 0:
            return tuple(int(i) for i in idx)
        return np.stack(idx, axis=-1)

    def interval_bounds(self, l: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        c = self.cuts[l]
        strict = np.ones(len(c) - 1, dtype=bool)
        strict[0] = False
        return c[:-1], c[1:], strict

    def cell(self, q: int) -> Box:
        multi = self.decode(q)
        lo = np.array([self.cuts[l][j] for l, j in enumerate(multi)])
        hi = np.array([self.cuts[l][j + 1] for l, j in enumerate(multi)])
        sl = np.array([j > 0 for j in multi])
        return Box(lo, hi, sl, np.zeros(self.dim, dtype=bool))

    def cell_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Lower, upper, strict-lower and strict-upper arrays of shape ``(|Q|, n)``."""
        multi = self.decode(np.arange(self.size))
        lo = np.stack([self.cuts[l][multi[:, l]] for l in range(self.dim)], axis=1)
        hi = np.stack([self.cuts[l][multi[:, l] + 1] for l in range(self.dim)], axis=1)
        return lo, hi, multi > 0, np.zeros_like(multi, dtype=bool)

    def project(self, x: Sequence[float]) -> int:
        x = np.asarray(x, dtype=float)
        caps = np.array([c[-1] for c in self.cuts])
        if np.any(x < 0) or np.any(x > caps):
            raise PartitionError(f"state {x.tolist()} lies outside the domain")
        multi = [int(np.searchsorted(c[1:], xv, side="left")) for c, xv in zip(self.cuts, x)]
        return int(self.encode(multi))

    def project_many(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        multi = np.stack(
            [np.searchsorted(c[1:], x[:, l], side="left") for l, c in enumerate(self.cuts)], axis=1
        )
        return self.encode(multi)

    def index_ranges(self, y_lo: np.ndarray, y_hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """0-based inclusive interval index ranges meeting ``[y_lo, y_hi]`` per link.

        Accepts leading batch dimensions; the last axis indexes links.
        """
        y_lo = np.asarray(y_lo, dtype=float)
        y_hi = np.asarray(y_hi, dtype=float)
        jlo = np.empty(y_lo.shape, dtype=np.int64)
        jhi = np.empty(y_hi.shape, dtype=np.int64)
        for l, c in enumerate(self.cuts):
            n_l = len(c) - 1
            # smallest interval whose upper cut is >= y_lo
            jlo[..., l] = np.minimum(np.searchsorted(c[1:], y_lo[..., l], side="left"), n_l - 1)
            # largest interval whose lower cut is < y_hi; the first interval when y_hi == 0
            top = np.searchsorted(c[:-1], y_hi[..., l], side="left") - 1
            top = np.where(y_hi[..., l] <= 0, 0, top)
            jhi[..., l] = np.clip(top, 0, n_l - 1)
        return jlo, jhi

    def expand_ranges(self, jlo: np.ndarray, jhi: np.ndarray) -> np.ndarray:
        """Cell indices of the product of per-link index ranges, sorted."""
        if np.any(jlo > jhi):
            return np.empty(0, dtype=np.int64)
        axes = [np.arange(a, b + 1) for a, b in zip(jlo, jhi)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.sort(np.ravel_multi_index(tuple(g.ravel() for g in grids), self.shape))

    def to_general(self) -> "GeneralPartition":
        lo, hi, sl, su = self.cell_arrays()
        return GeneralPartition(lo, hi, sl, su, validate=False)

    def to_dict(self, link_ids: Sequence[str]) -> dict:
        return {"gridded": {lid: c.tolist() for lid, c in zip(link_ids, self.cuts)}}


def build_gridded(net: TrafficNetwork, cuts: Mapping[str, Sequence[float]] | Sequence[Sequence[float]]) -> GriddedPartition:
    """Gridded partition from per-link cut lists; links without cuts get one interval."""
    if isinstance(cuts, Mapping):
        unknown = set(map(str, cuts)) - set(net.link_ids)
        if unknown:
            raise PartitionError(f"cuts given for unknown links {sorted(unknown)}")
        cuts = {str(k): v for k, v in cuts.items()}
        per_link = [cuts.get(lid, [0.0, net.by_id[lid].capacity]) for lid in net.link_ids]
    else:
        per_link = list(cuts)
        if len(per_link) != len(net.links):
            raise PartitionError("one cut list per link is required")
    out = []
    for lid, c in zip(net.link_ids, per_link):
        c = np.asarray(c, dtype=float)
        cap = net.by_id[lid].capacity
        if len(c) < 2 or c[0] != 0 or c[-1] != cap:
            raise PartitionError(f"link {lid}: cuts must start at 0 and end at capacity {cap:g}")
        gaps = np.diff(c)
        if np.any(gaps[1:] <= 0) or gaps[0] < 0:
            raise PartitionError(f"link {lid}: cuts must be strictly increasing")
        out.append(c)
    return GriddedPartition(out)


def _interval_overlap(lo1, hi1, sl1, su1, lo2, hi2, sl2, su2):
    lo = np.maximum(lo1, lo2)
    s_lo = np.where(lo1 == lo2, sl1 | sl2, np.where(lo1 > lo2, sl1, sl2))
    hi = np.minimum(hi1, hi2)
    s_hi = np.where(hi1 == hi2, su1 | su2, np.where(hi1 < hi2, su1, su2))
    return (lo < hi) | ((lo == hi) & ~s_lo & ~s_hi)


def _contains_box(outer_lo, outer_hi, outer_sl, outer_su, lo, hi, sl, su):
    left = (outer_lo < lo) | ((outer_lo == lo) & (~outer_sl | sl))
    right = (hi < outer_hi) | ((hi == outer_hi) & (~outer_su | su))
    return np.all(left & right, axis=-1)


class GeneralPartition:
    """Explicit box partition; cell ``q`` is row ``q`` of the corner arrays."""

    def __init__(self, lower, upper, strict_lower=None, strict_upper=None, caps=None, validate=True):
        self.lower = np.atleast_2d(np.asarray(lower, dtype=float))
        self.upper = np.atleast_2d(np.asarray(upper, dtype=float))
        shape = self.lower.shape
        self.strict_lower = np.zeros(shape, bool) if strict_lower is None else np.asarray(strict_lower, bool)
        self.strict_upper = np.zeros(shape, bool) if strict_upper is None else np.asarray(strict_upper, bool)
        self.size, self.dim = shape
        self.caps = self.upper.max(axis=0) if caps is None else np.asarray(caps, dtype=float)
        if validate:
            self.validate()

    def __len__(self) -> int:
        return self.size

    def cell(self, q: int) -> Box:
        return Box(self.lower[q], self.upper[q], self.strict_lower[q], self.strict_upper[q])

    def cell_arrays(self):
        return self.lower, self.upper, self.strict_lower, self.strict_upper

    def validate(self, samples: int = 2000, seed: int = 0) -> None:
        if np.any(self.lower > self.upper):
            raise PartitionError("cell with lower corner above upper corner")
        if np.any(self.lower < 0) or np.any(self.upper > self.caps):
            raise PartitionError("cell extends outside the domain")
        for q in range(self.size):
            ov = np.all(
                _interval_overlap(
                    self.lower[q], self.upper[q], self.strict_lower[q], self.strict_upper[q],
                    self.lower, self.upper, self.strict_lower, self.strict_upper,
                ),
                axis=1,
            )
            ov[q] = False
            if ov.any():
                raise PartitionError(f"cells {q} and {int(np.flatnonzero(ov)[0])} overlap")
        nondeg = self.caps > 0
        vol = np.prod((self.upper - self.lower)[:, nondeg], axis=1).sum()
        total = np.prod(self.caps[nondeg])
        if abs(vol - total) > 1e-6 * total:
            raise PartitionError(f"cells cover volume {vol:g} of a domain of volume {total:g}")
        rng = np.random.default_rng(seed)
        pts = rng.uniform(0, 1, (samples, self.dim)) * self.caps
        coords = [np.unique(np.concatenate([self.lower[:, l], self.upper[:, l]])) for l in range(self.dim)]
        snap = rng.random((samples, self.dim)) < 0.5
        for l in range(self.dim):
            pts[snap[:, l], l] = rng.choice(coords[l], size=int(snap[:, l].sum()))
        counts = self.membership(pts).sum(axis=1)
        if np.any(counts != 1):
            bad = pts[np.flatnonzero(counts != 1)[0]]
            raise PartitionError(f"point {bad.tolist()} is covered by {int(counts[counts != 1][0])} cells")

    def membership(self, x: np.ndarray) -> np.ndarray:
        """Boolean matrix ``(m, |Q|)``: whether point ``i`` lies in cell ``q``."""
        x = np.atleast_2d(x)[:, None, :]
        lo = np.where(self.strict_lower, x > self.lower, x >= self.lower)
        hi = np.where(self.strict_upper, x < self.upper, x <= self.upper)
        return np.all(lo & hi, axis=2)

    def project(self, x: Sequence[float]) -> int:
        hits = np.flatnonzero(self.membership(np.asarray(x, dtype=float))[0])
        if len(hits) != 1:
            raise PartitionError(f"state {list(x)} lies in {len(hits)} cells")
        return int(hits[0])

    def project_many(self, x: np.ndarray) -> np.ndarray:
        m = self.membership(x)
        if np.any(m.sum(axis=1) != 1):
            raise PartitionError("state outside the domain")
        return m.argmax(axis=1)

    def to_dict(self) -> dict:
        return {
            "cells": [
                {
                    "lower": self.lower[q].tolist(),
                    "upper": self.upper[q].tolist(),
                    "strict_lower": self.strict_lower[q].tolist(),
                    "strict_upper": self.strict_upper[q].tolist(),
                }
                for q in range(self.size)
            ]
        }


Partition = GriddedPartition | GeneralPartition


def successors_generic(partition: GeneralPartition | GriddedPartition, y_lo, y_hi) -> set[int]:
    """Cells meeting ``[y_lo, y_hi]``, by comparing corners against every cell."""
    lo, hi, sl, su = partition.cell_arrays()
    y_lo = np.asarray(y_lo, dtype=float)
    y_hi = np.asarray(y_hi, dtype=float)
    a = np.where(sl, lo < y_hi, lo <= y_hi)
    b = np.where(su, y_lo < hi, y_lo <= hi)
    return set(np.flatnonzero(np.all(a & b, axis=1)).tolist())


def successors_gridded(partition: GriddedPartition, y_lo, y_hi) -> set[int]:
    """Cells meeting ``[y_lo, y_hi]`` from per-link interval index bounds."""
    jlo, jhi = partition.index_ranges(np.asarray(y_lo, dtype=float), np.asarray(y_hi, dtype=float))
    return set(partition.expand_ranges(jlo, jhi).tolist())


def coarsest_grid_refinement(partition: GeneralPartition) -> tuple[GriddedPartition, np.ndarray]:
    """Gridded refinement by all cell boundary coordinates, with a refined-to-original cell map."""
    cuts = []
    for l in range(partition.dim):
        c = np.unique(np.concatenate([[0.0, partition.caps[l]], partition.lower[:, l], partition.upper[:, l]]))
        cuts.append(c)
    grid = GriddedPartition(cuts)
    lo, hi, sl, su = grid.cell_arrays()
    # interval midpoints identify the unique original cell that must contain each refined cell
    mid = np.where(hi > lo, (lo + hi) / 2, lo)
    mapping = np.empty(grid.size, dtype=np.int64)
    for start in range(0, grid.size, 4096):
        sel = slice(start, start + 4096)
        m = partition.membership(mid[sel])
        owners = m.argmax(axis=1)
        if np.any(m.sum(axis=1) != 1):
            raise PartitionError("refinement point not covered by exactly one cell")
        ok = _contains_box(
            partition.lower[owners], partition.upper[owners],
            partition.strict_lower[owners], partition.strict_upper[owners],
            lo[sel], hi[sel], sl[sel], su[sel],
        )
        if not np.all(ok):
            bad = start + int(np.flatnonzero(~ok)[0])
            raise PartitionError(f"refined cell {grid.decode(bad)} straddles several original cells")
        mapping[sel] = owners
    return grid, mapping


def partition_from_dict(net: TrafficNetwork, data: Mapping) -> GriddedPartition | GeneralPartition:
    if "gridded" in data:
        return build_gridded(net, data["gridded"])
    if "cells" in data:
        cells = data["cells"]
        n = len(net.links)
        lo = np.array([c["lower"] for c in cells], dtype=float)
        hi = np.array([c["upper"] for c in cells], dtype=float)
        sl = np.array([c.get("strict_lower", [False] * n) for c in cells], dtype=bool)
        su = np.array([c.get("strict_upper", [False] * n) for c in cells], dtype=bool)
        if lo.shape[1:] != (n,):
            raise PartitionError("cell corner dimension does not match the number of links")
        return GeneralPartition(lo, hi, sl, su, caps=net.cap)
    raise PartitionError("partition config needs either 'gridded' or 'cells'")


def uniform_cuts(cap: float, pieces: int) -> list[float]:
    return [cap * i / pieces for i in range(pieces + 1)]

