"""Corner-point over-approximation of one-step reachable sets.

For a componentwise monotone update, each coordinate of the image of a box
is bounded by evaluating that coordinate's update at two corners of the box,
chosen by the sign pattern of its dependence on every other coordinate.
The general selection rule works for any signature matrix; the traffic
model supplies one derived from link adjacency.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import TrafficNetwork

CHUNK = 256


@dataclass(eq=False)
class Box:
    """Axis-aligned box ``lower <1 x <2 upper`` with per-coordinate strictness."""

    lower: np.ndarray
    upper: np.ndarray
    strict_lower: np.ndarray = field(default=None)
    strict_upper: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        n = self.lower.shape[0]
        if self.strict_lower is None:
            self.strict_lower = np.zeros(n, dtype=bool)
        if self.strict_upper is None:
            self.strict_upper = np.zeros(n, dtype=bool)
        self.strict_lower = np.asarray(self.strict_lower, dtype=bool)
        self.strict_upper = np.asarray(self.strict_upper, dtype=bool)
        if np.any(self.lower > self.upper):
            raise ValueError("box lower corner exceeds upper corner")

    @property
    def is_empty(self) -> bool:
        degenerate = self.lower == self.upper
        return bool(np.any(degenerate & (self.strict_lower | self.strict_upper)))

    def closure(self) -> "Box":
        return Box(self.lower.copy(), self.upper.copy())

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=float)
        lo_ok = np.where(self.strict_lower, x > self.lower, x >= self.lower)
        hi_ok = np.where(self.strict_upper, x < self.upper, x <= self.upper)
        return bool(np.all(lo_ok & hi_ok))

    def __repr__(self) -> str:
        parts = []
        for lo, hi, sl, su in zip(self.lower, self.upper, self.strict_lower, self.strict_upper):
            parts.append(f"{'(' if sl else '['}{lo:g},{hi:g}{')' if su else ']'}")
        return "Box(" + " x ".join(parts) + ")"


@dataclass(frozen=True, eq=False)
class SignatureMatrix:
    """Entry ``delta[i, j]`` is +1 if update ``i`` is nondecreasing in ``z_j``, -1 if nonincreasing."""

    delta: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.delta)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or not np.all(np.isin(d, (-1, 1))):
            raise ValueError("signature matrix must be square with entries in {-1, +1}")

    def corners(self, i: int, lower: np.ndarray, upper: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Arguments at which update ``i`` attains its minimum and maximum over the box."""
        pos = self.delta[i] > 0
        return np.where(pos, lower, upper), np.where(pos, upper, lower)

    def corner_rows(self, lower: np.ndarray, upper: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Batched corners: inputs ``(..., n)``, outputs ``(..., n, n)`` with row ``i`` for update ``i``."""
        pos = self.delta > 0
        lo = lower[..., None, :]
        hi = upper[..., None, :]
        return np.where(pos, lo, hi), np.where(pos, hi, lo)


def traffic_signature(net: TrafficNetwork) -> SignatureMatrix:
    n = len(net.links)
    delta = np.ones((n, n), dtype=int)
    for lid in net.link_ids:
        for k in net.adjacent[lid]:
            delta[net.index[lid], net.index[k]] = -1
    return SignatureMatrix(delta)


def corner_points(net: TrafficNetwork, l: str, box: Box) -> tuple[dict[str, float], dict[str, float]]:
    """Lower and upper corner arguments of link ``l``'s update, restricted to its local links."""
    sig = traffic_signature(net)
    lo, hi = sig.corners(net.index[l], box.lower, box.upper)
    loc = sorted(net.local(l), key=net.index.__getitem__)
    return ({k: float(lo[net.index[k]]) for k in loc}, {k: float(hi[net.index[k]]) for k in loc})


@dataclass
class ReachResult:
    boxes: list[Box]

    def contains(self, x: np.ndarray) -> bool:
        return any(b.contains(x) for b in self.boxes)


def over_post(net: TrafficNetwork, box: Box, s: int, signature: SignatureMatrix | None = None) -> ReachResult:
    """Union over disturbance boxes of the corner-point bound on the image of ``cl(box)``."""
    if box.is_empty:
        raise ValueError("over_post of an empty box")
    sig = signature or traffic_signature(net)
    s = getattr(s, "index", s)
    out = []
    n = len(net.links)
    for dbox in net.disturbance:
        lo = np.empty(n)
        hi = np.empty(n)
        for li in range(n):
            xi_lo, xi_hi = sig.corners(li, box.lower, box.upper)
            lo[li] = net.link_update(li, xi_lo, s, dbox.lower[li])
            hi[li] = net.link_update(li, xi_hi, s, dbox.upper[li])
        out.append(Box(lo, hi))
    return ReachResult(out)


def reach_bounds(
    net: TrafficNetwork,
    lower: np.ndarray,
    upper: np.ndarray,
    s: int,
    signature: SignatureMatrix | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised corner bounds for a batch of closed boxes.

    ``lower``/``upper`` have shape ``(B, n)``; returns arrays of shape
    ``(B, n_D, n)`` with the lower and upper reach corners per disturbance box.
    """
    sig = signature or traffic_signature(net)
    lower = np.atleast_2d(lower)
    upper = np.atleast_2d(upper)
    B, n = lower.shape
    nd = len(net.disturbance)
    dlo = np.stack([b.lower for b in net.disturbance])
    dhi = np.stack([b.upper for b in net.disturbance])
    y_lo = np.empty((B, nd, n))
    y_hi = np.empty((B, nd, n))
    for start in range(0, B, CHUNK):
        sl = slice(start, start + CHUNK)
        xi_lo, xi_hi = sig.corner_rows(lower[sl], upper[sl])
        for i in range(nd):
            y_lo[sl, i] = net.link_update_rows(xi_lo, s, dlo[i])
            y_hi[sl, i] = net.link_update_rows(xi_hi, s, dhi[i])
    return y_lo, y_hi
