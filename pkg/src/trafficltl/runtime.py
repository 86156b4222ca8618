"""Closed-loop simulation, baseline policies and finite-trace monitoring."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .logic.dra import Conjunct, classify, eval_bounded, letter_table
from .logic.formula import Formula, atoms, pretty
from .logic.labeling import evaluate_atoms
from .network import TrafficNetwork, step
from .synthesis import Controller, controller_step


class UniformDisturbance:
    """Seeded sampler over a union of disturbance boxes.

    A box is chosen with probability proportional to the product of its
    nonzero side lengths, then a point is drawn uniformly inside it.
    """

    def __init__(self, net: TrafficNetwork, seed: int | None = None, rng: np.random.Generator | None = None):
        self.lower = np.stack([b.lower for b in net.disturbance])
        self.upper = np.stack([b.upper for b in net.disturbance])
        sides = self.upper - self.lower
        weights = np.prod(np.where(sides > 0, sides, 1.0), axis=1)
        self.p = weights / weights.sum()
        self.rng = rng if rng is not None else np.random.default_rng(seed)

    def sample(self) -> np.ndarray:
        i = self.rng.choice(len(self.p), p=self.p)
        return self.lower[i] + (self.upper[i] - self.lower[i]) * self.rng.random(self.lower.shape[1])


def random_state(net: TrafficNetwork, rng: np.random.Generator) -> np.ndarray:
    return rng.random(len(net.links)) * net.cap


@dataclass(eq=False)
class Trace:
    """``x[t]``, ``s[t]``, ``d[t]`` for ``t < T`` with ``x[t+1] = step(x[t], s[t], d[t])``; ``final`` is ``x[T]``."""

    x: np.ndarray
    s: np.ndarray
    d: np.ndarray
    final: np.ndarray

    def __len__(self) -> int:
        return len(self.s)

    def states(self) -> np.ndarray:
        """All visited states including the final one, shape ``(T+1, n)``."""
        return np.vstack([self.x, self.final[None, :]])

    def to_csv(self, net: TrafficNetwork) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            ["t"]
            + [f"x_{l}" for l in net.link_ids]
            + [f"phase_{v}" for v in net.intersection_order]
            + [f"d_{l}" for l in net.link_ids]
        )
        for t in range(len(self)):
            phases = net.signals[int(self.s[t])].phases
            w.writerow([t] + [repr(float(v)) for v in self.x[t]] + list(phases) + [repr(float(v)) for v in self.d[t]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, net: TrafficNetwork, text: str) -> "Trace":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        n = len(net.link_ids)
        xi = [header.index(f"x_{l}") for l in net.link_ids]
        di = [header.index(f"d_{l}") for l in net.link_ids]
        pi = [header.index(f"phase_{v}") for v in net.intersection_order]
        x = np.array([[float(r[i]) for i in xi] for r in body]).reshape(-1, n)
        d = np.array([[float(r[i]) for i in di] for r in body]).reshape(-1, n)
        s = np.array([net.signal_from_phases([int(r[i]) for i in pi]).index for r in body], dtype=np.int64)
        final = step(net, x[-1], int(s[-1]), d[-1], check=False) if len(body) else np.zeros(n)
        return cls(x, s, d, final)


def simulate(
    net: TrafficNetwork,
    policy: Callable[[int, np.ndarray], int],
    x0: np.ndarray,
    d_source,
    T: int,
) -> Trace:
    """Run ``policy(t, x) -> signal index`` for ``T`` steps from ``x0``.

    ``d_source`` is a sampler with ``sample()`` or an array of shape ``(T, n)``.
    """
    n = len(net.links)
    x = np.asarray(x0, dtype=float).copy()
    if not net.in_domain(x):
        raise ValueError("initial state outside the domain")
    xs = np.empty((T, n))
    ss = np.empty(T, dtype=np.int64)
    ds = np.empty((T, n))
    replay = None if hasattr(d_source, "sample") else np.asarray(d_source, dtype=float)
    for t in range(T):
        s = int(policy(t, x))
        d = d_source.sample() if replay is None else replay[t]
        xs[t], ss[t], ds[t] = x, s, d
        x = step(net, x, s, d, check=replay is not None)
    return Trace(xs, ss, ds, x)


def controller_policy(controller: Controller, partition) -> Callable[[int, np.ndarray], int]:
    memory = [None]

    def policy(t: int, x: np.ndarray) -> int:
        if t == 0:
            memory[0] = None
        s, memory[0] = controller_step(controller, partition.project(x), memory[0])
        return s

    return policy


def simulate_closed_loop(net, controller: Controller, partition, x0, d_source, T: int) -> Trace:
    return simulate(net, controller_policy(controller, partition), x0, d_source, T)


def fixed_time_policy(net: TrafficNetwork, dwell: int = 4) -> Callable[[int, np.ndarray], int]:
    """Every intersection cycles through its phases in order, holding each for ``dwell`` steps, in sync."""
    if dwell < 1:
        raise ValueError("dwell must be positive")
    counts = [len(net.inter_by_id[v].phases) for v in net.intersection_order]

    def policy(t: int, x: np.ndarray) -> int:
        k = t // dwell
        return net.signal_from_phases([k % c for c in counts]).index

    return policy


# -- monitoring -----------------------------------------------------------------

@dataclass
class ConjunctVerdict:
    formula: str
    kind: str
    outcome: str
    evidence: dict = field(default_factory=dict)


@dataclass
class Verdict:
    outcome: str
    conjuncts: list[ConjunctVerdict]

    def to_dict(self) -> dict:
        return {"outcome": self.outcome, "conjuncts": [c.__dict__ for c in self.conjuncts]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def outcome_of(self, text: str) -> str:
        for c in self.conjuncts:
            if c.formula == text:
                return c.outcome
        raise KeyError(text)


def _windows(truth: np.ndarray, k: int) -> np.ndarray:
    """Stack of shifted letter arrays for bounded evaluation at t = 0..T-1-k."""
    T = len(truth)
    return np.stack([truth[j:T - k + j] for j in range(k + 1)])


def _monitor_conjunct(c: Conjunct, word: np.ndarray, aps, T: int, W: int, H: int) -> ConjunctVerdict:
    text = pretty(c.formula)
    if c.kind == "safety":
        k = c.depth
        if T - k <= 0:
            return ConjunctVerdict(text, c.kind, "pass", {"checked_positions": 0})
        ok = eval_bounded(c.parts[0], _windows(word, k), 0, {a: i for i, a in enumerate(aps)})
        bad = np.flatnonzero(~ok)
        if len(bad):
            return ConjunctVerdict(text, c.kind, "fail", {"violation_time": int(bad[0])})
        return ConjunctVerdict(text, c.kind, "pass", {"checked_positions": int(T - k)})

    def truth(b):
        return letter_table(b, aps)[word]

    half = T // 2
    if c.kind == "recurrence":
        b = truth(c.parts[0])[half:]
        hits = np.flatnonzero(b)
        if len(hits) == 0:
            return ConjunctVerdict(text, c.kind, "fail", {"occurrences_in_final_half": 0})
        gaps = np.diff(np.concatenate([[-1], hits, [len(b)]]))
        max_gap = int(gaps.max()) - 1
        w = min(W, len(b))
        csum = np.concatenate([[0], np.cumsum(b)])
        per_window = csum[w:] - csum[:-w] if w > 0 else np.ones(1)
        outcome = "pass" if np.all(per_window > 0) else "inconclusive"
        return ConjunctVerdict(text, c.kind, outcome, {"max_gap": max_gap, "window": int(w)})
    if c.kind == "persistence":
        b = truth(c.parts[0])
        viol = np.flatnonzero(~b)
        onset = 0 if len(viol) == 0 else int(viol[-1]) + 1
        if onset <= half:
            return ConjunctVerdict(text, c.kind, "pass", {"onset": onset})
        return ConjunctVerdict(text, c.kind, "fail", {"last_violation": int(viol[-1])})
    if c.kind == "response":
        trig = truth(c.parts[0])
        ans = truth(c.parts[1])
        # next answer at or after each t
        nxt = np.full(T + 1, np.iinfo(np.int64).max // 2, dtype=np.int64)
        for t in range(T - 1, -1, -1):
            nxt[t] = t if ans[t] else nxt[t + 1]
        times = np.flatnonzero(trig)
        late = times[nxt[times] - times > H]
        decided = late[late <= T - 1 - H]
        if len(decided):
            return ConjunctVerdict(text, c.kind, "fail", {"unanswered_trigger": int(decided[0])})
        pending = times[nxt[times] >= T]
        if len(pending):
            return ConjunctVerdict(text, c.kind, "inconclusive", {"pending_trigger": int(pending[0])})
        return ConjunctVerdict(text, c.kind, "pass", {"triggers": int(len(times))})
    raise ValueError(f"unknown conjunct kind {c.kind}")


def monitor_trace(
    net: TrafficNetwork,
    trace: Trace,
    formula: Formula,
    window: int | None = None,
    horizon: int | None = None,
) -> Verdict:
    """Finite-trace verdict per conjunct; thresholds are evaluated on the trace states themselves."""
    parts = classify(formula)
    aps = atoms(formula)
    T = len(trace)
    W = max(1, T // 4) if window is None else window
    H = max(1, T // 4) if horizon is None else horizon
    word = np.array([evaluate_atoms(net, aps, trace.x[t], int(trace.s[t])) for t in range(T)], dtype=np.int64)
    results = [_monitor_conjunct(c, word, aps, T, W, H) for c in parts]
    outcomes = {r.outcome for r in results}
    overall = "fail" if "fail" in outcomes else "inconclusive" if "inconclusive" in outcomes else "pass"
    return Verdict(overall, results)
