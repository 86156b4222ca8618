"""HOA v1 reading and writing for one-pair Rabin automata with state-based acceptance."""
from __future__ import annotations

import re
from typing import Sequence

import numpy as np

from .dra import RabinAutomaton
from .formula import Atom, FormulaError, Prop, pretty_atom


class HOAError(ValueError):
    pass


def export_hoa(dra: RabinAutomaton, name: str | None = None) -> str:
    k = len(dra.aps)
    lines = ["HOA: v1"]
    if name:
        lines.append(f'name: "{name}"')
    lines += [
        f"States: {dra.n_states}",
        f"Start: {dra.initial}",
        "AP: " + " ".join([str(k)] + [f'"{pretty_atom(a)}"' for a in dra.aps]),
        "acc-name: Rabin 1",
        "Acceptance: 2 Fin(0) & Inf(1)",
        "properties: trans-labels explicit-labels state-acc deterministic complete",
        "--BODY--",
    ]
    for a in range(dra.n_states):
        acc = [str(i) for i, flag in ((0, dra.E[a]), (1, dra.F[a])) if flag]
        lines.append(f"State: {a}" + (f" {{{' '.join(acc)}}}" if acc else ""))
        targets = dra.delta[a]
        for t in dict.fromkeys(targets.tolist()):
            letters = np.flatnonzero(targets == t)
            if len(letters) == dra.n_letters:
                label = "t"
            else:
                terms = []
                for w in letters:
                    lits = [(str(i) if (w >> i) & 1 else f"!{i}") for i in range(k)]
                    terms.append("&".join(lits))
                label = " | ".join(terms)
            lines.append(f"[{label}] {t}")
    lines.append("--END--")
    return "\n".join(lines) + "\n"


_LABEL_TOKEN = re.compile(r"\s*(\d+|[tf!&|()])")


def _label_eval(expr: str, n_aps: int) -> np.ndarray:
    """Evaluate a label expression on every letter."""
    toks = []
    pos = 0
    expr = expr.strip()
    while pos < len(expr):
        m = _LABEL_TOKEN.match(expr, pos)
        if not m:
            raise HOAError(f"bad label expression {expr!r}")
        toks.append(m.group(1))
        pos = m.end()
        while pos < len(expr) and expr[pos].isspace():
            pos += 1
    letters = np.arange(1 << n_aps, dtype=np.int64)
    i = 0

    def disj():
        nonlocal i
        v = conj()
        while i < len(toks) and toks[i] == "|":
            i += 1
            v = v | conj()
        return v

    def conj():
        nonlocal i
        v = unary()
        while i < len(toks) and toks[i] == "&":
            i += 1
            v = v & unary()
        return v

    def unary():
        nonlocal i
        if i >= len(toks):
            raise HOAError(f"truncated label expression {expr!r}")
        t = toks[i]
        i += 1
        if t == "!":
            return ~unary()
        if t == "(":
            v = disj()
            if i >= len(toks) or toks[i] != ")":
                raise HOAError(f"unbalanced parentheses in {expr!r}")
            i += 1
            return v
        if t == "t":
            return np.ones(len(letters), bool)
        if t == "f":
            return np.zeros(len(letters), bool)
        if t.isdigit():
            ap = int(t)
            if ap >= n_aps:
                raise HOAError(f"label refers to undeclared proposition {ap}")
            return (letters >> ap) & 1 == 1
        raise HOAError(f"unexpected {t!r} in label {expr!r}")

    v = disj()
    if i != len(toks):
        raise HOAError(f"trailing tokens in label {expr!r}")
    return v


def _ap_atom(name: str) -> Atom:
    from .parser import parse_atom

    try:
        return parse_atom(name)
    except FormulaError:
        return Prop(name)


def import_hoa(text: str, expected_aps: Sequence[Atom] | None = None) -> RabinAutomaton:
    """Parse HOA text into a RabinAutomaton.

    The acceptance condition must be a single Rabin pair ``Fin(i) & Inf(j)``
    on states; the automaton must be deterministic and complete over the
    declared propositions. AP names are read as formula atoms where possible.
    """
    if "--BODY--" not in text:
        raise HOAError("missing --BODY-- separator")
    header, body = text.split("--BODY--", 1)
    if "--END--" not in body:
        raise HOAError("missing --END-- marker")
    body = body.split("--END--", 1)[0]

    n_states = None
    starts: list[str] = []
    ap_names: list[str] | None = None
    acceptance = None
    for raw in header.splitlines():
        line = raw.strip()
        if not line:
            continue
        key, _, rest = line.partition(":")
        rest = rest.strip()
        if key == "HOA":
            if rest != "v1":
                raise HOAError(f"unsupported HOA version {rest!r}")
        elif key == "States":
            n_states = int(rest)
        elif key == "Start":
            starts.append(rest)
        elif key == "AP":
            parts = re.findall(r'"((?:[^"\\]|\\.)*)"', rest)
            count = int(rest.split()[0])
            if count != len(parts):
                raise HOAError("AP count does not match the listed names")
            ap_names = parts
        elif key == "Acceptance":
            acceptance = rest
        elif key == "Alias":
            raise HOAError("aliases are not supported")
    if ap_names is None:
        raise HOAError("missing AP header")
    if acceptance is None:
        raise HOAError("missing Acceptance header")
    m = re.fullmatch(r"(\d+)\s+(.*)", acceptance)
    if not m:
        raise HOAError(f"malformed acceptance {acceptance!r}")
    cond = m.group(2).replace(" ", "")
    pair = re.fullmatch(r"Fin\((\d+)\)&Inf\((\d+)\)", cond) or re.fullmatch(r"Inf\((\d+)\)&Fin\((\d+)\)", cond)
    if not pair or int(m.group(1)) != 2:
        raise HOAError(f"acceptance must be exactly one Rabin pair Fin(i) & Inf(j), got {acceptance!r}")
    if cond.startswith("Fin"):
        fin_set, inf_set = int(pair.group(1)), int(pair.group(2))
    else:
        inf_set, fin_set = int(pair.group(1)), int(pair.group(2))
    if fin_set == inf_set:
        raise HOAError("Fin and Inf must refer to different acceptance sets")
    if len(starts) != 1 or not starts[0].isdigit():
        raise HOAError("exactly one initial state is required")

    k = len(ap_names)
    aps = tuple(_ap_atom(n) for n in ap_names)
    if len(set(aps)) != k:
        raise HOAError("duplicate propositions in AP header")
    if expected_aps is not None and tuple(expected_aps) != aps:
        raise HOAError(
            "AP order mismatch: expected "
            + ", ".join(pretty_atom(a) for a in expected_aps)
            + " but found "
            + ", ".join(pretty_atom(a) for a in aps)
        )

    states: dict[int, dict] = {}
    current = None
    for raw in body.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("State:"):
            sm = re.fullmatch(r'State:\s*(\d+)\s*(?:"[^"]*")?\s*(\{[\d\s]*\})?', line)
            if not sm:
                if re.match(r"State:\s*\[", line):
                    raise HOAError("state labels are not supported; use transition labels")
                raise HOAError(f"malformed state line {line!r}")
            current = int(sm.group(1))
            if current in states:
                raise HOAError(f"state {current} declared twice")
            accs = {int(x) for x in sm.group(2)[1:-1].split()} if sm.group(2) else set()
            states[current] = {"acc": accs, "edges": []}
            continue
        if current is None:
            raise HOAError(f"edge before any state: {line!r}")
        em = re.fullmatch(r"\[([^\]]*)\]\s*(\d+)\s*(\{[\d\s]*\})?", line)
        if not em:
            if re.fullmatch(r"[\d&\s]+", line):
                raise HOAError("implicit labels are not supported; edges need explicit labels")
            raise HOAError(f"malformed edge {line!r}")
        if em.group(3):
            raise HOAError("transition-based acceptance is not supported")
        target = em.group(2)
        if "&" in target:
            raise HOAError("universal branching is not supported")
        states[current]["edges"].append((_label_eval(em.group(1), k), int(target)))

    n = n_states if n_states is not None else len(states)
    if sorted(states) != list(range(n)):
        raise HOAError(f"states must be numbered 0..{n - 1}")
    delta = np.full((n, 1 << k), -1, dtype=np.int64)
    for s, info in states.items():
        for mask, t in info["edges"]:
            if not 0 <= t < n:
                raise HOAError(f"edge from state {s} to undeclared state {t}")
            clash = mask & (delta[s] >= 0) & (delta[s] != t)
            if clash.any():
                raise HOAError(f"state {s} is nondeterministic on letter {int(np.flatnonzero(clash)[0])}")
            delta[s][mask] = t
        if np.any(delta[s] < 0):
            missing = int(np.flatnonzero(delta[s] < 0)[0])
            raise HOAError(f"state {s} has no edge for letter {missing}; the automaton must be complete")
    E = np.array([fin_set in states[s]["acc"] for s in range(n)])
    F = np.array([inf_set in states[s]["acc"] for s in range(n)])
    start = int(starts[0])
    if not 0 <= start < n:
        raise HOAError("initial state out of range")
    return RabinAutomaton(aps, delta, start, E, F)
