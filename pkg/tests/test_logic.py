import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from conftest import CASE_FORMULA
from oracles import PROPS, random_fragment_formula, random_lasso

from trafficltl import GriddedPartition, build_gridded
from trafficltl.logic import (
    And,
    Const,
    Finally,
    FormulaError,
    Globally,
    HOAError,
    Implies,
    Next,
    Not,
    Or,
    PhaseAP,
    Prop,
    RabinAutomaton,
    SignalAP,
    StateAP,
    Until,
    accepts_lasso,
    atoms,
    classify,
    compile_to_dra,
    evaluate_atoms,
    export_hoa,
    holds_on_lasso,
    import_hoa,
    label_partition,
    parse_formula,
    pretty,
)

p, q, r = PROPS


# -- parsing ---------------------------------------------------------------------

def test_parse_persistence_formula():
    f = parse_formula("F G (x[1] <= 30 & x[2] <= 30 & x[3] <= 30 & x[4] <= 30)")
    aps = [StateAP(str(i), "<=", 30.0) for i in range(1, 5)]
    assert f == Finally(Globally(And(And(And(aps[0], aps[1]), aps[2]), aps[3])))


def test_precedence_and_associativity():
    assert parse_formula("G F p") == parse_formula("G (F p)")
    assert parse_formula("a -> b -> c") == Implies(Prop("a"), Implies(Prop("b"), Prop("c")))
    assert parse_formula("a U b U c") == Until(Prop("a"), Until(Prop("b"), Prop("c")))
    assert parse_formula("a | b & c") == Or(Prop("a"), And(Prop("b"), Prop("c")))
    assert parse_formula("a & b U c") == And(Prop("a"), Until(Prop("b"), Prop("c")))
    assert parse_formula("!a U X b") == Until(Not(Prop("a")), Next(Prop("b")))
    assert parse_formula("a | b -> c") == Implies(Or(Prop("a"), Prop("b")), Prop("c"))


def test_atom_forms():
    assert parse_formula("x[3] >= 12.5") == StateAP("3", ">=", 12.5)
    assert parse_formula("7 in sig") == SignalAP("7")
    assert parse_formula("sig(v1) == {5,6}") == PhaseAP("v1", frozenset({"5", "6"}))
    assert parse_formula("sig(v2) == 1") == PhaseAP("v2", 1)
    assert parse_formula("true & !false") == And(Const(True), Not(Const(False)))


@pytest.mark.parametrize(
    "text, pos",
    [("G (p & )", 7), ("x[1] < 3", 5), ("p q", 2), ("(p", 2), ("p # q", 2), ("sig(v) = 1", 7), ("F", 1)],
)
def test_syntax_errors_carry_positions(text, pos):
    with pytest.raises(FormulaError) as info:
        parse_formula(text)
    assert info.value.pos == pos
    assert "^" in str(info.value)


def test_resolution_errors(case_net):
    with pytest.raises(FormulaError, match="link '99'"):
        parse_formula("G x[99] <= 3", case_net)
    with pytest.raises(FormulaError, match="v9"):
        parse_formula("G sig(v9) == 0", case_net)
    with pytest.raises(FormulaError):
        parse_formula("G x[1] <= 41", case_net)
    with pytest.raises(FormulaError):
        parse_formula("G sig(v1) == {2}", case_net)
    with pytest.raises(FormulaError):
        parse_formula("G sig(v1) == 7", case_net)
    with pytest.raises(FormulaError):
        parse_formula("G F ready", case_net)
    parse_formula("G F (5 in sig & sig(v1) == {5,6})", case_net)


def _asts():
    atom = st.one_of(
        st.sampled_from([Prop("p"), Prop("q"), Const(True), Const(False), SignalAP("3")]),
        st.builds(lambda l, op, c: StateAP(l, op, c), st.sampled_from(["1", "2"]), st.sampled_from(["<=", ">="]),
                  st.sampled_from([0.0, 10.0, 12.5, 30.0])),
        st.builds(lambda v, ph: PhaseAP(v, ph), st.sampled_from(["v1", "v2"]),
                  st.one_of(st.integers(0, 3), st.frozensets(st.sampled_from(["1", "5", "6"]), max_size=2))),
    )
    return st.recursive(
        atom,
        lambda sub: st.one_of(
            st.builds(Not, sub), st.builds(Next, sub), st.builds(Globally, sub), st.builds(Finally, sub),
            st.builds(And, sub, sub), st.builds(Or, sub, sub), st.builds(Implies, sub, sub), st.builds(Until, sub, sub),
        ),
        max_leaves=12,
    )


@settings(max_examples=300, deadline=None)
@given(_asts())
def test_pretty_round_trip(f):
    assert parse_formula(pretty(f)) == f


# -- automata ----------------------------------------------------------------------

def test_recurrence_automaton():
    dra = compile_to_dra(parse_formula("G F p"))
    assert dra.n_states == 2 and not dra.E.any()
    assert dra.F.sum() == 1
    assert dra.F[dra.step(dra.initial, 1)]
    assert accepts_lasso(dra, [], [1])
    assert not accepts_lasso(dra, [], [0])


def test_persistence_automaton():
    dra = compile_to_dra(parse_formula("F G p"))
    assert dra.n_states == 2
    assert dra.E[dra.step(0, 0)] and dra.F[dra.step(0, 1)]
    assert accepts_lasso(dra, [0], [1])
    assert not accepts_lasso(dra, [], [1, 0])


def test_safety_monitor_without_violation():
    dra = compile_to_dra(parse_formula("G (p -> X q) & G (p | q)"))
    assert accepts_lasso(dra, [1], [3, 2])
    assert not accepts_lasso(dra, [1], [1])


def test_case_study_formula_compiles(case_net):
    dra = compile_to_dra(parse_formula(CASE_FORMULA, case_net))
    assert len(dra.aps) == 9
    assert dra.delta.shape == (dra.n_states, 1 << 9)
    assert [c.kind for c in classify(parse_formula(CASE_FORMULA))] == (
        ["recurrence"] * 4 + ["persistence"] + ["safety"] * 2
    )


def test_outside_fragment_is_rejected():
    with pytest.raises(FormulaError, match="p U q"):
        compile_to_dra(parse_formula("G F p & (p U q)"))
    with pytest.raises(FormulaError):
        compile_to_dra(parse_formula("G F (p & X q)"))


def test_true_conjunct_is_ignored():
    dra = compile_to_dra(parse_formula("true & G F p"))
    assert dra.n_states == 2


def test_minimization_preserves_language(rng):
    for _ in range(40):
        f = random_fragment_formula(rng)
        aps = atoms(f)
        big = compile_to_dra(f, minimize=False)
        small = compile_to_dra(f)
        assert small.n_states <= big.n_states
        for _ in range(20):
            pre, cyc = random_lasso(rng, 1 << len(aps))
            assert accepts_lasso(big, pre, cyc) == accepts_lasso(small, pre, cyc)


def test_fragment_agrees_with_lasso_semantics(rng):
    for _ in range(150):
        f = random_fragment_formula(rng)
        aps = atoms(f)
        dra = compile_to_dra(f)
        for _ in range(40):
            pre, cyc = random_lasso(rng, 1 << len(aps))
            assert accepts_lasso(dra, pre, cyc) == holds_on_lasso(f, pre, cyc, aps), pretty(f)


def test_lasso_semantics_examples():
    aps = [p, q]
    assert holds_on_lasso(parse_formula("p U q"), [1, 1], [2], aps)
    assert not holds_on_lasso(parse_formula("p U q"), [1, 0], [2], aps)
    assert not holds_on_lasso(parse_formula("p U q"), [], [1], aps)
    assert holds_on_lasso(parse_formula("X X q"), [0, 0], [2], aps)
    assert holds_on_lasso(parse_formula("G F q"), [], [0, 0, 2], aps)
    assert not holds_on_lasso(parse_formula("F G q"), [], [0, 2], aps)


def test_letter_helpers():
    dra = compile_to_dra(parse_formula("G F (p & q)"))
    assert dra.letter({"p", "q"}) == 3
    assert dra.letter({p: True, q: False}) == 1
    assert dra.letter(2) == 2
    assert dra.run([3, 3]) == [0, dra.step(0, 3), dra.step(dra.step(0, 3), 3)]
    with pytest.raises(KeyError):
        dra.letter({"r"})


def test_automaton_shape_checks():
    with pytest.raises(ValueError):
        RabinAutomaton((p,), np.array([[0]]), 0, [False], [True])
    with pytest.raises(ValueError):
        RabinAutomaton((p,), np.array([[0, 1]]), 0, [False], [True])


# -- HOA ---------------------------------------------------------------------------

GF_P_HOA = """HOA: v1
States: 2
Start: 0
AP: 1 "p"
Acceptance: 2 Fin(0) & Inf(1)
--BODY--
State: 0
[!0] 0
[0] 1
State: 1 {1}
[!0] 0
[0] 1
--END--
"""


def test_hand_written_hoa_matches_compiler(rng):
    imported = import_hoa(GF_P_HOA)
    compiled = compile_to_dra(parse_formula("G F p"))
    assert imported.aps == (p,)
    for _ in range(100):
        pre, cyc = random_lasso(rng, 2)
        assert accepts_lasso(imported, pre, cyc) == accepts_lasso(compiled, pre, cyc)


def test_export_import_round_trip(rng):
    for _ in range(20):
        f = random_fragment_formula(rng)
        dra = compile_to_dra(f)
        again = import_hoa(export_hoa(dra, pretty(f)), expected_aps=dra.aps)
        assert np.array_equal(again.delta, dra.delta)
        assert np.array_equal(again.E, dra.E) and np.array_equal(again.F, dra.F)
        assert again.aps == dra.aps


def test_export_of_state_atoms_reimports(case_net):
    dra = compile_to_dra(parse_formula("G F (x[1] <= 30 & 5 in sig)"))
    again = import_hoa(export_hoa(dra))
    assert again.aps == (StateAP("1", "<=", 30.0), SignalAP("5"))


@pytest.mark.parametrize(
    "edit, fragment",
    [
        (lambda t: t.replace("Fin(0) & Inf(1)", "Inf(0)").replace("Acceptance: 2", "Acceptance: 1"), "Rabin pair"),
        (lambda t: t.replace("[!0] 0\n[0] 1\nState: 1", "[0] 1\nState: 1"), "no edge"),
        (lambda t: t.replace("[0] 1\nState: 1", "[0] 1\n[0] 0\nState: 1"), "nondeterministic"),
        (lambda t: t.replace("[0] 1\n--END--", "[0] 1 {1}\n--END--"), "transition-based"),
        (lambda t: t.replace("HOA: v1", "HOA: v2"), "version"),
        (lambda t: t.replace("Start: 0\n", ""), "initial"),
        (lambda t: t.replace("Start: 0", "Start: 0&1"), "universal|initial"),
        (lambda t: t.replace("--END--\n", ""), "END"),
        (lambda t: t.replace("Fin(0) & Inf(1)", "Fin(0) & Inf(1) | Fin(2) & Inf(3)").replace(
            "Acceptance: 2", "Acceptance: 4"), "Rabin pair"),
    ],
)
def test_hoa_rejections(edit, fragment):
    with pytest.raises(HOAError, match=fragment):
        import_hoa(edit(GF_P_HOA))


def test_hoa_ap_order_checked():
    with pytest.raises(HOAError):
        import_hoa(GF_P_HOA, expected_aps=(q,))


# -- labeling ---------------------------------------------------------------------

def test_threshold_labeling(one_link):
    part = GriddedPartition([[0, 20, 40]])
    lab = label_partition(one_link, part, [StateAP("1", "<=", 20.0), StateAP("1", ">=", 20.0)])
    assert lab.state_bits.tolist() == [1, 2]


def test_misaligned_threshold(one_link):
    part = GriddedPartition([[0, 20, 40]])
    with pytest.raises(FormulaError, match=r"25.*link '1'.*nearest cuts are 20 and 40"):
        label_partition(one_link, part, [StateAP("1", "<=", 25.0)])


def test_phase_labeling(case_net):
    part = build_gridded(case_net, {})
    lab = label_partition(case_net, part, [PhaseAP("v1", frozenset({"5", "6"})), SignalAP("1")])
    phase = (lab.signal_bits & 1).astype(bool)
    link1 = (lab.signal_bits & 2).astype(bool)
    assert phase.sum() == 8 and link1.sum() == 8
    assert not np.any(phase & link1)


def test_labeling_rejects_free_propositions(case_net):
    with pytest.raises(FormulaError):
        label_partition(case_net, build_gridded(case_net, {}), [Prop("p")])


def test_exact_evaluation_on_states(case_net):
    aps = [StateAP("1", "<=", 30.0), StateAP("2", ">=", 10.0), SignalAP("1")]
    x = np.zeros(10)
    x[0], x[1] = 30.0, 10.0
    s = next(sg.index for sg in case_net.signals if "1" in sg.links)
    assert evaluate_atoms(case_net, aps, x, s) == 0b111
    x[0] = 30.5
    assert evaluate_atoms(case_net, aps, x, s) == 0b110


def test_labels_agree_with_exact_evaluation(case_net, case_partition, rng):
    aps = atoms(parse_formula(CASE_FORMULA, case_net))
    lab = label_partition(case_net, case_partition, aps)
    caps = case_net.cap
    state_mask = sum(1 << i for i, a in enumerate(aps) if isinstance(a, StateAP))
    for _ in range(500):
        x = rng.random(10) * caps
        cell = case_partition.project(x)
        exact = evaluate_atoms(case_net, aps, x, 0) & state_mask
        # whole-cell labels imply the exact value
        assert lab.state_bits[cell] & ~exact == 0
        # only points on a cut can differ
        if np.all(np.abs(x[:4, None] - np.array([10, 20, 30, 40])) > 1e-9):
            assert lab.state_bits[cell] == exact
