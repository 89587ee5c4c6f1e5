import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _builders import (
    ALARM_P_B_GIVEN_NC,
    ALARM_P_E_GIVEN_N,
    ALARM_P_FULL_POSITIVE,
    alarm_model,
    chain_model,
    single_node_model,
)
from simnet.core import (
    AssessedKnowledgeMap,
    ConditionalTable,
    ExpansionOrder,
    ImpossibleEvidenceError,
    KnowledgeMap,
    Variable,
    d_separated,
    is_superfluous_arc,
    joint_from_map,
    query_conditional,
    reverse_arc,
    validate_map,
)


def random_assessed_map(rng, n_vars, max_card=2, root_name="v"):
    """Random DAG over a fixed variable order with random positive tables."""
    names = [f"{root_name}{i}" for i in range(n_vars)]
    cards = [int(rng.integers(2, max_card + 1)) for _ in names]
    variables = tuple(
        Variable(n, tuple(f"c{k}" for k in range(c))) for n, c in zip(names, cards)
    )
    arcs = set()
    for j in range(n_vars):
        for i in range(j):
            if rng.random() < 0.4:
                arcs.add((names[i], names[j]))
    km = KnowledgeMap(variables, frozenset(arcs))
    tables = {}
    for j, v in enumerate(variables):
        parents = tuple(n for n in names if (n, v.name) in arcs)
        n_rows = int(np.prod([cards[names.index(p)] for p in parents])) if parents else 1
        raw = rng.random((n_rows, cards[j])) + 0.05
        rows = raw / raw.sum(axis=1, keepdims=True)
        tables[v.name] = ConditionalTable(v.name, parents, rows)
    return AssessedKnowledgeMap(km, tables)


class TestValidation:
    def test_alarm_model_is_clean(self):
        report = validate_map(alarm_model())
        assert report.ok
        assert report.errors == ()

    def test_unnormalized_row_is_reported(self):
        report = validate_map(single_node_model([0.6, 0.5]))
        assert not report.ok
        assert any("sum" in e for e in report.errors)

    def test_two_cycle_is_reported(self):
        v = (Variable("x", ("a", "b")), Variable("y", ("a", "b")))
        km = KnowledgeMap(v, frozenset({("x", "y"), ("y", "x")}))
        akm = AssessedKnowledgeMap(
            km,
            {
                "x": ConditionalTable("x", ("y",), np.array([[0.5, 0.5], [0.5, 0.5]])),
                "y": ConditionalTable("y", ("x",), np.array([[0.5, 0.5], [0.5, 0.5]])),
            },
        )
        report = validate_map(akm)
        assert any("cycle" in e for e in report.errors)

    def test_parent_mismatch_is_reported(self):
        v = (Variable("x", ("a", "b")), Variable("y", ("a", "b")))
        km = KnowledgeMap(v, frozenset({("x", "y")}))
        akm = AssessedKnowledgeMap(
            km,
            {
                "x": ConditionalTable("x", (), np.array([[0.5, 0.5]])),
                "y": ConditionalTable("y", (), np.array([[0.5, 0.5]])),
            },
        )
        report = validate_map(akm)
        assert any("parent" in e for e in report.errors)

    def test_distinguished_with_predecessor_is_reported(self):
        v = (Variable("x", ("a", "b")), Variable("h", ("a", "b")))
        km = KnowledgeMap(v, frozenset({("x", "h")}), distinguished="h")
        akm = AssessedKnowledgeMap(
            km,
            {
                "x": ConditionalTable("x", (), np.array([[0.5, 0.5]])),
                "h": ConditionalTable("h", ("x",), np.array([[0.5, 0.5], [0.5, 0.5]])),
            },
        )
        report = validate_map(akm)
        assert any("distinguished" in e for e in report.errors)

    def test_zero_entries_warn_but_pass(self):
        report = validate_map(single_node_model([1.0, 0.0]))
        assert report.ok
        assert report.warnings


class TestJoint:
    def test_alarm_joint_sums_to_one(self):
        joint = joint_from_map(alarm_model())
        assert joint.probabilities.size == 32
        assert abs(joint.probabilities.sum() - 1.0) < 1e-9

    def test_alarm_full_positive_entry(self):
        joint = joint_from_map(alarm_model())
        p = joint.probability(
            {"BURGLARY": "yes", "EARTHQUAKE": "yes", "ALARM": "yes",
             "NEWSCAST": "yes", "CALL": "yes"}
        )
        assert p == pytest.approx(ALARM_P_FULL_POSITIVE, abs=1e-12)

    def test_single_node_identity(self):
        joint = joint_from_map(single_node_model([1.0, 0.0]))
        assert np.allclose(joint.probabilities, [1.0, 0.0])
        assert not joint.strictly_positive

    def test_two_independent_fair_coins(self):
        v = (Variable("x", ("h", "t")), Variable("y", ("h", "t")))
        km = KnowledgeMap(v, frozenset())
        akm = AssessedKnowledgeMap(
            km,
            {
                "x": ConditionalTable("x", (), np.array([[0.5, 0.5]])),
                "y": ConditionalTable("y", (), np.array([[0.5, 0.5]])),
            },
        )
        assert np.allclose(joint_from_map(akm).probabilities, 0.25)

    def test_state_cap_enforced(self):
        big = random_assessed_map(np.random.default_rng(0), 10)
        with pytest.raises(ValueError):
            joint_from_map(big, cap=2 ** 5)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10 ** 6), n=st.integers(1, 5))
    def test_random_joint_normalizes(self, seed, n):
        akm = random_assessed_map(np.random.default_rng(seed), n, max_card=3)
        joint = joint_from_map(akm)
        assert abs(joint.probabilities.sum() - 1.0) < 1e-9


class TestExpansionOrders:
    def test_consistency_flag(self):
        km = chain_model().map
        assert ExpansionOrder(("x", "y", "z")).consistent_with(km)
        assert not ExpansionOrder(("z", "y", "x")).consistent_with(km)

    def test_chain_rule_along_every_consistent_order(self):
        # Factoring the enumerated joint along any order consistent with the
        # arcs must reproduce node conditionals that depend on parents only.
        akm = random_assessed_map(np.random.default_rng(7), 4)
        km = akm.map
        names = [v.name for v in km.variables]
        for perm in itertools.permutations(names):
            order = ExpansionOrder(tuple(perm))
            if not order.consistent_with(km):
                continue
            for i, name in enumerate(perm):
                parents = set(km.parents_of(name))
                predecessors = list(perm[:i])
                for assignment in itertools.product(
                    *[km.variable(p).instances for p in predecessors]
                ):
                    ev = dict(zip(predecessors, assignment))
                    try:
                        full = query_conditional(akm, name, ev)
                    except ImpossibleEvidenceError:
                        continue
                    reduced_ev = {k: v for k, v in ev.items() if k in parents}
                    reduced = query_conditional(akm, name, reduced_ev)
                    assert np.allclose(full, reduced, atol=1e-9), (perm, name, ev)


class TestDSeparation:
    def test_burglary_call_blocked_by_alarm(self):
        km = alarm_model().map
        assert d_separated(km, {"BURGLARY"}, {"CALL"}, {"ALARM"})

    def test_marginal_independence_of_roots(self):
        km = alarm_model().map
        assert d_separated(km, {"EARTHQUAKE"}, {"BURGLARY"}, set())

    def test_explaining_away_opens_path(self):
        km = alarm_model().map
        assert not d_separated(km, {"EARTHQUAKE"}, {"BURGLARY"}, {"ALARM"})

    def test_descendant_of_collider_opens_path(self):
        km = alarm_model().map
        assert not d_separated(km, {"EARTHQUAKE"}, {"BURGLARY"}, {"CALL"})

    def test_unknown_variable_rejected(self):
        km = alarm_model().map
        with pytest.raises(ValueError):
            d_separated(km, {"nope"}, {"CALL"}, set())

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 10 ** 6))
    def test_numeric_soundness_on_random_maps(self, seed):
        # d-separation must imply conditional independence in the joint.
        rng = np.random.default_rng(seed)
        akm = random_assessed_map(rng, 5)
        km = akm.map
        names = [v.name for v in km.variables]
        for xn, yn in itertools.combinations(names, 2):
            rest = [n for n in names if n not in (xn, yn)]
            for r in range(len(rest) + 1):
                for zs in itertools.combinations(rest, r):
                    if not d_separated(km, {xn}, {yn}, set(zs)):
                        continue
                    assert _independent_in_joint(akm, xn, yn, zs)


def _independent_in_joint(akm, xn, yn, zs, atol=1e-9):
    km = akm.map
    z_vars = [km.variable(z) for z in zs]
    for assignment in itertools.product(*[v.instances for v in z_vars]):
        ev = dict(zip(zs, assignment))
        try:
            px = query_conditional(akm, xn, ev)
        except ImpossibleEvidenceError:
            continue
        for xi, x_label in enumerate(km.variable(xn).instances):
            try:
                py_given_x = query_conditional(akm, yn, {**ev, xn: x_label})
            except ImpossibleEvidenceError:
                continue
            py = query_conditional(akm, yn, ev)
            if px[xi] > 0 and not np.allclose(py_given_x, py, atol=atol):
                return False
    return True


class TestSuperfluousArcs:
    def test_identical_rows_make_arc_superfluous(self):
        v = (Variable("x", ("a", "b")), Variable("y", ("a", "b")))
        km = KnowledgeMap(v, frozenset({("x", "y")}))
        akm = AssessedKnowledgeMap(
            km,
            {
                "x": ConditionalTable("x", (), np.array([[0.4, 0.6]])),
                "y": ConditionalTable("y", ("x",), np.array([[0.3, 0.7], [0.3, 0.7]])),
            },
        )
        assert is_superfluous_arc(akm, ("x", "y"))

    def test_alarm_call_arc_is_needed(self):
        assert not is_superfluous_arc(alarm_model(), ("ALARM", "CALL"))

    def test_chain_first_arc_with_distinct_rows(self):
        assert not is_superfluous_arc(chain_model(), ("x", "y"))

    def test_missing_arc_rejected(self):
        with pytest.raises(ValueError):
            is_superfluous_arc(chain_model(), ("x", "z"))

    def test_removing_superfluous_arc_keeps_joint(self):
        v = (
            Variable("x", ("a", "b")),
            Variable("w", ("a", "b")),
            Variable("y", ("a", "b")),
        )
        km = KnowledgeMap(v, frozenset({("x", "y"), ("w", "y")}))
        rows = np.array([[0.3, 0.7], [0.8, 0.2], [0.3, 0.7], [0.8, 0.2]])
        akm = AssessedKnowledgeMap(
            km,
            {
                "x": ConditionalTable("x", (), np.array([[0.4, 0.6]])),
                "w": ConditionalTable("w", (), np.array([[0.9, 0.1]])),
                "y": ConditionalTable("y", ("x", "w"), rows),
            },
        )
        # rows repeat across x, so x -> y is superfluous
        assert is_superfluous_arc(akm, ("x", "y"))
        assert not is_superfluous_arc(akm, ("w", "y"))
        reduced_km = KnowledgeMap(v, frozenset({("w", "y")}))
        reduced = AssessedKnowledgeMap(
            reduced_km,
            {
                "x": akm.table("x"),
                "w": akm.table("w"),
                "y": ConditionalTable("y", ("w",), np.array([[0.3, 0.7], [0.8, 0.2]])),
            },
        )
        a = joint_from_map(akm).probabilities
        b = joint_from_map(reduced).probabilities
        assert np.allclose(a, b, atol=1e-9)


class TestArcReversal:
    def test_newscast_reversal_recovers_earthquake_posterior(self):
        akm = alarm_model()
        flipped = reverse_arc(akm, ("EARTHQUAKE", "NEWSCAST"))
        assert ("NEWSCAST", "EARTHQUAKE") in flipped.map.arcs
        table = flipped.table("EARTHQUAKE")
        assert table.parents == ("NEWSCAST",)
        # row for NEWSCAST=yes, instance EARTHQUAKE=yes
        p = table.rows[1, 1]
        assert p == pytest.approx(ALARM_P_E_GIVEN_N, abs=1e-12)
        assert p == pytest.approx(0.91, abs=0.005)

    def test_reversal_preserves_joint(self):
        akm = alarm_model()
        flipped = reverse_arc(akm, ("EARTHQUAKE", "NEWSCAST"))
        a = joint_from_map(akm)
        b = joint_from_map(flipped)
        assert a.variables == b.variables
        assert np.allclose(a.probabilities, b.probabilities, atol=1e-9)

    def test_independence_preserved_when_rows_equal(self):
        v = (Variable("x", ("a", "b")), Variable("y", ("a", "b")))
        km = KnowledgeMap(v, frozenset({("x", "y")}))
        akm = AssessedKnowledgeMap(
            km,
            {
                "x": ConditionalTable("x", (), np.array([[0.4, 0.6]])),
                "y": ConditionalTable("y", ("x",), np.array([[0.3, 0.7], [0.3, 0.7]])),
            },
        )
        flipped = reverse_arc(akm, ("x", "y"))
        assert np.allclose(flipped.table("x").rows[0], flipped.table("x").rows[1])

    def test_middle_arc_of_random_chain(self):
        akm = chain_model()
        flipped = reverse_arc(akm, ("y", "z"))
        assert np.allclose(
            joint_from_map(akm).probabilities,
            joint_from_map(flipped).probabilities,
            atol=1e-9,
        )

    def test_double_reversal_is_identity_for_shared_parents(self):
        # x and y share the parent w, so reversal twice restores the tables.
        v = (
            Variable("w", ("a", "b")),
            Variable("x", ("a", "b")),
            Variable("y", ("a", "b")),
        )
        km = KnowledgeMap(v, frozenset({("w", "x"), ("w", "y"), ("x", "y")}))
        rng = np.random.default_rng(3)
        x_rows = rng.random((2, 2)) + 0.1
        x_rows /= x_rows.sum(axis=1, keepdims=True)
        y_rows = rng.random((4, 2)) + 0.1
        y_rows /= y_rows.sum(axis=1, keepdims=True)
        akm = AssessedKnowledgeMap(
            km,
            {
                "w": ConditionalTable("w", (), np.array([[0.35, 0.65]])),
                "x": ConditionalTable("x", ("w",), x_rows),
                "y": ConditionalTable("y", ("w", "x"), y_rows),
            },
        )
        back = reverse_arc(reverse_arc(akm, ("x", "y")), ("y", "x"))
        for name in ("w", "x", "y"):
            assert back.table(name).parents == akm.table(name).parents
            assert np.allclose(back.table(name).rows, akm.table(name).rows, atol=1e-9)

    def test_reversal_blocked_by_second_path(self):
        # x -> w -> z alongside x -> z: flipping x -> z would close a cycle
        v = (
            Variable("x", ("f", "t")),
            Variable("w", ("f", "t")),
            Variable("z", ("f", "t")),
        )
        km = KnowledgeMap(v, frozenset({("x", "w"), ("w", "z"), ("x", "z")}))
        akm = AssessedKnowledgeMap(
            km,
            {
                "x": ConditionalTable("x", (), np.array([[0.3, 0.7]])),
                "w": ConditionalTable("w", ("x",), np.array([[0.2, 0.8], [0.9, 0.1]])),
                "z": ConditionalTable(
                    "z",
                    ("x", "w"),
                    np.array([[0.6, 0.4], [0.25, 0.75], [0.5, 0.5], [0.1, 0.9]]),
                ),
            },
        )
        with pytest.raises(ValueError):
            reverse_arc(akm, ("x", "z"))


class TestQueryConditional:
    def test_burglary_given_newscast_and_call(self):
        p = query_conditional(
            alarm_model(), "BURGLARY", {"NEWSCAST": "yes", "CALL": "yes"}
        )
        assert p[1] == pytest.approx(ALARM_P_B_GIVEN_NC, abs=1e-12)
        assert p[1] == pytest.approx(0.0045, abs=1e-3)

    def test_no_evidence_returns_prior(self):
        p = query_conditional(alarm_model(), "BURGLARY", {})
        assert np.allclose(p, [0.997, 0.003])

    def test_earthquake_given_newscast(self):
        p = query_conditional(alarm_model(), "EARTHQUAKE", {"NEWSCAST": "yes"})
        assert p[1] == pytest.approx(0.91, abs=0.005)

    def test_impossible_evidence_raises(self):
        akm = single_node_model([1.0, 0.0])
        v = akm.map.variables[0]
        bigger = AssessedKnowledgeMap(
            KnowledgeMap(
                (v, Variable("y", ("a", "b"))), frozenset({("x", "y")})
            ),
            {
                "x": akm.table("x"),
                "y": ConditionalTable("y", ("x",), np.array([[0.5, 0.5], [0.5, 0.5]])),
            },
        )
        with pytest.raises(ImpossibleEvidenceError):
            query_conditional(bigger, "y", {"x": "i1"})
