"""Cluster-factorized posterior computation against brute-force oracles.

The chain-cluster likelihoods 0.5775 and 0.63 were computed by hand
(nested sums over the 2x2x2 tables below) before the module existed.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simnet.core import (
    AssessedKnowledgeMap,
    ConditionalTable,
    ImpossibleEvidenceError,
    KnowledgeMap,
    Variable,
    query_conditional,
)
from simnet.inference import (
    ClusterDecomposition,
    Differential,
    Evidence,
    cluster_likelihood,
    decompose_clusters,
    posterior,
    weight_of_evidence,
)

from _builders import random_evidence, random_hyp_model

B = ("neg", "pos")


def simple_bayes(priors, rows_by_feature):
    """h plus independent features, p(feature | h) given per feature."""
    n = len(priors)
    hvar = Variable("h", tuple(f"d{i}" for i in range(n)))
    feats = tuple(Variable(name, B) for name in rows_by_feature)
    km = KnowledgeMap(
        (hvar,) + feats,
        frozenset(("h", name) for name in rows_by_feature),
        distinguished="h",
    )
    tables = {"h": ConditionalTable("h", (), np.array([list(priors)]))}
    for name, rows in rows_by_feature.items():
        tables[name] = ConditionalTable(name, ("h",), np.array(rows))
    return AssessedKnowledgeMap(km, tables)


def chain_cluster_model():
    """h -> x, then a feature chain x -> y -> z forming one cluster."""
    hvar = Variable("h", ("d0", "d1"))
    x, y, z = (Variable(n, B) for n in "xyz")
    km = KnowledgeMap(
        (hvar, x, y, z),
        frozenset({("h", "x"), ("x", "y"), ("y", "z")}),
        distinguished="h",
    )
    tables = {
        "h": ConditionalTable("h", (), np.array([[0.5, 0.5]])),
        "x": ConditionalTable("x", ("h",), np.array([[0.3, 0.7], [0.6, 0.4]])),
        "y": ConditionalTable("y", ("x",), np.array([[0.2, 0.8], [0.9, 0.1]])),
        "z": ConditionalTable("z", ("y",), np.array([[0.5, 0.5], [0.25, 0.75]])),
    }
    return AssessedKnowledgeMap(km, tables)


class TestEvidence:
    def test_duplicate_feature_rejected(self):
        with pytest.raises(ValueError, match="once"):
            Evidence((("x", "pos"), ("x", "neg")))

    def test_helpers(self):
        e = Evidence((("x", "pos"), ("z", "neg")))
        assert e.features == ("x", "z")
        assert e.with_observation("y", "pos").features == ("x", "z", "y")
        assert e.without("x").features == ("z",)
        assert e.restricted_to({"z", "y"}).observations == (("z", "neg"),)


class TestDecompose:
    def test_simple_bayes_singletons(self):
        akm = simple_bayes(
            (0.5, 0.5), {"f1": [[0.9, 0.1], [0.1, 0.9]], "f2": [[0.5, 0.5], [0.5, 0.5]]}
        )
        dec = decompose_clusters(akm.map)
        assert dec.clusters == (("f1",), ("f2",))

    def test_chain_single_cluster(self):
        dec = decompose_clusters(chain_cluster_model().map)
        assert dec.clusters == (("x", "y", "z"),)

    def test_two_clusters(self):
        hvar = Variable("h", ("d0", "d1"))
        names = ["tonsils", "pus", "fever", "pain", "toxic"]
        feats = tuple(Variable(n, B) for n in names)
        arcs = {("h", n) for n in names} | {
            ("tonsils", "pus"),
            ("fever", "toxic"),
            ("pain", "toxic"),
        }
        km = KnowledgeMap((hvar,) + feats, frozenset(arcs), distinguished="h")
        dec = decompose_clusters(km)
        assert set(dec.clusters) == {
            ("pus", "tonsils"),
            ("fever", "pain", "toxic"),
        }

    def test_cluster_for(self):
        dec = decompose_clusters(chain_cluster_model().map)
        assert dec.cluster_for("y") == ("x", "y", "z")


class TestClusterLikelihood:
    def test_hand_computed_chain(self):
        akm = chain_cluster_model()
        obs = Evidence((("z", "pos"),))
        assert math.isclose(
            cluster_likelihood(akm, ("x", "y", "z"), obs, "d0"), 0.5775, abs_tol=1e-12
        )
        assert math.isclose(
            cluster_likelihood(akm, ("x", "y", "z"), obs, "d1"), 0.63, abs_tol=1e-12
        )

    def test_single_variable_cluster_is_lookup(self):
        akm = simple_bayes((0.5, 0.5), {"f1": [[0.9, 0.1], [0.1, 0.9]]})
        obs = Evidence((("f1", "pos"),))
        assert cluster_likelihood(akm, ("f1",), obs, "d0") == pytest.approx(0.1, abs=0)
        assert cluster_likelihood(akm, ("f1",), obs, "d1") == pytest.approx(0.9, abs=0)

    def test_deterministic_contradiction_scores_zero(self):
        hvar = Variable("h", ("d0", "d1"))
        a = Variable("a", B)
        t = Variable("t", B)
        km = KnowledgeMap(
            (hvar, a, t), frozenset({("h", "a"), ("a", "t")}), distinguished="h"
        )
        tables = {
            "h": ConditionalTable("h", (), np.array([[0.5, 0.5]])),
            "a": ConditionalTable("a", ("h",), np.array([[0.4, 0.6], [0.7, 0.3]])),
            "t": ConditionalTable("t", ("a",), np.array([[1.0, 0.0], [0.0, 1.0]])),
        }
        akm = AssessedKnowledgeMap(km, tables)
        obs = Evidence((("a", "neg"), ("t", "pos")))
        assert cluster_likelihood(akm, ("a", "t"), obs, "d0") == 0.0

    def test_elimination_variant_agrees(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            akm = random_hyp_model(rng, max_feats=6)
            ev = random_evidence(rng, akm)
            if not ev:
                continue
            obs = Evidence(ev)
            dec = decompose_clusters(akm.map)
            hyp = akm.map.variables[0].instances[0]
            for cluster in dec.clusters:
                if not obs.restricted_to(set(cluster)).observations:
                    continue
                direct = cluster_likelihood(akm, cluster, obs, hyp)
                ordered = cluster_likelihood(
                    akm, cluster, obs, hyp, method="eliminate"
                )
                assert math.isclose(direct, ordered, rel_tol=0, abs_tol=1e-9)


class TestPosterior:
    def test_empty_evidence_returns_prior(self):
        akm = simple_bayes((0.3, 0.7), {"f1": [[0.9, 0.1], [0.1, 0.9]]})
        d = posterior(akm, Evidence(()))
        assert d.probability("d0") == pytest.approx(0.3, abs=1e-12)
        assert d.probability("d1") == pytest.approx(0.7, abs=1e-12)

    def test_two_hypothesis_bayes(self):
        akm = simple_bayes((0.5, 0.5), {"f1": [[0.1, 0.9], [0.9, 0.1]]})
        d = posterior(akm, Evidence((("f1", "pos"),)))
        assert d.probability("d0") == pytest.approx(0.9, abs=1e-12)
        assert d.probability("d1") == pytest.approx(0.1, abs=1e-12)
        assert d.ranked[0] == ("d0", pytest.approx(0.9, abs=1e-12))

    def test_impossible_evidence_errors(self):
        akm = simple_bayes((0.5, 0.5), {"f1": [[1.0, 0.0], [1.0, 0.0]]})
        with pytest.raises(ImpossibleEvidenceError):
            posterior(akm, Evidence((("f1", "pos"),)))

    def test_unknown_feature_or_instance(self):
        akm = simple_bayes((0.5, 0.5), {"f1": [[0.9, 0.1], [0.1, 0.9]]})
        with pytest.raises(ValueError):
            posterior(akm, Evidence((("nope", "pos"),)))
        with pytest.raises(ValueError):
            posterior(akm, Evidence((("f1", "sideways"),)))

    def test_order_invariance(self):
        rng = np.random.default_rng(37)
        for _ in range(20):
            akm = random_hyp_model(rng)
            ev = list(random_evidence(rng, akm, p_observe=0.7))
            if len(ev) < 2:
                continue
            a = posterior(akm, Evidence(tuple(ev)))
            b = posterior(akm, Evidence(tuple(reversed(ev))))
            for label, p in a.ranked:
                assert math.isclose(p, b.probability(label), abs_tol=1e-12)

    def test_matches_joint_conditioning_oracle(self):
        rng = np.random.default_rng(41)
        checked = 0
        for _ in range(60):
            akm = random_hyp_model(rng, max_feats=6)
            ev = random_evidence(rng, akm)
            d = posterior(akm, Evidence(ev))
            want = query_conditional(akm, "h", dict(ev))
            hvar = akm.map.variables[0]
            for i, label in enumerate(hvar.instances):
                assert math.isclose(d.probability(label), want[i], abs_tol=1e-9)
            checked += 1
        assert checked == 60

    def test_differential_requires_normalization(self):
        with pytest.raises(ValueError):
            Differential((("d0", 0.5), ("d1", 0.2)))


class TestWeightOfEvidence:
    def test_log_ratio_of_ten(self):
        akm = simple_bayes(
            (0.5, 0.5), {"f1": [[0.5, 0.5], [0.95, 0.05]]}
        )
        weights, notes = weight_of_evidence(akm, "f1", ("d0", "d1"), Evidence(()))
        assert weights[1] == pytest.approx(1.0, abs=1e-12)
        assert notes == ()

    def test_indistinguishable_is_zero(self):
        akm = simple_bayes((0.5, 0.5), {"f1": [[0.4, 0.6], [0.4, 0.6]]})
        weights, _ = weight_of_evidence(akm, "f1", ("d0", "d1"), Evidence(()))
        assert weights == (0.0, 0.0)

    def test_zero_denominator_sentinel(self):
        akm = simple_bayes((0.5, 0.5), {"f1": [[0.5, 0.5], [1.0, 0.0]]})
        weights, notes = weight_of_evidence(akm, "f1", ("d0", "d1"), Evidence(()))
        assert weights[1] == math.inf
        assert notes and "f1" in notes[0]

    def test_conditioning_on_cluster_mates(self):
        # Weights must condition on already-observed cluster mates.
        akm = chain_cluster_model()
        ev = Evidence((("z", "pos"),))
        weights, _ = weight_of_evidence(akm, "y", ("d0", "d1"), ev)
        num = []
        for hyp in ("d0", "d1"):
            base = cluster_likelihood(akm, ("x", "y", "z"), ev, hyp)
            with_y = cluster_likelihood(
                akm, ("x", "y", "z"), ev.with_observation("y", "pos"), hyp
            )
            num.append(with_y / base)
        assert weights[1] == pytest.approx(math.log10(num[0] / num[1]), abs=1e-12)

    def test_same_hypothesis_rejected(self):
        akm = chain_cluster_model()
        with pytest.raises(ValueError):
            weight_of_evidence(akm, "y", ("d0", "d0"), Evidence(()))


@given(st.integers(min_value=0, max_value=100_000))
@settings(max_examples=40, deadline=None)
def test_posterior_oracle_property(seed):
    rng = np.random.default_rng(seed)
    akm = random_hyp_model(rng)
    ev = random_evidence(rng, akm)
    try:
        d = posterior(akm, Evidence(ev))
    except ImpossibleEvidenceError:
        return
    want = query_conditional(akm, "h", dict(ev))
    hvar = akm.map.variables[0]
    for i, label in enumerate(hvar.instances):
        assert math.isclose(d.probability(label), want[i], abs_tol=1e-9)
