"""Utility-guided diagnosis and feature recommendation.

Utilities are losses on a micromort scale: 0 for a correct diagnosis,
negative for misdiagnosis. Feature costs live on the same scale;
``CostModel.to_dollars`` converts for display only.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence, Set
from dataclasses import dataclass, field

import numpy as np

from .core import AssessedKnowledgeMap, tolerance
from .inference import Differential, Evidence, evidence_probability, posterior
from .similarity import OrdinaryNetwork

__all__ = [
    "CostModel",
    "Recommendation",
    "UtilityMatrix",
    "expected_utility",
    "inferential_loss",
    "meu_diagnosis",
    "recommend_features",
    "value_of_clairvoyance",
    "voc_shortcircuit",
]


@dataclass(frozen=True)
class UtilityMatrix:
    """u(d, dx): utility of diagnosing dx when d is the true hypothesis.

    Rows are true hypotheses, columns diagnoses, both in declaration
    order. Each diagonal entry must be its row's maximum (a correct
    diagnosis is never worse than a wrong one).
    """

    hypotheses: tuple[str, ...]
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))
        entries = np.asarray(self.entries, dtype=float)
        n = len(self.hypotheses)
        if len(set(self.hypotheses)) != n:
            raise ValueError("duplicate hypothesis labels")
        if entries.shape != (n, n):
            raise ValueError(
                f"utility matrix must be square over {n} hypotheses, "
                f"got shape {entries.shape}"
            )
        for i in range(n):
            if entries[i, i] < entries[i].max():
                raise ValueError(
                    f"diagonal entry for {self.hypotheses[i]!r} must be "
                    "its row maximum"
                )
        entries = entries.copy()
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    def value(self, true_hypothesis: str, diagnosis: str) -> float:
        i = self.hypotheses.index(true_hypothesis)
        j = self.hypotheses.index(diagnosis)
        return float(self.entries[i, j])

    @classmethod
    def from_groups(
        cls,
        hypotheses: Sequence[str],
        group_of: Mapping[str, str],
        groups: Sequence[str],
        group_entries,
    ) -> "UtilityMatrix":
        """Expand a per-group matrix to the full hypothesis matrix.

        Hypotheses in the same group are treated as interchangeable:
        u(d, dx) = g(group(d), group(dx)). Same-group misdiagnoses
        therefore cost nothing.
        """
        hypotheses = tuple(hypotheses)
        groups = tuple(groups)
        for h in hypotheses:
            if h not in group_of:
                raise ValueError(f"hypothesis {h!r} has no group")
            if group_of[h] not in groups:
                raise ValueError(f"unknown group {group_of[h]!r} for {h!r}")
        g = np.asarray(group_entries, dtype=float)
        if g.shape != (len(groups), len(groups)):
            raise ValueError("group matrix shape does not match the group list")
        gi = {name: k for k, name in enumerate(groups)}
        n = len(hypotheses)
        entries = np.empty((n, n))
        for i, a in enumerate(hypotheses):
            for j, b in enumerate(hypotheses):
                entries[i, j] = g[gi[group_of[a]], gi[group_of[b]]]
        return cls(hypotheses, entries)


@dataclass(frozen=True)
class CostModel:
    """Per-feature observation costs in micromorts; absent features cost 0."""

    costs: Mapping[str, float] = field(default_factory=dict)
    dollars_per_micromort: float = 20.0

    def __post_init__(self):
        object.__setattr__(self, "costs", dict(self.costs))

    def cost(self, feature: str) -> float:
        return float(self.costs.get(feature, 0.0))

    def to_dollars(self, micromorts: float) -> float:
        return micromorts * self.dollars_per_micromort


@dataclass(frozen=True)
class Recommendation:
    feature: str
    voc: float
    cost: float
    net: float


def _aligned(posterior_dist: Differential, u: UtilityMatrix) -> np.ndarray:
    if set(posterior_dist.labels) != set(u.hypotheses):
        raise ValueError("posterior and utility matrix cover different hypotheses")
    return np.array([posterior_dist.probability(l) for l in u.hypotheses])


def expected_utility(
    posterior_dist: Differential, u: UtilityMatrix, diagnosis: str
) -> float:
    p = _aligned(posterior_dist, u)
    j = u.hypotheses.index(diagnosis)
    return float(p @ u.entries[:, j])


def meu_diagnosis(
    posterior_dist: Differential, u: UtilityMatrix
) -> tuple[str, float]:
    """Diagnosis maximizing expected utility; ties go to the first-declared
    hypothesis."""
    p = _aligned(posterior_dist, u)
    eus = p @ u.entries
    j = int(np.argmax(eus))
    return u.hypotheses[j], float(eus[j])


def inferential_loss(
    gold: Differential, model: Differential, u: UtilityMatrix
) -> float:
    """Expected-utility gap, under the gold distribution, between the
    gold diagnosis and the model diagnosis. Zero when they coincide."""
    dx_gold, eu_gold = meu_diagnosis(gold, u)
    dx_model, _ = meu_diagnosis(model, u)
    if dx_model == dx_gold:
        return 0.0
    return eu_gold - expected_utility(gold, u, dx_model)


def value_of_clairvoyance(
    akm: AssessedKnowledgeMap,
    evidence: Evidence,
    feature: str,
    u: UtilityMatrix,
    method: str = "direct",
) -> float:
    """Expected gain in maximum expected utility from observing the
    feature before diagnosing, assuming risk attitudes that let the
    gain be priced as the pre-posterior difference.

    Results with magnitude below the working tolerance are snapped to
    0.0, so uninformative features price at exactly zero.
    """
    if feature in evidence.features:
        raise ValueError(f"feature {feature!r} is already observed")
    km = akm.map
    if not km.has_variable(feature):
        raise ValueError(f"unknown feature {feature!r}")
    base = posterior(akm, evidence, method=method)
    _, base_eu = meu_diagnosis(base, u)
    pe = evidence_probability(akm, evidence, method=method)
    weights = []
    branch_eus = []
    for inst in km.variable(feature).instances:
        ext = evidence.with_observation(feature, inst)
        p_branch = evidence_probability(akm, ext, method=method)
        if p_branch <= 0.0:
            continue
        weights.append(p_branch / pe)
        branch_eus.append(meu_diagnosis(posterior(akm, ext, method=method), u)[1])
    w = np.asarray(weights)
    w = w / w.sum()
    total = float(w @ np.asarray(branch_eus))
    voc = total - base_eu
    if abs(voc) < tolerance():
        return 0.0
    return max(voc, 0.0)


def voc_shortcircuit(
    net: OrdinaryNetwork,
    surviving: Set[str],
    features: Sequence[str] | None = None,
) -> frozenset[str]:
    """Features guaranteed worthless given the surviving hypotheses.

    A feature discriminates only through the local maps whose edge has
    both endpoints surviving; anything absent from all of them cannot
    move the differential, so its clairvoyance value is zero and the
    exact computation can be skipped. With a single survivor (or none)
    every feature is worthless.

    ``features`` widens the universe beyond the features the network
    mentions, for callers whose model carries extra variables.
    """
    surviving = set(surviving)
    unknown = surviving - set(net.graph.hypotheses)
    if unknown:
        raise ValueError(f"unknown hypotheses: {sorted(unknown)}")
    h = net.distinguished
    universe: set[str] = set(features) if features is not None else set()
    for a, b in net.graph.edges:
        universe |= {n for n in net.local_map(a, b).names if n != h}
    live_edges = [
        (a, b) for a, b in net.graph.edges if a in surviving and b in surviving
    ]
    if not live_edges:
        return frozenset(universe)
    out = set()
    for f in universe:
        if all(not net.local_map(a, b).has_variable(f) for a, b in live_edges):
            out.add(f)
    return frozenset(out)


def recommend_features(
    akm: AssessedKnowledgeMap,
    evidence: Evidence,
    u: UtilityMatrix,
    costs: CostModel,
    limit: int | None = None,
    network: OrdinaryNetwork | None = None,
    method: str = "direct",
) -> tuple[Recommendation, ...]:
    """Unobserved features ranked by clairvoyance value net of cost.

    Features with net value at or below zero are dropped. When the
    similarity network is supplied, features it rules out for the
    current differential are skipped without pricing them.
    """
    km = akm.map
    h = km.distinguished
    candidates = [
        n for n in km.names if n != h and n not in evidence.features
    ]
    skip: frozenset[str] = frozenset()
    if network is not None and candidates:
        surviving = set(posterior(akm, evidence, method=method).support())
        skip = voc_shortcircuit(network, surviving, features=candidates)
    recs = []
    for f in candidates:
        if f in skip:
            continue
        voc = value_of_clairvoyance(akm, evidence, f, u, method=method)
        net = voc - costs.cost(f)
        if net <= 0.0:
            continue
        recs.append(Recommendation(f, voc, costs.cost(f), net))
    recs.sort(key=lambda r: (-r.net, r.feature))
    if limit is not None:
        recs = recs[:limit]
    return tuple(recs)
