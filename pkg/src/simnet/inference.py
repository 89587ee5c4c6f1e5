"""Posterior computation over the hypothesis node via cluster factoring.

Features split into clusters: connected components of the global map
once the hypothesis node h and its arcs are removed. Given h, clusters
are mutually independent, so the posterior is the prior times one
likelihood factor per cluster that contains observations. Likelihoods
accumulate in log space to survive long products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    AssessedKnowledgeMap,
    ImpossibleEvidenceError,
    KnowledgeMap,
)


@dataclass(frozen=True)
class Evidence:
    """Ordered (feature, instance) observations, one per feature."""

    observations: tuple[tuple[str, str], ...]

    def __post_init__(self):
        obs = tuple((str(f), str(i)) for f, i in self.observations)
        object.__setattr__(self, "observations", obs)
        feats = [f for f, _ in obs]
        if len(set(feats)) != len(feats):
            raise ValueError("each feature may be observed once")

    @property
    def features(self) -> tuple[str, ...]:
        return tuple(f for f, _ in self.observations)

    def instance_of(self, feature: str) -> Optional[str]:
        for f, i in self.observations:
            if f == feature:
                return i
        return None

    def with_observation(self, feature: str, instance: str) -> "Evidence":
        kept = tuple(o for o in self.observations if o[0] != feature)
        return Evidence(kept + ((feature, instance),))

    def without(self, feature: str) -> "Evidence":
        return Evidence(tuple(o for o in self.observations if o[0] != feature))

    def restricted_to(self, features) -> "Evidence":
        keep = set(features)
        return Evidence(tuple(o for o in self.observations if o[0] in keep))

    def as_dict(self) -> dict[str, str]:
        return dict(self.observations)


@dataclass(frozen=True)
class ClusterDecomposition:
    clusters: tuple[tuple[str, ...], ...]

    def cluster_for(self, feature: str) -> tuple[str, ...]:
        for c in self.clusters:
            if feature in c:
                return c
        raise ValueError(f"{feature!r} is not in any cluster")


@dataclass(frozen=True)
class Differential:
    """Posterior over hypotheses, kept in declaration order with a
    ranked view for display."""

    entries: tuple[tuple[str, float], ...]

    def __post_init__(self):
        entries = tuple((str(l), float(p)) for l, p in self.entries)
        object.__setattr__(self, "entries", entries)
        total = sum(p for _, p in entries)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"posterior sums to {total}, not 1")
        if any(p < 0 for _, p in entries):
            raise ValueError("posterior has negative entries")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(l for l, _ in self.entries)

    @property
    def ranked(self) -> tuple[tuple[str, float], ...]:
        return tuple(sorted(self.entries, key=lambda e: -e[1]))

    def probability(self, label: str) -> float:
        for l, p in self.entries:
            if l == label:
                return p
        raise ValueError(f"unknown hypothesis {label!r}")

    def support(self) -> tuple[str, ...]:
        return tuple(l for l, p in self.entries if p > 0)


def decompose_clusters(global_map: KnowledgeMap) -> ClusterDecomposition:
    """Connected components of the map once h and its arcs are removed."""
    h = global_map.distinguished
    if h is None:
        raise ValueError("map has no distinguished hypothesis node")
    if global_map.parents_of(h):
        raise ValueError(f"{h!r} must have no predecessors")
    features = [n for n in global_map.names if n != h]
    adj: dict[str, set[str]] = {n: set() for n in features}
    for a, b in global_map.arcs:
        if a == h or b == h:
            continue
        adj[a].add(b)
        adj[b].add(a)
    clusters = []
    seen: set[str] = set()
    for n in features:
        if n in seen:
            continue
        comp = {n}
        frontier = [n]
        while frontier:
            cur = frontier.pop()
            for nxt in adj[cur]:
                if nxt not in comp:
                    comp.add(nxt)
                    frontier.append(nxt)
        seen |= comp
        clusters.append(tuple(sorted(comp)))
    clusters.sort()
    return ClusterDecomposition(tuple(clusters))


def cluster_likelihood(
    akm: AssessedKnowledgeMap,
    cluster: Sequence[str],
    obs: Evidence,
    hypothesis: str,
    method: str = "direct",
) -> float:
    """p(observations within the cluster | hypothesis)."""
    km = akm.map
    h = km.distinguished
    cluster = tuple(cluster)
    hvar = km.variable(h)
    h_idx = hvar.index(hypothesis)
    pinned = obs.restricted_to(cluster).as_dict()
    for name in cluster:
        for p in km.parents_of(name):
            if p != h and p not in cluster:
                raise ValueError(
                    f"cluster {cluster} is not closed under parents ({p} -> {name})"
                )
    if not pinned:
        return 1.0
    if method == "direct":
        return _likelihood_direct(akm, cluster, pinned, h, h_idx)
    if method == "eliminate":
        return _likelihood_eliminate(akm, cluster, pinned, h, h_idx)
    raise ValueError(f"unknown method {method!r}")


def _cluster_factor(akm, name, h, h_idx):
    """Table for one cluster variable with h pinned: axes are the
    non-hypothesis parents (declaration order) then the variable."""
    km = akm.map
    table = akm.table(name)
    parents = table.parents
    cards = [km.variable(p).card for p in parents]
    arr = np.asarray(table.rows).reshape(tuple(cards) + (km.variable(name).card,))
    if h in parents:
        arr = np.take(arr, h_idx, axis=parents.index(h))
        parents = tuple(p for p in parents if p != h)
    return parents, arr


def _likelihood_direct(akm, cluster, pinned, h, h_idx) -> float:
    km = akm.map
    factors = {name: _cluster_factor(akm, name, h, h_idx) for name in cluster}
    free = [n for n in cluster if n not in pinned]
    cards = [km.variable(n).card for n in free]
    fixed = {n: km.variable(n).index(lbl) for n, lbl in pinned.items()}
    total = 0.0
    for combo in np.ndindex(*cards) if free else [()]:
        assign = dict(zip(free, combo))
        assign.update(fixed)
        term = 1.0
        for name in cluster:
            parents, arr = factors[name]
            idx = tuple(assign[p] for p in parents) + (assign[name],)
            term *= float(arr[idx])
            if term == 0.0:
                break
        total += term
    return total


def _likelihood_eliminate(akm, cluster, pinned, h, h_idx) -> float:
    """Sum out unobserved variables one at a time, innermost first
    (reverse topological order within the cluster)."""
    km = akm.map
    order = [n for n in km.topological_order() if n in cluster]
    live: list[tuple[tuple[str, ...], np.ndarray]] = []
    for name in cluster:
        parents, arr = _cluster_factor(akm, name, h, h_idx)
        axes = parents + (name,)
        for var, lbl in pinned.items():
            if var in axes:
                arr = np.take(arr, km.variable(var).index(lbl), axis=axes.index(var))
                axes = tuple(a for a in axes if a != var)
        live.append((axes, arr))

    for name in reversed(order):
        if name in pinned:
            continue
        touching = [f for f in live if name in f[0]]
        if not touching:
            continue
        live = [f for f in live if name not in f[0]]
        axes, merged = touching[0]
        for more_axes, more in touching[1:]:
            axes, merged = _factor_product(axes, merged, more_axes, more, km)
        merged = merged.sum(axis=axes.index(name))
        axes = tuple(a for a in axes if a != name)
        live.append((axes, merged))

    result = 1.0
    for axes, arr in live:
        if axes:
            arr = arr.sum()
        result *= float(arr)
    return result


def _factor_product(axes_a, a, axes_b, b, km):
    union = tuple(axes_a) + tuple(x for x in axes_b if x not in axes_a)
    return union, _expand(a, axes_a, union, km) * _expand(b, axes_b, union, km)


def _expand(arr, axes, union, km):
    """Broadcast a factor onto the union axis order via singleton dims."""
    if len(axes) > 1:
        perm = sorted(range(len(axes)), key=lambda k: union.index(axes[k]))
        arr = np.transpose(arr, perm)
    target = [1] * len(union)
    for x in axes:
        target[union.index(x)] = km.variable(x).card
    return np.asarray(arr).reshape(target)


def posterior(
    akm: AssessedKnowledgeMap, evidence: Evidence, method: str = "direct"
) -> Differential:
    """Prior times per-cluster likelihoods, normalized."""
    km = akm.map
    h = km.distinguished
    if h is None:
        raise ValueError("model has no distinguished hypothesis node")
    hvar = km.variable(h)
    for f, inst in evidence.observations:
        if f == h:
            raise ValueError("the hypothesis variable cannot be observed directly")
        if not km.has_variable(f):
            raise ValueError(f"unknown feature {f!r}")
        km.variable(f).index(inst)

    prior = np.asarray(akm.table(h).rows[0], dtype=float)
    if not evidence.observations:
        probs = prior / prior.sum()
        return Differential(tuple(zip(hvar.instances, probs)))

    dec = decompose_clusters(km)
    with np.errstate(divide="ignore"):
        log_scores = np.log(prior)
    for cluster in dec.clusters:
        if not evidence.restricted_to(cluster).observations:
            continue
        for k, label in enumerate(hvar.instances):
            like = cluster_likelihood(akm, cluster, evidence, label, method=method)
            with np.errstate(divide="ignore"):
                log_scores[k] += math.log(like) if like > 0 else -math.inf
    finite = log_scores[np.isfinite(log_scores)]
    if finite.size == 0:
        raise ImpossibleEvidenceError("evidence has probability 0 under every hypothesis")
    scores = np.exp(log_scores - finite.max())
    total = scores.sum()
    if total <= 0:
        raise ImpossibleEvidenceError("evidence has probability 0 under every hypothesis")
    return Differential(tuple(zip(hvar.instances, scores / total)))


def evidence_probability(
    akm: AssessedKnowledgeMap, evidence: Evidence, method: str = "direct"
) -> float:
    """Marginal probability of the evidence: sum over hypotheses of
    prior times the per-cluster likelihood product."""
    km = akm.map
    h = km.distinguished
    if h is None:
        raise ValueError("model has no distinguished hypothesis node")
    hvar = km.variable(h)
    for f, inst in evidence.observations:
        if f == h:
            raise ValueError("the hypothesis variable cannot be observed directly")
        if not km.has_variable(f):
            raise ValueError(f"unknown feature {f!r}")
        km.variable(f).index(inst)
    prior = np.asarray(akm.table(h).rows[0], dtype=float)
    if not evidence.observations:
        return float(prior.sum())
    dec = decompose_clusters(km)
    total = 0.0
    for k, label in enumerate(hvar.instances):
        if prior[k] == 0.0:
            continue
        term = prior[k]
        for cluster in dec.clusters:
            if not evidence.restricted_to(cluster).observations:
                continue
            term *= cluster_likelihood(akm, cluster, evidence, label, method=method)
            if term == 0.0:
                break
        total += term
    return float(total)


def weight_of_evidence(
    akm: AssessedKnowledgeMap,
    feature: str,
    top_two: tuple[str, str],
    evidence: Evidence,
) -> tuple[tuple[float, ...], tuple[str, ...]]:
    """Per-instance log10 likelihood ratios for the two leading
    hypotheses, conditioned on same-cluster observations. Any existing
    observation of the feature itself is set aside first."""
    d1, d2 = top_two
    if d1 == d2:
        raise ValueError("weight of evidence needs two distinct hypotheses")
    km = akm.map
    fvar = km.variable(feature)
    dec = decompose_clusters(km)
    cluster = dec.cluster_for(feature)
    base_ev = evidence.restricted_to(cluster).without(feature)

    base = {}
    for d in (d1, d2):
        base[d] = (
            cluster_likelihood(akm, cluster, base_ev, d)
            if base_ev.observations
            else 1.0
        )
    weights: list[float] = []
    notes: list[str] = []
    for inst in fvar.instances:
        probe = base_ev.with_observation(feature, inst)
        r = {}
        for d in (d1, d2):
            r[d] = cluster_likelihood(akm, cluster, probe, d) / base[d]
        if r[d1] > 0 and r[d2] > 0:
            weights.append(math.log10(r[d1] / r[d2]))
        elif r[d1] == 0 and r[d2] == 0:
            weights.append(0.0)
            notes.append(
                f"{feature}={inst} has probability 0 under both {d1} and {d2}"
            )
        else:
            sign = math.inf if r[d2] == 0 else -math.inf
            weights.append(sign)
            zero = d2 if r[d2] == 0 else d1
            notes.append(f"{feature}={inst} has probability 0 under {zero}")
    return tuple(weights), tuple(notes)
