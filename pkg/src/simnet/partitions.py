"""Partition-based elicitation of conditional tables.

Instead of assessing one distribution per (hypothesis, conditioning
instance), an author groups hypotheses into sets that share a
distribution for the feature, one partition per conditioning instance.
Expansion turns those partitions back into full tables; propagation
copies distributions across similarity-graph edges whose local map
omits the feature; the counters quantify the assessment savings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .core import ConditionalTable, ValidationReport, Variable, tolerance
from .similarity import HypothesisSpecificNetwork, OrdinaryNetwork


@dataclass(frozen=True)
class HypothesisSet:
    """Named group of hypotheses; members may nest other sets."""

    name: str
    members: tuple

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        flat = self.flatten()
        if not flat:
            raise ValueError(f"set {self.name!r} is empty")
        if len(set(flat)) != len(flat):
            raise ValueError(f"set {self.name!r} has duplicate members")

    def flatten(self) -> tuple[str, ...]:
        out: list[str] = []
        for m in self.members:
            if isinstance(m, HypothesisSet):
                out.extend(m.flatten())
            else:
                out.append(m)
        return tuple(out)


@dataclass(frozen=True)
class Partition:
    """One conditioning instance of a feature: hypothesis sets plus one
    distribution over the feature's instances per set.

    An all-zero distribution marks the conditioning event as impossible.
    """

    feature: str
    conditioning: Mapping[str, str]
    sets: tuple[HypothesisSet, ...]
    distributions: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "conditioning", dict(self.conditioning))
        object.__setattr__(self, "sets", tuple(self.sets))
        object.__setattr__(
            self,
            "distributions",
            tuple(tuple(float(x) for x in d) for d in self.distributions),
        )

    def set_index_of(self, hypothesis: str) -> Optional[int]:
        for i, s in enumerate(self.sets):
            if hypothesis in s.flatten():
                return i
        return None


def derive_partition(
    template: Partition,
    conditioning: Mapping[str, str],
    distributions: Sequence[Sequence[float]],
) -> Partition:
    """New partition sharing the template's set structure."""
    return Partition(
        template.feature, dict(conditioning), template.sets, tuple(distributions)
    )


def validate_partition(p: Partition, h: Variable) -> ValidationReport:
    errors: list[str] = []
    warnings: list[str] = []
    seen: dict[str, str] = {}
    for s in p.sets:
        for label in s.flatten():
            if label not in h.instances:
                errors.append(f"set {s.name!r} names unknown hypothesis {label!r}")
            elif label in seen:
                errors.append(
                    f"hypothesis {label!r} appears in more than one set "
                    f"({seen[label]!r} and {s.name!r})"
                )
            else:
                seen[label] = s.name
    for label in h.instances:
        if label not in seen:
            errors.append(f"hypothesis {label!r} missing from every set")
    if len(p.distributions) != len(p.sets):
        errors.append(
            f"{len(p.sets)} sets but {len(p.distributions)} distributions"
        )
    for s, dist in zip(p.sets, p.distributions):
        total = float(sum(dist))
        if total == 0.0:
            continue
        if abs(total - 1.0) > tolerance():
            errors.append(
                f"distribution for set {s.name!r} does not normalize (sum={total})"
            )
        if any(x < 0 for x in dist):
            errors.append(f"distribution for set {s.name!r} has negative entries")
    return ValidationReport(tuple(errors), tuple(warnings))


def expand_assessments(
    h: Variable,
    feature: Variable,
    parents: Sequence[Variable],
    partitions: Sequence[Partition],
) -> ConditionalTable:
    """Full table over (h, then the declared parents), row-major, where
    the row for (h_k, c) is the distribution of the set containing h_k
    in the partition for conditioning instance c."""
    parents = tuple(parents)
    by_instance: dict[tuple[str, ...], Partition] = {}
    for p in partitions:
        if p.feature != feature.name:
            raise ValueError(
                f"partition for {p.feature!r} given while expanding {feature.name!r}"
            )
        report = validate_partition(p, h)
        if not report.ok:
            raise ValueError(
                f"invalid partition for {feature.name!r}: " + "; ".join(report.errors)
            )
        extra = set(p.conditioning) - {v.name for v in parents}
        missing = {v.name for v in parents} - set(p.conditioning)
        if extra or missing:
            raise ValueError(
                f"partition conditioning keys {sorted(p.conditioning)} do not "
                f"match parents {[v.name for v in parents]}"
            )
        key = tuple(p.conditioning[v.name] for v in parents)
        for v, label in zip(parents, key):
            if label not in v.instances:
                raise ValueError(f"unknown instance {label!r} for parent {v.name}")
        if key in by_instance:
            raise ValueError(f"duplicate partition for conditioning {key}")
        for dist in p.distributions:
            if len(dist) != feature.card:
                raise ValueError(
                    f"distribution length {len(dist)} does not match "
                    f"{feature.name!r} cardinality {feature.card}"
                )
        by_instance[key] = p

    parent_cards = [v.card for v in parents]
    n_rows = h.card * int(np.prod(parent_cards)) if parents else h.card
    rows = np.zeros((n_rows, feature.card))
    combos = list(np.ndindex(*parent_cards)) if parents else [()]
    for combo in combos:
        key = tuple(v.instances[i] for v, i in zip(parents, combo))
        p = by_instance.get(key)
        if p is None:
            raise ValueError(f"missing partition for conditioning instance {key}")
        for k in range(h.card):
            idx = p.set_index_of(h.instances[k])
            row = (
                int(np.ravel_multi_index((k,) + tuple(combo), [h.card] + parent_cards))
                if parents
                else k
            )
            rows[row] = p.distributions[idx]
    return ConditionalTable(feature.name, (h.name,) + tuple(v.name for v in parents), rows)


def propagate_through_similarity(
    net: OrdinaryNetwork,
    feature: str,
    seeds: Mapping[str, Sequence[float]],
) -> dict[str, tuple[float, ...]]:
    """Flood-fill per-hypothesis distributions for a feature across
    edges whose local map omits it; omission means the two endpoint
    hypotheses share the feature's distribution."""
    tol = tolerance()
    hyps = net.graph.hypotheses
    for hyp in seeds:
        if hyp not in hyps:
            raise ValueError(f"seed for unknown hypothesis {hyp!r}")

    adj: dict[str, set[str]] = {hyp: set() for hyp in hyps}
    for edge in net.graph.edges:
        m = net.local_maps[net.graph.edge_key(*edge)]
        if not m.has_variable(feature):
            a, b = edge
            adj[a].add(b)
            adj[b].add(a)

    assigned: dict[str, tuple[float, ...]] = {}
    components: list[list[str]] = []
    seen: set[str] = set()
    for hyp in hyps:
        if hyp in seen:
            continue
        comp = [hyp]
        seen.add(hyp)
        frontier = [hyp]
        while frontier:
            cur = frontier.pop()
            for nxt in sorted(adj[cur]):
                if nxt not in seen:
                    seen.add(nxt)
                    comp.append(nxt)
                    frontier.append(nxt)
        components.append(sorted(comp))

    for comp in components:
        seeded = [hyp for hyp in comp if hyp in seeds]
        if not seeded:
            raise ValueError(
                f"no seed covers hypotheses {comp} for feature {feature!r}"
            )
        first = np.asarray(seeds[seeded[0]], dtype=float)
        for hyp in seeded[1:]:
            other = np.asarray(seeds[hyp], dtype=float)
            if other.shape != first.shape or np.abs(other - first).max() > tol:
                raise ValueError(
                    f"conflicting seeds for feature {feature!r}: "
                    f"{seeded[0]} vs {hyp}"
                )
        value = tuple(float(x) for x in first)
        for hyp in comp:
            assigned[hyp] = value
    return {hyp: assigned[hyp] for hyp in hyps}


def count_assessments(
    h: Variable,
    items: Iterable[
        tuple[Variable, Sequence[Variable], Sequence[Partition]]
    ],
) -> tuple[int, int]:
    """(with partitions, without). Entries determined by normalization
    are excluded: each distribution costs cardinality - 1 assessments."""
    with_partitions = 0
    without = 0
    for feature, parents, partitions in items:
        free = feature.card - 1
        rows = h.card * int(np.prod([v.card for v in parents])) if parents else h.card
        without += rows * free
        for p in partitions:
            with_partitions += len(p.sets) * free
    return with_partitions, without


def audit_partition_grouping(
    p: Partition, constructor: HypothesisSpecificNetwork
) -> tuple[str, ...]:
    """Flag set-mates whose hs maps condition the feature differently;
    grouping them asserts a sharing their own maps contradict."""
    notes: list[str] = []
    for s in p.sets:
        members = sorted(s.flatten())
        for i, a in enumerate(members):
            for b in members[i + 1 :]:
                try:
                    pa = set(constructor.hs_map(a).parents_of(p.feature))
                    pb = set(constructor.hs_map(b).parents_of(p.feature))
                except ValueError:
                    continue
                if pa != pb:
                    notes.append(
                        f"set {s.name!r} groups {a} and {b} for {p.feature!r} "
                        f"but their maps condition it on {sorted(pa)} vs {sorted(pb)}"
                    )
    return tuple(notes)
