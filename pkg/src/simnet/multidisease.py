"""Causal-independence combination and the multiple-disease rewrite.

A network over mutually exclusive hypotheses that includes a NORMAL
hypothesis can be recast as a map whose diseases are independent binary
roots, as long as every multi-cause finding combines its causes through
a noisy-OR mechanism. Binary convention throughout this module:
instance index 1 is the positive (present) state.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np

from .core import (
    AssessedKnowledgeMap,
    ConditionalTable,
    KnowledgeMap,
    Variable,
    validate_map,
)
from .similarity import OrdinaryNetwork, SimilarityGraph, construct_global

__all__ = [
    "AssessedNetwork",
    "MultiDiseaseMap",
    "NoisyOrSpec",
    "noisy_or",
    "noisy_or_via_inhibitors",
    "star_transform",
    "transform_multihyp",
]


@dataclass(frozen=True)
class NoisyOrSpec:
    """Leak plus per-disease activation probabilities for one binary
    finding. The leak is the finding probability with every listed
    cause absent; each activation is the probability with exactly that
    cause present."""

    finding: str
    leak: float
    activations: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "activations", dict(self.activations))
        if not 0.0 <= self.leak <= 1.0:
            raise ValueError("leak must be a probability")
        for d, a in self.activations.items():
            if not 0.0 <= a <= 1.0:
                raise ValueError(f"activation for {d!r} must be a probability")
            if a < self.leak:
                raise ValueError(
                    f"activation for {d!r} is below the leak; a present "
                    "cause cannot make the finding rarer"
                )


def _chosen(spec: NoisyOrSpec, present: Iterable[str]) -> list[str]:
    chosen = sorted(set(present))
    unknown = [d for d in chosen if d not in spec.activations]
    if unknown:
        raise ValueError(f"unknown diseases: {unknown}")
    if chosen and spec.leak == 1.0:
        raise ValueError("leak of 1 leaves the inhibitor ratios undefined")
    return chosen


def noisy_or(spec: NoisyOrSpec, present: Iterable[str]) -> float:
    """Finding probability given the present causes, multiplying the
    per-cause miss ratios (1-activation)/(1-leak). The present set is
    canonicalized so the float result is order independent."""
    chosen = _chosen(spec, present)
    if not chosen:
        return spec.leak
    prod = 1.0
    for d in chosen:
        prod *= (1.0 - spec.activations[d]) / (1.0 - spec.leak)
    return 1.0 - (1.0 - spec.leak) * prod


def noisy_or_via_inhibitors(spec: NoisyOrSpec, present: Iterable[str]) -> float:
    """Same quantity through the explicit per-cause mechanism
    probabilities p_i = (activation - leak)/(1 - leak)."""
    chosen = _chosen(spec, present)
    if not chosen:
        return spec.leak
    prod = 1.0
    for d in chosen:
        p_i = (spec.activations[d] - spec.leak) / (1.0 - spec.leak)
        prod *= 1.0 - p_i
    return 1.0 - (1.0 - spec.leak) * prod


@dataclass(frozen=True)
class AssessedNetwork:
    """An ordinary similarity network whose global map carries tables.

    The model must be exactly the network's global map (hypothesis
    variable declared first, features in the model's order) so local
    maps and assessments cannot drift apart.
    """

    network: OrdinaryNetwork
    model: AssessedKnowledgeMap

    def __post_init__(self):
        km = self.model.map
        order = [v.name for v in km.variables if v.name != km.distinguished]
        try:
            cg = construct_global(self.network, variable_order=order)
        except ValueError as exc:
            raise ValueError(
                f"model does not match the network's global map: {exc}"
            ) from exc
        if cg != km:
            raise ValueError("model does not match the network's global map")
        report = validate_map(self.model)
        if report.errors:
            raise ValueError("invalid model: " + "; ".join(report.errors))


def _rows_differ(model: AssessedKnowledgeMap, y: str, d0: str, d1: str) -> bool:
    km = model.map
    h = km.distinguished
    t = model.table(y)
    if h not in t.parents:
        return False
    axes = [km.variable(p).card for p in t.parents]
    arr = np.asarray(t.rows).reshape(axes + [t.child_card])
    hax = t.parents.index(h)
    a = np.take(arr, km.variable(h).index(d0), axis=hax)
    b = np.take(arr, km.variable(h).index(d1), axis=hax)
    return not np.array_equal(a, b)


def _h_component(kept, feature_arcs, features):
    adj = {f: set() for f in features}
    for a, b in feature_arcs:
        adj[a].add(b)
        adj[b].add(a)
    comp = set()
    stack = list(kept)
    while stack:
        cur = stack.pop()
        if cur in comp:
            continue
        comp.add(cur)
        stack.extend(adj[cur] - comp)
    return comp


def _project_table(model: AssessedKnowledgeMap, new_km: KnowledgeMap, name: str, normal: str):
    """Original table with dropped parents fixed at the NORMAL slice."""
    old_km = model.map
    old = model.table(name)
    new_parents = new_km.parents_of(name)
    if new_parents == old.parents:
        return old
    h = old_km.distinguished
    cards_new = tuple(new_km.variable(p).card for p in new_parents)
    n_rows = int(np.prod(cards_new)) if new_parents else 1
    rows = np.empty((n_rows, old.child_card))
    old_cards = tuple(old_km.variable(p).card for p in old.parents)
    for r in range(n_rows):
        assign = (
            dict(zip(new_parents, np.unravel_index(r, cards_new)))
            if new_parents
            else {}
        )
        idx = []
        for p in old.parents:
            if p in assign:
                idx.append(int(assign[p]))
            elif p == h:
                idx.append(old_km.variable(h).index(normal))
            else:
                raise ValueError(
                    f"parent {p!r} of {name!r} vanished from the projection"
                )
        rows[r] = old.rows[old.row_index(idx, old_cards)]
    return ConditionalTable(name, new_parents, rows)


def star_transform(an: AssessedNetwork, normal: str = "NORMAL") -> AssessedNetwork:
    """Rewire the similarity graph so every hypothesis borders NORMAL.

    Each new local map is read off the assessed global map: the
    hypothesis arc to a feature survives exactly when the feature's
    table rows differ between NORMAL and the paired hypothesis, and the
    map is then trimmed to the part connected to the hypothesis node.
    The joint over the surviving variables is unchanged.
    """
    graph = an.network.graph
    if normal not in graph.hypotheses:
        raise ValueError(f"hypothesis {normal!r} is not in the similarity graph")
    model = an.model
    km = model.map
    h = km.distinguished
    features = [v.name for v in km.variables if v.name != h]
    feature_arcs = {(a, b) for a, b in km.arcs if a != h}

    locals_: dict[tuple[str, str], KnowledgeMap] = {}
    star_edges = []
    for d in graph.hypotheses:
        if d == normal:
            continue
        edge = graph.edge_key(normal, d)
        star_edges.append(edge)
        kept = {y for y in features if _rows_differ(model, y, normal, d)}
        comp = _h_component(kept, feature_arcs, features)
        variables = (Variable(h, edge),) + tuple(
            v for v in km.variables if v.name in comp
        )
        arcs = {(h, y) for y in kept} | {
            (a, b) for a, b in feature_arcs if a in comp and b in comp
        }
        locals_[edge] = KnowledgeMap(variables, frozenset(arcs), distinguished=h)

    star_graph = SimilarityGraph(graph.hypotheses, tuple(star_edges))
    star_net = OrdinaryNetwork(star_graph, locals_, h)
    new_km = construct_global(star_net, variable_order=features)
    new_tables = {h: model.table(h)}
    for v in new_km.variables:
        if v.name != h:
            new_tables[v.name] = _project_table(model, new_km, v.name, normal)
    return AssessedNetwork(star_net, AssessedKnowledgeMap(new_km, new_tables))


@dataclass(frozen=True)
class MultiDiseaseMap:
    """Map with one independent binary root per disease; findings are
    combined across present diseases by noisy-OR."""

    model: AssessedKnowledgeMap
    diseases: tuple[str, ...]
    normal_label: str
    assumed_assertions: tuple[str, ...]

    def __post_init__(self):
        km = self.model.map
        for d in self.diseases:
            if km.parents_of(d):
                raise ValueError(f"disease root {d!r} must be parentless")
        roots = set(self.diseases)
        for a, b in km.arcs:
            if a in roots and b in roots:
                raise ValueError("disease roots may not be linked")


def transform_multihyp(
    an: AssessedNetwork,
    root_priors: Mapping[str, float] | None = None,
    normal: str = "NORMAL",
) -> MultiDiseaseMap:
    """Rewrite a star network as a map over independent binary diseases.

    Feature nodes and the arcs among them are copied from the global
    map. A disease gets an arc to exactly the findings in its local map
    against NORMAL, and each finding's table is the noisy-OR of the
    per-disease activations with the NORMAL row as leak, per assignment
    of the finding's feature parents. Root priors default to the
    original differential; pass root_priors to override.

    Independence of the per-disease mechanisms is assumed, not checked;
    the assumptions taken are listed on the returned map.
    """
    graph = an.network.graph
    if normal not in graph.hypotheses:
        raise ValueError(f"hypothesis {normal!r} is not in the similarity graph")
    diseases = tuple(d for d in graph.hypotheses if d != normal)
    edge_set = set(graph.edges)
    for d in diseases:
        if graph.edge_key(normal, d) not in edge_set:
            raise ValueError(
                f"not a star around {normal!r}: no local map for the pair "
                f"({normal}, {d})"
            )
    if len(edge_set) != len(diseases):
        raise ValueError(f"not a star around {normal!r}: extra edges present")

    model = an.model
    km = model.map
    h = km.distinguished
    hvar = km.variable(h)
    findings = [v for v in km.variables if v.name != h]
    for v in findings:
        if v.card != 2:
            raise ValueError(f"finding {v.name!r} is not binary")

    causes: dict[str, list[str]] = {v.name: [] for v in findings}
    for d in diseases:
        local = an.network.local_map(normal, d)
        for v in findings:
            if local.has_variable(v.name):
                causes[v.name].append(d)

    prior_row = np.asarray(model.table(h).rows[0], dtype=float)
    priors = {d: float(prior_row[hvar.index(d)]) for d in diseases}
    if root_priors is not None:
        unknown = set(root_priors) - set(diseases)
        if unknown:
            raise ValueError(f"unknown diseases in root_priors: {sorted(unknown)}")
        priors.update({d: float(p) for d, p in root_priors.items()})

    variables = tuple(Variable(d, ("absent", "present")) for d in diseases) + tuple(
        findings
    )
    arcs = {(a, b) for a, b in km.arcs if a != h}
    for f, ds in causes.items():
        arcs.update((d, f) for d in ds)
    new_km = KnowledgeMap(variables, frozenset(arcs))

    tables: dict[str, ConditionalTable] = {}
    for d in diseases:
        p = priors[d]
        tables[d] = ConditionalTable(d, (), np.array([[1.0 - p, p]]))

    warnings = []
    old_cards = {v.name: v.card for v in km.variables}
    for v in findings:
        old = model.table(v.name)
        feature_parents = tuple(p for p in old.parents if p != h)
        new_parents = new_km.parents_of(v.name)
        cards = tuple(new_km.variable(p).card for p in new_parents)
        n_rows = int(np.prod(cards)) if new_parents else 1
        rows = np.empty((n_rows, 2))
        ds = causes[v.name]
        for r in range(n_rows):
            assign = (
                dict(zip(new_parents, np.unravel_index(r, cards)))
                if new_parents
                else {}
            )

            def p_positive(hyp_label):
                idx = []
                for p in old.parents:
                    if p == h:
                        idx.append(hvar.index(hyp_label))
                    else:
                        idx.append(int(assign[p]))
                cards_old = tuple(old_cards[p] for p in old.parents)
                return float(old.rows[old.row_index(idx, cards_old)][1])

            leak = p_positive(normal)
            spec = NoisyOrSpec(v.name, leak, {d: p_positive(d) for d in ds})
            present = [d for d in ds if assign.get(d, 0) == 1]
            p = noisy_or(spec, present)
            rows[r] = (1.0 - p, p)
        tables[v.name] = ConditionalTable(v.name, new_parents, rows)
        if len(ds) > 1:
            warnings.append(
                f"assumed: the mechanisms by which {', '.join(ds)} cause "
                f"{v.name} act independently (noisy-OR combination)"
            )

    return MultiDiseaseMap(
        AssessedKnowledgeMap(new_km, tables),
        diseases,
        normal,
        tuple(warnings),
    )
