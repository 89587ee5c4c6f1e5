"""Similarity networks: families of knowledge maps indexed by hypothesis pairs.

A similarity graph connects hypotheses an author is willing to compare.
Three network varieties share that graph:

* hypothesis-specific: one map per hypothesis plus, per edge, a set of
  equal/unequal relevance assertions for variables whose conditioning
  parents match in the two maps;
* comprehensive: one local map per edge containing every variable;
* ordinary: one local map per edge containing only variables connected
  to the hypothesis node h.

This module builds each variety from the others, forms global maps by
graph union, and decides whether a composed network could have come
from a single coherent strictly positive distribution. The deciders
return a verdict carrying either a witness (the numbered rule that
failed and the offending edge) or the maximal hypothesis-specific
network generating the input.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Optional, Union

import numpy as np

from .core import (
    JointDistribution,
    KnowledgeMap,
    ValidationReport,
    Variable,
    tolerance,
)

EQUAL = "equal"
UNEQUAL = "unequal"


@dataclass(frozen=True)
class SimilarityGraph:
    """Undirected, connected graph over hypothesis labels."""

    hypotheses: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]

    def __post_init__(self):
        hyps = tuple(self.hypotheses)
        object.__setattr__(self, "hypotheses", hyps)
        if len(set(hyps)) != len(hyps):
            raise ValueError("duplicate hypothesis labels")
        index = {h: i for i, h in enumerate(hyps)}
        seen = set()
        normal = []
        for a, b in self.edges:
            if a not in index or b not in index:
                raise ValueError(f"edge ({a},{b}) references an undeclared hypothesis")
            if a == b:
                raise ValueError(f"self edge on {a}")
            key = (a, b) if index[a] < index[b] else (b, a)
            if key in seen:
                continue
            seen.add(key)
            normal.append(key)
        normal.sort(key=lambda e: (index[e[0]], index[e[1]]))
        object.__setattr__(self, "edges", tuple(normal))
        if len(hyps) > 1:
            reached = {hyps[0]}
            queue = deque([hyps[0]])
            adj: dict[str, set[str]] = {h: set() for h in hyps}
            for a, b in normal:
                adj[a].add(b)
                adj[b].add(a)
            while queue:
                cur = queue.popleft()
                for nxt in adj[cur]:
                    if nxt not in reached:
                        reached.add(nxt)
                        queue.append(nxt)
            if reached != set(hyps):
                missing = sorted(set(hyps) - reached)
                raise ValueError(
                    f"similarity graph is not connected; unreachable: {missing}"
                )

    def edge_key(self, a: str, b: str) -> tuple[str, str]:
        index = {h: i for i, h in enumerate(self.hypotheses)}
        if a not in index or b not in index:
            raise ValueError(f"unknown hypothesis in ({a},{b})")
        return (a, b) if index[a] < index[b] else (b, a)

    def neighbors(self, h: str) -> tuple[str, ...]:
        out = set()
        for a, b in self.edges:
            if a == h:
                out.add(b)
            elif b == h:
                out.add(a)
        return tuple(sorted(out))


@dataclass(frozen=True)
class HsMap:
    hypothesis: str
    map: KnowledgeMap


@dataclass(frozen=True)
class RelevanceSet:
    """Per-edge equal/unequal statements for matching-parents variables."""

    edge: tuple[str, str]
    assertions: Mapping[str, str]

    def __post_init__(self):
        object.__setattr__(self, "edge", tuple(self.edge))
        object.__setattr__(self, "assertions", dict(self.assertions))
        for var, kind in self.assertions.items():
            if kind not in (EQUAL, UNEQUAL):
                raise ValueError(f"assertion for {var} must be equal/unequal")


@dataclass(frozen=True)
class HypothesisSpecificNetwork:
    graph: SimilarityGraph
    hs_maps: tuple[HsMap, ...]
    relevance: tuple[RelevanceSet, ...]
    distinguished: str = "h"

    def __post_init__(self):
        object.__setattr__(self, "hs_maps", tuple(self.hs_maps))
        object.__setattr__(self, "relevance", tuple(self.relevance))

    def hs_map(self, hypothesis: str) -> KnowledgeMap:
        for m in self.hs_maps:
            if m.hypothesis == hypothesis:
                return m.map
        raise ValueError(f"no hs map for {hypothesis!r}")

    def relevance_for(self, a: str, b: str) -> RelevanceSet:
        key = self.graph.edge_key(a, b)
        for rel in self.relevance:
            if tuple(rel.edge) in (key, (key[1], key[0])):
                return rel
        raise ValueError(f"no relevance set for edge ({a},{b})")


@dataclass(frozen=True)
class ComprehensiveNetwork:
    """One local map per edge; every map carries the full variable set."""

    graph: SimilarityGraph
    local_maps: Mapping[tuple[str, str], KnowledgeMap]
    distinguished: str = "h"

    def __post_init__(self):
        object.__setattr__(self, "local_maps", _normalize_locals(self))

    def local_map(self, a: str, b: str) -> KnowledgeMap:
        return self.local_maps[self.graph.edge_key(a, b)]


@dataclass(frozen=True)
class OrdinaryNetwork:
    """One local map per edge, trimmed to nodes connected to h."""

    graph: SimilarityGraph
    local_maps: Mapping[tuple[str, str], KnowledgeMap]
    distinguished: str = "h"

    def __post_init__(self):
        object.__setattr__(self, "local_maps", _normalize_locals(self))

    def local_map(self, a: str, b: str) -> KnowledgeMap:
        return self.local_maps[self.graph.edge_key(a, b)]


def _normalize_locals(net) -> dict[tuple[str, str], KnowledgeMap]:
    out = {}
    for key, km in dict(net.local_maps).items():
        try:
            key = net.graph.edge_key(*key)
        except ValueError:
            key = tuple(key)
        out[key] = km
    return out


@dataclass(frozen=True)
class Witness:
    """Where a consistency check failed: numbered rule plus location."""

    line: Optional[int]
    edge: Optional[tuple[str, str]]
    arc: Optional[tuple[str, str]]
    message: str = ""

    def describe(self) -> str:
        if self.line is not None and self.edge is not None:
            return f"line {self.line}, edge ({self.edge[0]},{self.edge[1]})"
        return self.message


@dataclass(frozen=True)
class ConsistencyVerdict:
    status: str
    witness: Optional[Witness] = None
    constructor: Optional[HypothesisSpecificNetwork] = None
    repairs: tuple = ()

    @property
    def is_consistent(self) -> bool:
        return self.status == "consistent"


AnyLocalNetwork = Union[ComprehensiveNetwork, OrdinaryNetwork]


# ---------------------------------------------------------------------------
# validation


def validate_hs_network(hs: HypothesisSpecificNetwork) -> ValidationReport:
    errors: list[str] = []
    warnings: list[str] = []
    labels = [m.hypothesis for m in hs.hs_maps]
    if sorted(labels) != sorted(set(labels)):
        errors.append("duplicate hs maps for a hypothesis")
    if set(labels) != set(hs.graph.hypotheses):
        errors.append("hs maps do not cover the hypothesis labels exactly")

    varsets = []
    for m in hs.hs_maps:
        varsets.append(frozenset((v.name, v.instances) for v in m.map.variables))
        names = set(m.map.names)
        for a, b in m.map.arcs:
            if a not in names or b not in names:
                errors.append(
                    f"hs map {m.hypothesis}: arc ({a},{b}) has undeclared endpoint"
                )
        if hs.distinguished in names:
            errors.append(
                f"hs map {m.hypothesis} declares the hypothesis variable "
                f"{hs.distinguished!r}"
            )
    if len(set(varsets)) > 1:
        errors.append("hs maps do not share one variable set")

    if not errors and hs.hs_maps:
        union = frozenset().union(*(m.map.arcs for m in hs.hs_maps))
        probe = KnowledgeMap(hs.hs_maps[0].map.variables, union)
        cycle = probe.find_cycle()
        if cycle:
            errors.append(f"graph union of hs maps has a cycle: {' -> '.join(cycle)}")

    keys = set()
    for rel in hs.relevance:
        try:
            key = hs.graph.edge_key(*rel.edge)
        except ValueError:
            errors.append(f"relevance edge {rel.edge} is not in the graph")
            continue
        if key not in hs.graph.edges:
            errors.append(f"relevance edge {rel.edge} is not in the graph")
            continue
        if key in keys:
            errors.append(f"duplicate relevance set for edge {key}")
        keys.add(key)
    for edge in hs.graph.edges:
        if edge not in keys:
            errors.append(f"edge ({edge[0]},{edge[1]}) has no relevance set")

    if not errors:
        for rel in hs.relevance:
            a, b = hs.graph.edge_key(*rel.edge)
            ma, mb = hs.hs_map(a), hs.hs_map(b)
            matching = {
                y
                for y in ma.names
                if set(ma.parents_of(y)) == set(mb.parents_of(y))
            }
            for var in rel.assertions:
                if var not in matching:
                    errors.append(
                        f"edge ({a},{b}): assertion for {var} but its "
                        "conditioning parents differ"
                    )
            for var in sorted(matching - set(rel.assertions)):
                errors.append(f"edge ({a},{b}): missing assertion for {var}")
    return ValidationReport(tuple(errors), tuple(warnings))


def validate_network(net: AnyLocalNetwork) -> ValidationReport:
    errors: list[str] = []
    warnings: list[str] = []
    h = net.distinguished
    have = set(net.local_maps)
    want = set(net.graph.edges)
    for edge in sorted(want - have):
        errors.append(f"no local map for edge ({edge[0]},{edge[1]})")
    for edge in sorted(have - want):
        errors.append(f"local map for unknown edge {edge}")

    instance_of: dict[str, tuple] = {}
    feature_sets = []
    for edge in sorted(have & want):
        m = net.local_maps[edge]
        names = set(m.names)
        if h not in names:
            errors.append(f"local map {edge}: missing hypothesis node {h!r}")
            continue
        if set(m.variable(h).instances) != set(edge):
            errors.append(
                f"local map {edge}: hypothesis instances "
                f"{m.variable(h).instances} do not name the edge pair"
            )
        for a, b in m.arcs:
            if a not in names or b not in names:
                errors.append(f"local map {edge}: arc ({a},{b}) undeclared endpoint")
            if b == h:
                errors.append(f"local map {edge}: {h!r} has an incoming arc from {a}")
        cycle = m.find_cycle()
        if cycle:
            errors.append(f"local map {edge}: cycle {' -> '.join(cycle)}")
        for v in m.variables:
            if v.name == h:
                continue
            prior = instance_of.setdefault(v.name, v.instances)
            if prior != v.instances:
                errors.append(
                    f"variable {v.name} instances differ across local maps"
                )
        feature_sets.append(frozenset(n for n in m.names if n != h))
        if isinstance(net, OrdinaryNetwork):
            linked = m.connected_to(h)
            stray = sorted(names - linked)
            if stray:
                errors.append(
                    f"local map {edge}: nodes not connected to {h!r}: {stray}"
                )

    if isinstance(net, ComprehensiveNetwork) and len(set(feature_sets)) > 1:
        errors.append("local maps do not share one variable set")

    if not errors and net.local_maps:
        union = frozenset().union(*(m.arcs for m in net.local_maps.values()))
        by_name = {}
        for m in net.local_maps.values():
            for v in m.variables:
                by_name.setdefault(v.name, v)
        probe = KnowledgeMap(tuple(by_name.values()), union)
        cycle = probe.find_cycle()
        if cycle:
            errors.append(f"graph union of local maps has a cycle: {' -> '.join(cycle)}")
    return ValidationReport(tuple(errors), tuple(warnings))


def _require(report: ValidationReport, what: str) -> None:
    if not report.ok:
        raise ValueError(f"invalid {what}: " + "; ".join(report.errors))


# ---------------------------------------------------------------------------
# constructions


def construct_comprehensive(hs: HypothesisSpecificNetwork) -> ComprehensiveNetwork:
    """Per edge: graph union of the two hs maps, plus h, plus an arc
    h -> y exactly when the parents of y differ or inequality is asserted."""
    _require(validate_hs_network(hs), "hypothesis-specific network")
    h = hs.distinguished
    base_vars = hs.hs_maps[0].map.variables
    locals_: dict[tuple[str, str], KnowledgeMap] = {}
    for edge in hs.graph.edges:
        a, b = edge
        ma, mb = hs.hs_map(a), hs.hs_map(b)
        rel = hs.relevance_for(a, b)
        arcs = set(ma.arcs) | set(mb.arcs)
        for y in ma.names:
            ca, cb = set(ma.parents_of(y)), set(mb.parents_of(y))
            if ca != cb or rel.assertions[y] == UNEQUAL:
                arcs.add((h, y))
        hvar = Variable(h, edge)
        locals_[edge] = KnowledgeMap(
            (hvar,) + base_vars, frozenset(arcs), distinguished=h
        )
    return ComprehensiveNetwork(hs.graph, locals_, h)


def derive_ordinary(c: ComprehensiveNetwork) -> OrdinaryNetwork:
    """Trim each local map to h plus the nodes undirected-connected to h."""
    _require(validate_network(c), "comprehensive network")
    h = c.distinguished
    locals_: dict[tuple[str, str], KnowledgeMap] = {}
    for edge in c.graph.edges:
        m = c.local_map(*edge)
        keep = m.connected_to(h)
        variables = tuple(v for v in m.variables if v.name in keep)
        arcs = frozenset((x, y) for x, y in m.arcs if x in keep and y in keep)
        locals_[edge] = KnowledgeMap(variables, arcs, distinguished=h)
    return OrdinaryNetwork(c.graph, locals_, h)


def construct_global(
    net: AnyLocalNetwork, variable_order: Optional[list[str]] = None
) -> KnowledgeMap:
    """Graph union of all local maps over the full hypothesis list."""
    h = net.distinguished
    by_name: dict[str, Variable] = {}
    arcs: set[tuple[str, str]] = set()
    for edge in net.graph.edges:
        m = net.local_maps[net.graph.edge_key(*edge)]
        for v in m.variables:
            if v.name == h:
                continue
            prior = by_name.setdefault(v.name, v)
            if prior.instances != v.instances:
                raise ValueError(
                    f"variable {v.name} has conflicting instance sets in the union"
                )
        arcs.update(m.arcs)
    hvar = Variable(h, net.graph.hypotheses)
    if variable_order is not None:
        missing = set(by_name) - set(variable_order)
        if missing:
            raise ValueError(f"variable_order omits {sorted(missing)}")
        ordered = tuple(by_name[n] for n in variable_order if n in by_name)
    else:
        ordered = tuple(by_name[n] for n in sorted(by_name))
    out = KnowledgeMap((hvar,) + ordered, frozenset(arcs), distinguished=h)
    cycle = out.find_cycle()
    if cycle:
        raise ValueError(f"directed cycle in map union: {' -> '.join(cycle)}")
    return out


# ---------------------------------------------------------------------------
# consistency


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra

    def joined(self, a, b):
        return self.find(a) == self.find(b)


def check_hs_consistency(hs: HypothesisSpecificNetwork) -> ConsistencyVerdict:
    """A chain of equality assertions for y must not close a loop
    against an inequality assertion for y."""
    _require(validate_hs_network(hs), "hypothesis-specific network")
    variables = sorted(hs.hs_maps[0].map.names)
    for y in variables:
        uf = _UnionFind(hs.graph.hypotheses)
        for rel in sorted(hs.relevance, key=lambda r: r.edge):
            if rel.assertions.get(y) == EQUAL:
                uf.union(*hs.graph.edge_key(*rel.edge))
        for rel in sorted(hs.relevance, key=lambda r: r.edge):
            if rel.assertions.get(y) != UNEQUAL:
                continue
            a, b = hs.graph.edge_key(*rel.edge)
            if uf.joined(a, b):
                witness = Witness(
                    line=None,
                    edge=(a, b),
                    arc=None,
                    message=(
                        f"variable {y}: {a} and {b} are chained by equality "
                        f"assertions yet edge ({a},{b}) asserts unequal"
                    ),
                )
                return ConsistencyVerdict("inconsistent", witness=witness)
    return ConsistencyVerdict("consistent", constructor=hs)


def _path_between(edges, start, goal):
    """Shortest undirected path as an edge list, lexicographic ties."""
    adj: dict[str, list[tuple[str, tuple[str, str]]]] = {}
    for e in edges:
        a, b = e
        adj.setdefault(a, []).append((b, e))
        adj.setdefault(b, []).append((a, e))
    for nbrs in adj.values():
        nbrs.sort()
    seen = {start}
    queue = deque([(start, [])])
    while queue:
        node, path = queue.popleft()
        if node == goal:
            return path
        for nxt, via in adj.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                queue.append((nxt, path + [via]))
    return None


def _cycle_failure(edges_without, edge, y, h, line):
    path = _path_between(edges_without, edge[0], edge[1])
    if path is None:
        return None
    witness = Witness(line=line, edge=edge, arc=(h, y))
    repairs = tuple((tuple(e), (h, y)) for e in path)
    return ConsistencyVerdict("inconsistent", witness=witness, repairs=repairs)


def check_consistency_comprehensive(c: ComprehensiveNetwork) -> ConsistencyVerdict:
    """Decide whether some strictly positive distribution family could
    have produced every local map, and if so return the maximal
    hypothesis-specific network that generates the input.

    Rule numbering (cited by witnesses): 5 rejects an interaction whose
    hypothesis relevance is contradicted on both endpoints, 7 on either
    endpoint, 16 rejects an h arc alone on a similarity cycle.
    """
    _require(validate_network(c), "comprehensive network")
    h = c.distinguished
    edges = sorted(c.graph.edges)
    local = {e: c.local_map(*e) for e in edges}
    feature_names = sorted(n for n in local[edges[0]].names if n != h)
    nd_arcs = sorted(
        {arc for m in local.values() for arc in m.arcs if arc[0] != h}
    )
    hs_arcs: dict[str, set] = {hyp: set() for hyp in c.graph.hypotheses}

    for x, y in nd_arcs:
        lacking = [e for e in edges if (x, y) not in local[e].arcs]
        posted: set[str] = set()
        for e in lacking:
            posted.update(e)
        for e in edges:
            m = local[e]
            if (x, y) not in m.arcs:
                continue
            if (h, y) in m.arcs:
                hit = e[0] in posted and e[1] in posted
                line = 5
            else:
                hit = e[0] in posted or e[1] in posted
                line = 7
            if hit:
                witness = Witness(line=line, edge=e, arc=(x, y))
                repairs = tuple((tuple(e2), (x, y)) for e2 in lacking)
                return ConsistencyVerdict(
                    "inconsistent", witness=witness, repairs=repairs
                )
        for hyp in c.graph.hypotheses:
            if hyp not in posted:
                hs_arcs[hyp].add((x, y))

    for y in feature_names:
        withh = [e for e in edges if (h, y) in local[e].arcs]
        without = [e for e in edges if (h, y) not in local[e].arcs]
        for e in withh:
            failure = _cycle_failure(without, e, y, h, line=16)
            if failure is not None:
                return failure

    return _consistent_verdict(c, local, hs_arcs, feature_names)


def check_consistency_ordinary(o: OrdinaryNetwork) -> ConsistencyVerdict:
    """Ordinary-network variant: local maps may omit variables, so
    omission itself posts relevance constraints and propagates through
    maps mentioning neither endpoint.

    Rule numbering (cited by witnesses): 11 and 13 mirror rules 5 and 7
    of the comprehensive decider; 22 is the cycle rule.
    """
    _require(validate_network(o), "ordinary network")
    h = o.distinguished
    edges = sorted(o.graph.edges)
    local = {e: o.local_map(*e) for e in edges}
    feature_names = sorted(
        {n for m in local.values() for n in m.names if n != h}
    )
    nd_arcs = sorted(
        {arc for m in local.values() for arc in m.arcs if arc[0] != h}
    )
    hs_arcs: dict[str, set] = {hyp: set() for hyp in o.graph.hypotheses}

    for x, y in nd_arcs:
        posted: set[str] = set()
        lacking = []
        for e in edges:
            m = local[e]
            has_x, has_y = m.has_variable(x), m.has_variable(y)
            if has_x and has_y and (x, y) not in m.arcs:
                posted.update(e)
                lacking.append(e)
            elif has_x != has_y:
                posted.update(e)
                lacking.append(e)
        neither = [
            e
            for e in edges
            if not local[e].has_variable(x) and not local[e].has_variable(y)
        ]
        visited: set = set()
        moved = True
        while moved:
            moved = False
            for e in neither:
                if e in visited:
                    continue
                if e[0] in posted or e[1] in posted:
                    posted.update(e)
                    visited.add(e)
                    moved = True
                    break
        for e in edges:
            m = local[e]
            if (x, y) not in m.arcs:
                continue
            if (h, y) in m.arcs:
                hit = e[0] in posted and e[1] in posted
                line = 11
            else:
                hit = e[0] in posted or e[1] in posted
                line = 13
            if hit:
                witness = Witness(line=line, edge=e, arc=(x, y))
                repairs = tuple((tuple(e2), (x, y)) for e2 in lacking)
                return ConsistencyVerdict(
                    "inconsistent", witness=witness, repairs=repairs
                )
        for hyp in o.graph.hypotheses:
            if hyp not in posted:
                hs_arcs[hyp].add((x, y))

    for y in feature_names:
        withh = [
            e
            for e in edges
            if local[e].has_variable(y) and (h, y) in local[e].arcs
        ]
        without = [e for e in edges if e not in withh]
        for e in withh:
            failure = _cycle_failure(without, e, y, h, line=22)
            if failure is not None:
                return failure

    return _consistent_verdict(o, local, hs_arcs, feature_names)


def _consistent_verdict(net, local, hs_arcs, feature_names):
    """Assemble the maximal constructor and its synthesized relevance."""
    h = net.distinguished
    by_name: dict[str, Variable] = {}
    for m in local.values():
        for v in m.variables:
            if v.name != h:
                by_name.setdefault(v.name, v)
    variables = tuple(by_name[n] for n in feature_names)

    maps = tuple(
        HsMap(hyp, KnowledgeMap(variables, frozenset(hs_arcs[hyp])))
        for hyp in net.graph.hypotheses
    )
    parents = {
        hyp: {y: {a for a, b in hs_arcs[hyp] if b == y} for y in feature_names}
        for hyp in net.graph.hypotheses
    }
    relevance = []
    for edge in net.graph.edges:
        a, b = edge
        m = local[edge]
        assertions = {}
        for y in feature_names:
            if parents[a][y] != parents[b][y]:
                continue
            h_to_y = m.has_variable(y) and (h, y) in m.arcs
            assertions[y] = UNEQUAL if h_to_y else EQUAL
        relevance.append(RelevanceSet(edge, assertions))
    constructor = HypothesisSpecificNetwork(
        net.graph, maps, tuple(relevance), h
    )
    return ConsistencyVerdict("consistent", constructor=constructor)


# ---------------------------------------------------------------------------
# exhaustiveness audit


def check_exhaustive(
    o: OrdinaryNetwork, extra_feature: Variable, joint: JointDistribution
) -> bool:
    """True unless the feature is missing from every local map while
    still interacting with the hypothesis variable in the joint."""
    name = extra_feature.name
    for m in o.local_maps.values():
        if m.has_variable(name):
            return True
    joint_names = [v.name for v in joint.variables]
    if name not in joint_names or o.distinguished not in joint_names:
        raise ValueError("joint must cover the hypothesis node and the feature")
    return not _interacts(joint, o.distinguished, name)


def _interacts(joint: JointDistribution, a: str, b: str, atol=None) -> bool:
    """Conditional dependence of a and b given any instance of any
    subset of the remaining variables."""
    atol = tolerance() if atol is None else atol
    names = [v.name for v in joint.variables]
    arr = joint.as_array()
    ia, ib = names.index(a), names.index(b)
    others = [i for i in range(arr.ndim) if i not in (ia, ib)]
    for r in range(len(others) + 1):
        for subset in combinations(others, r):
            keep = [ia, ib] + list(subset)
            drop = tuple(i for i in range(arr.ndim) if i not in keep)
            marg = arr.sum(axis=drop) if drop else arr
            kept_axes = sorted(keep)
            pos = {ax: k for k, ax in enumerate(kept_axes)}
            moved = np.moveaxis(marg, [pos[ia], pos[ib]], [0, 1])
            flat = moved.reshape(moved.shape[0], moved.shape[1], -1)
            for k in range(flat.shape[2]):
                cell = flat[:, :, k]
                total = cell.sum()
                if total <= 0:
                    continue
                p = cell / total
                outer = p.sum(axis=1, keepdims=True) * p.sum(axis=0, keepdims=True)
                if np.abs(p - outer).max() > atol:
                    return True
    return False
