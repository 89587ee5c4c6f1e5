"""Network bundles: the on-disk JSON document and its compilation.

A bundle carries everything a diagnostic session needs: the variables,
hypothesis priors, a similarity graph with one local map per edge,
partition-style assessments for every feature, and optional utility
and cost sections. Loading validates structure and references and
reports every problem as a ``$.path: message`` diagnostic; compiling
runs the consistency check, expands the partitions into full
conditional tables, and splits the result into inference clusters.

Canonical text form: UTF-8, object keys sorted, two-space indent,
numbers at no more than twelve significant digits, trailing newline.
Saving a loaded document reproduces canonical input byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import (
    AssessedKnowledgeMap,
    ConditionalTable,
    Variable,
    tolerance,
)
from .decision import CostModel, UtilityMatrix
from .inference import ClusterDecomposition, decompose_clusters
from .partitions import HypothesisSet, Partition, expand_assessments
from .similarity import (
    ConsistencyVerdict,
    KnowledgeMap,
    OrdinaryNetwork,
    SimilarityGraph,
    check_consistency_ordinary,
    construct_global,
    validate_network,
)

AUDIT_STATE_CAP = 1 << 16


class BundleError(ValueError):
    """One or more path-addressed diagnostics for a bundle document."""

    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = (diagnostics,)
        self.diagnostics = tuple(diagnostics)
        super().__init__("\n".join(self.diagnostics))


# ---------------------------------------------------------------------------
# canonical JSON


def _serialize(value, indent: int) -> str:
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, int):
        return repr(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise BundleError(f"$: cannot serialize non-finite number {value!r}")
        return format(value, ".12g")
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    pad = "  " * (indent + 1)
    close = "  " * indent
    if isinstance(value, Mapping):
        if not value:
            return "{}"
        parts = []
        for key in sorted(value):
            if not isinstance(key, str):
                raise BundleError(f"$: object key {key!r} is not a string")
            parts.append(
                f"{pad}{json.dumps(key, ensure_ascii=False)}: "
                f"{_serialize(value[key], indent + 1)}"
            )
        return "{\n" + ",\n".join(parts) + "\n" + close + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        parts = [pad + _serialize(item, indent + 1) for item in value]
        return "[\n" + ",\n".join(parts) + "\n" + close + "]"
    raise BundleError(f"$: cannot serialize {type(value).__name__} values")


def canonical_dumps(value) -> str:
    """Deterministic JSON text for ``value`` with a trailing newline."""
    return _serialize(value, 0) + "\n"


def _reject_duplicates(pairs):
    out = {}
    for key, val in pairs:
        if key in out:
            raise BundleError(f"$: duplicate key {key!r}")
        out[key] = val
    return out


def canonical_loads(text):
    """Parse JSON, rejecting duplicate object keys."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise BundleError(f"$: not valid UTF-8: {exc}") from None
    try:
        return json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise BundleError(f"$: invalid JSON: {exc.msg} (line {exc.lineno})") from None


# ---------------------------------------------------------------------------
# bundle objects


@dataclass(frozen=True)
class NetworkBundle:
    """A validated document plus the typed objects derived from it."""

    doc: Mapping[str, object]
    name: str
    version: str
    variables: tuple[Variable, ...]
    distinguished: str
    prior: tuple[float, ...]
    network: OrdinaryNetwork
    partitions: Mapping[str, tuple[Partition, ...]]
    utilities: Optional[UtilityMatrix]
    costs: Optional[CostModel]

    @property
    def hypotheses(self) -> tuple[str, ...]:
        return self.network.graph.hypotheses

    @property
    def features(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.name != self.distinguished)


@dataclass(frozen=True)
class CompiledModel:
    """Outcome of compiling a bundle. ``model`` and ``clusters`` are
    None exactly when the verdict is inconsistent."""

    bundle: NetworkBundle
    verdict: ConsistencyVerdict
    model: Optional[AssessedKnowledgeMap]
    clusters: Optional[ClusterDecomposition]
    warnings: tuple[str, ...] = ()


def save_bundle(bundle: NetworkBundle) -> str:
    return canonical_dumps(bundle.doc)


def network_id(bundle: NetworkBundle) -> str:
    digest = hashlib.sha256(save_bundle(bundle).encode("utf-8")).hexdigest()
    return "n-" + digest[:12]


# ---------------------------------------------------------------------------
# loading


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_keys(obj, path, required, optional, err) -> bool:
    ok = True
    for key in required:
        if key not in obj:
            err(path, f"missing required key {key!r}")
            ok = False
    for key in obj:
        if key not in required and key not in optional:
            err(path, f"unknown key {key!r}")
            ok = False
    return ok


def _expect(obj, path, kind, err) -> bool:
    names = {dict: "an object", list: "a list", str: "a string"}
    if not isinstance(obj, kind):
        err(path, f"expected {names[kind]}")
        return False
    return True


def _load_variables(raw, err) -> dict[str, Variable]:
    out: dict[str, Variable] = {}
    if not _expect(raw, "$.variables", list, err):
        return out
    if not raw:
        err("$.variables", "at least one variable is required")
    for i, item in enumerate(raw):
        path = f"$.variables[{i}]"
        if not _expect(item, path, dict, err):
            continue
        if not _check_keys(item, path, ("name", "instances"), (), err):
            continue
        name, instances = item["name"], item["instances"]
        if not _expect(name, f"{path}.name", str, err):
            continue
        if not _expect(instances, f"{path}.instances", list, err):
            continue
        bad = False
        for j, label in enumerate(instances):
            if not isinstance(label, str):
                err(f"{path}.instances[{j}]", "expected a string")
                bad = True
        if bad:
            continue
        if name in out:
            err(path, f"duplicate variable name {name!r}")
            continue
        try:
            out[name] = Variable(name, tuple(instances))
        except ValueError as exc:
            err(path, str(exc))
    return out


def _load_priors(raw, hvar: Variable, err) -> tuple[float, ...]:
    if not _expect(raw, "$.priors", dict, err):
        return ()
    values: dict[str, float] = {}
    for key, val in raw.items():
        if not _is_number(val):
            err(f"$.priors.{key}", "expected a number")
            return ()
        values[key] = float(val)
    if set(values) != set(hvar.instances):
        err("$.priors", f"keys do not match the instances of {hvar.name!r}")
        return ()
    negative = [k for k, v in values.items() if v < 0]
    if negative:
        err("$.priors", f"negative probability for {negative[0]!r}")
        return ()
    total = sum(values[k] for k in hvar.instances)
    if abs(total - 1.0) > tolerance():
        err("$.priors", f"probabilities sum to {total!r}, not 1")
        return ()
    return tuple(values[k] for k in hvar.instances)


def _load_graph(raw, hvar: Variable, err) -> Optional[SimilarityGraph]:
    if not _expect(raw, "$.similarity_graph", list, err):
        return None
    edges = []
    ok = True
    for i, edge in enumerate(raw):
        path = f"$.similarity_graph[{i}]"
        if not isinstance(edge, list) or len(edge) != 2:
            err(path, "expected a pair of hypothesis labels")
            ok = False
            continue
        for label in edge:
            if not isinstance(label, str) or label not in hvar.instances:
                err(path, f"unknown hypothesis {label!r}")
                ok = False
        edges.append(tuple(edge))
    if not ok:
        return None
    try:
        return SimilarityGraph(hvar.instances, tuple(edges))
    except ValueError as exc:
        err("$.similarity_graph", str(exc))
        return None


def _load_local_maps(raw, graph, variables, distinguished, err):
    locals_: dict[tuple[str, str], KnowledgeMap] = {}
    if not _expect(raw, "$.local_maps", list, err):
        return locals_
    for i, item in enumerate(raw):
        path = f"$.local_maps[{i}]"
        if not _expect(item, path, dict, err):
            continue
        if not _check_keys(item, path, ("pair", "variables", "arcs"), (), err):
            continue
        pair = item["pair"]
        if not isinstance(pair, list) or len(pair) != 2 or not all(
            isinstance(x, str) for x in pair
        ):
            err(f"{path}.pair", "expected a pair of hypothesis labels")
            continue
        try:
            key = graph.edge_key(*pair)
        except ValueError:
            err(f"{path}.pair", f"({pair[0]},{pair[1]}) is not an edge of the similarity graph")
            continue
        if key not in graph.edges:
            err(f"{path}.pair", f"({pair[0]},{pair[1]}) is not an edge of the similarity graph")
            continue
        if key in locals_:
            err(f"{path}.pair", f"duplicate local map for edge ({key[0]},{key[1]})")
            continue
        if not _expect(item["variables"], f"{path}.variables", list, err):
            continue
        feats: list[str] = []
        ok = True
        for j, fname in enumerate(item["variables"]):
            fpath = f"{path}.variables[{j}]"
            if not isinstance(fname, str):
                err(fpath, "expected a string")
                ok = False
            elif fname == distinguished:
                err(fpath, "the distinguished variable is implicit in local maps")
                ok = False
            elif fname not in variables:
                err(fpath, f"unknown variable {fname!r}")
                ok = False
            elif fname in feats:
                err(fpath, f"duplicate variable {fname!r}")
                ok = False
            else:
                feats.append(fname)
        if not _expect(item["arcs"], f"{path}.arcs", list, err):
            continue
        allowed = {distinguished, *feats}
        arcs = []
        for j, arc in enumerate(item["arcs"]):
            apath = f"{path}.arcs[{j}]"
            if not isinstance(arc, list) or len(arc) != 2 or not all(
                isinstance(x, str) for x in arc
            ):
                err(apath, "expected a [parent, child] pair")
                ok = False
                continue
            missing = [x for x in arc if x not in allowed]
            if missing:
                err(apath, f"{missing[0]!r} is not a variable of this local map")
                ok = False
                continue
            arcs.append(tuple(arc))
        if not ok:
            continue
        hvar = Variable(distinguished, key)
        members = (hvar,) + tuple(variables[f] for f in feats)
        try:
            locals_[key] = KnowledgeMap(members, frozenset(arcs), distinguished=distinguished)
        except ValueError as exc:
            err(path, str(exc))
    return locals_


def _build_set(obj, path, hypotheses, err) -> Optional[HypothesisSet]:
    if not _expect(obj, path, dict, err):
        return None
    if not _check_keys(obj, path, ("name", "members"), (), err):
        return None
    if not _expect(obj["name"], f"{path}.name", str, err):
        return None
    if not _expect(obj["members"], f"{path}.members", list, err):
        return None
    members = []
    ok = True
    for j, m in enumerate(obj["members"]):
        if isinstance(m, str):
            if m not in hypotheses:
                err(path, f"unknown hypothesis {m!r}")
                ok = False
            else:
                members.append(m)
        elif isinstance(m, dict):
            nested = _build_set(m, f"{path}.members[{j}]", hypotheses, err)
            if nested is None:
                ok = False
            else:
                members.append(nested)
        else:
            err(f"{path}.members[{j}]", "expected a hypothesis label or a nested set")
            ok = False
    if not ok:
        return None
    try:
        return HypothesisSet(obj["name"], tuple(members))
    except ValueError as exc:
        err(path, str(exc))
        return None


def _load_partitions(raw, variables, distinguished, used, err):
    out: dict[str, tuple[Partition, ...]] = {}
    if not _expect(raw, "$.partitions", dict, err):
        return out
    for fname in sorted(used):
        if fname not in raw:
            err("$.partitions", f"missing partitions for feature {fname!r}")
    hypotheses = variables[distinguished].instances
    for fname, entries in raw.items():
        if fname not in used:
            err("$.partitions", f"{fname!r} names no feature used by the local maps")
            continue
        fvar = variables[fname]
        if not _expect(entries, f"$.partitions.{fname}", list, err):
            continue
        if not entries:
            err(f"$.partitions.{fname}", "at least one partition is required")
            continue
        parts = []
        for i, item in enumerate(entries):
            path = f"$.partitions.{fname}[{i}]"
            if not _expect(item, path, dict, err):
                continue
            if not _check_keys(item, path, ("conditioning", "sets", "rows"), (), err):
                continue
            conditioning = item["conditioning"]
            if not _expect(conditioning, f"{path}.conditioning", dict, err):
                continue
            cond_ok = True
            for ckey, cval in conditioning.items():
                cpath = f"{path}.conditioning"
                if ckey not in variables or ckey == distinguished:
                    err(cpath, f"unknown variable {ckey!r}")
                    cond_ok = False
                elif not isinstance(cval, str) or cval not in variables[ckey].instances:
                    err(cpath, f"{cval!r} is not an instance of {ckey!r}")
                    cond_ok = False
            if not _expect(item["sets"], f"{path}.sets", list, err):
                continue
            sets = []
            for k, sobj in enumerate(item["sets"]):
                built = _build_set(sobj, f"{path}.sets[{k}]", hypotheses, err)
                if built is not None:
                    sets.append(built)
            if len(sets) != len(item["sets"]):
                continue
            if not _expect(item["rows"], f"{path}.rows", list, err):
                continue
            rows = item["rows"]
            if len(rows) != len(sets):
                err(path, f"{len(sets)} sets but {len(rows)} rows")
                continue
            rows_ok = True
            for j, row in enumerate(rows):
                rpath = f"{path}.rows[{j}]"
                if not isinstance(row, list) or not all(_is_number(x) for x in row):
                    err(rpath, "expected a list of numbers")
                    rows_ok = False
                    continue
                if len(row) != fvar.card:
                    err(
                        rpath,
                        f"distribution length {len(row)} does not match "
                        f"{fname!r} cardinality {fvar.card}",
                    )
                    rows_ok = False
                    continue
                if any(x < 0 for x in row):
                    err(rpath, "negative entries")
                    rows_ok = False
                    continue
                total = float(sum(row))
                if total != 0.0 and abs(total - 1.0) > tolerance():
                    err(rpath, f"entries sum to {total!r}, not 1")
                    rows_ok = False
            if not (cond_ok and rows_ok):
                continue
            parts.append(
                Partition(fname, dict(conditioning), tuple(sets), tuple(tuple(r) for r in rows))
            )
        if len(parts) == len(entries):
            out[fname] = tuple(parts)
    return out


def _load_utilities(raw, hvar: Variable, err) -> Optional[UtilityMatrix]:
    if not _expect(raw, "$.utilities", dict, err):
        return None
    keys = set(raw)
    if keys == {"hypotheses", "rows"}:
        hyps = raw["hypotheses"]
        if not isinstance(hyps, list) or tuple(hyps) != hvar.instances:
            err(
                "$.utilities.hypotheses",
                f"must list the instances of {hvar.name!r} in declaration order",
            )
            return None
        try:
            return UtilityMatrix(tuple(hyps), raw["rows"])
        except (ValueError, TypeError) as exc:
            err("$.utilities", str(exc))
            return None
    if keys == {"group_of", "groups", "rows"}:
        group_of, groups = raw["group_of"], raw["groups"]
        if not isinstance(group_of, dict) or not isinstance(groups, list):
            err("$.utilities", "group form needs a 'group_of' object and a 'groups' list")
            return None
        try:
            return UtilityMatrix.from_groups(hvar.instances, group_of, tuple(groups), raw["rows"])
        except (ValueError, TypeError) as exc:
            err("$.utilities", str(exc))
            return None
    err("$.utilities", "expected either the 'hypotheses' or the 'groups' form")
    return None


def _load_costs(raw, used, err) -> Optional[CostModel]:
    if not _expect(raw, "$.costs", dict, err):
        return None
    if not _check_keys(raw, "$.costs", ("features",), ("dollars_per_micromort",), err):
        return None
    feats = raw["features"]
    if not _expect(feats, "$.costs.features", dict, err):
        return None
    ok = True
    for key, val in feats.items():
        if key not in used:
            err("$.costs.features", f"unknown feature {key!r}")
            ok = False
        elif not _is_number(val):
            err("$.costs.features", f"cost for {key!r} must be a number")
            ok = False
        elif val < 0:
            err("$.costs.features", f"cost for {key!r} is negative")
            ok = False
    dollars = raw.get("dollars_per_micromort", 20.0)
    if not _is_number(dollars) or dollars <= 0:
        err("$.costs.dollars_per_micromort", "must be positive")
        ok = False
    if not ok:
        return None
    return CostModel({k: float(v) for k, v in feats.items()}, float(dollars))


TOP_REQUIRED = (
    "metadata",
    "variables",
    "distinguished",
    "priors",
    "similarity_graph",
    "local_maps",
    "partitions",
)
TOP_OPTIONAL = ("utilities", "costs")


def load_bundle(data) -> NetworkBundle:
    """Parse and validate a bundle document from JSON text or bytes."""
    raw = canonical_loads(data)
    if not isinstance(raw, dict):
        raise BundleError("$: the bundle must be a JSON object")

    diags: list[str] = []

    def err(path, msg):
        diags.append(f"{path}: {msg}")

    _check_keys(raw, "$", TOP_REQUIRED, TOP_OPTIONAL, err)
    if diags:
        raise BundleError(diags)

    meta = raw["metadata"]
    name = version = ""
    if _expect(meta, "$.metadata", dict, err) and _check_keys(
        meta, "$.metadata", ("name", "version"), ("description",), err
    ):
        for key in ("name", "version", "description"):
            if key in meta and not isinstance(meta[key], str):
                err(f"$.metadata.{key}", "expected a string")
        name = meta.get("name", "")
        version = meta.get("version", "")

    variables = _load_variables(raw["variables"], err)

    distinguished = raw["distinguished"]
    if not isinstance(distinguished, str) or distinguished not in variables:
        err("$.distinguished", f"{distinguished!r} is not a declared variable")
        raise BundleError(diags)
    hvar = variables[distinguished]

    prior = _load_priors(raw["priors"], hvar, err)
    if diags:
        raise BundleError(diags)

    graph = _load_graph(raw["similarity_graph"], hvar, err)
    if graph is None:
        raise BundleError(diags)

    locals_ = _load_local_maps(raw["local_maps"], graph, variables, distinguished, err)
    if diags:
        raise BundleError(diags)

    network = OrdinaryNetwork(graph, locals_, distinguished=distinguished)
    for msg in validate_network(network).errors:
        err("$.local_maps", msg)

    used: set[str] = set()
    for km in locals_.values():
        used.update(n for n in km.names if n != distinguished)
    order = {v: i for i, v in enumerate(variables)}
    for fname in variables:
        if fname != distinguished and fname not in used:
            err(f"$.variables[{order[fname]}]", f"variable {fname!r} is not used by any local map")

    partitions = _load_partitions(raw["partitions"], variables, distinguished, used, err)

    utilities = None
    if "utilities" in raw:
        utilities = _load_utilities(raw["utilities"], hvar, err)
    costs = None
    if "costs" in raw:
        costs = _load_costs(raw["costs"], used, err)

    if diags:
        raise BundleError(diags)

    return NetworkBundle(
        doc=raw,
        name=name,
        version=version,
        variables=tuple(variables.values()),
        distinguished=distinguished,
        prior=prior,
        network=network,
        partitions=partitions,
        utilities=utilities,
        costs=costs,
    )


# ---------------------------------------------------------------------------
# compilation


def _project_away_h(table: ConditionalTable, hvar: Variable, feature: Variable,
                    parent_vars: Sequence[Variable], distinguished: str):
    """Drop the leading hypothesis axis of an expanded table whose
    feature has no hypothesis arc, verifying the slices agree."""
    cards = [v.card for v in parent_vars]
    block = table.rows.reshape([hvar.card] + cards + [feature.card])
    for k in range(1, hvar.card):
        if not np.array_equal(block[k], block[0]):
            raise BundleError(
                f"$.partitions.{feature.name}: the partitions distinguish hypotheses "
                f"but no local map draws the arc ({distinguished},{feature.name})"
            )
    rows = block[0].reshape(-1, feature.card)
    return ConditionalTable(feature.name, tuple(v.name for v in parent_vars), rows)


def _probability_audit(model: AssessedKnowledgeMap):
    """Classify special rows by the reachability of their conditioning
    event: an all-zero row on a reachable event is an error, a normal
    row on an unreachable event only a warning. All-zero rows are
    treated as reachable-anywhere for the reachability computation by
    substituting a uniform stand-in."""
    km = model.map
    cards = [v.card for v in km.variables]
    n_states = int(np.prod(cards))
    if n_states > AUDIT_STATE_CAP:
        return [], [f"probability audit skipped: joint has {n_states} states"]

    axis = {v.name: i for i, v in enumerate(km.variables)}
    joint = np.ones(tuple(cards))
    zero_rows: dict[str, np.ndarray] = {}
    for v in km.variables:
        t = model.table(v.name)
        rows = np.array(t.rows)
        zeros = rows.sum(axis=1) == 0.0
        zero_rows[v.name] = zeros
        if zeros.any():
            rows[zeros] = 1.0 / rows.shape[1]
        pcards = [km.variable(p).card for p in t.parents]
        block = rows.reshape(pcards + [v.card])
        dims = [axis[p] for p in t.parents] + [axis[v.name]]
        block = np.transpose(block, np.argsort(dims))
        shape = [1] * len(cards)
        for d, s in zip(sorted(dims), block.shape):
            shape[d] = s
        joint = joint * block.reshape(shape)

    errors: list[str] = []
    warnings: list[str] = []
    for v in km.variables:
        t = model.table(v.name)
        if not t.parents:
            continue
        pdims = [axis[p] for p in t.parents]
        other = tuple(i for i in range(len(cards)) if i not in pdims)
        marg = joint.sum(axis=other) if other else joint
        perm = [sorted(pdims).index(d) for d in pdims]
        flat = np.transpose(marg, perm).reshape(-1)
        pcards = [km.variable(p).card for p in t.parents]
        zeros = zero_rows[v.name]
        for k in range(flat.size):
            reachable = bool(flat[k] > 0.0)
            if zeros[k] != reachable:
                continue
            assign = np.unravel_index(k, pcards)
            event = ", ".join(
                f"{p}={km.variable(p).instances[i]}"
                for p, i in zip(t.parents, assign)
            )
            if zeros[k]:
                errors.append(
                    f"$.partitions.{v.name}: all-zero distribution for "
                    f"reachable conditioning event ({event})"
                )
            else:
                warnings.append(
                    f"table for {v.name!r}: assessed row for unreachable "
                    f"conditioning event ({event})"
                )
    return errors, warnings


def compile_bundle(bundle: NetworkBundle) -> CompiledModel:
    """Check consistency and expand the partitions into a full model.

    Inconsistent bundles come back with the verdict only; assessment
    problems raise BundleError with path-addressed diagnostics.
    """
    verdict = check_consistency_ordinary(bundle.network)
    if not verdict.is_consistent:
        return CompiledModel(bundle, verdict, None, None, ())

    km = construct_global(bundle.network, variable_order=list(bundle.features))
    hvar = km.variable(bundle.distinguished)
    tables: dict[str, ConditionalTable] = {
        bundle.distinguished: ConditionalTable(bundle.distinguished, (), [list(bundle.prior)])
    }
    diags: list[str] = []
    for fname in bundle.features:
        fvar = km.variable(fname)
        parents = km.parents_of(fname)
        parent_vars = [km.variable(p) for p in parents if p != bundle.distinguished]
        try:
            expanded = expand_assessments(hvar, fvar, parent_vars, bundle.partitions[fname])
            if bundle.distinguished in parents:
                tables[fname] = expanded
            else:
                tables[fname] = _project_away_h(
                    expanded, hvar, fvar, parent_vars, bundle.distinguished
                )
        except BundleError as exc:
            diags.extend(exc.diagnostics)
        except ValueError as exc:
            diags.append(f"$.partitions.{fname}: {exc}")
    if diags:
        raise BundleError(diags)

    model = AssessedKnowledgeMap(km, tables)
    errors, warnings = _probability_audit(model)
    if errors:
        raise BundleError(errors)
    return CompiledModel(bundle, verdict, model, decompose_clusters(km), tuple(warnings))
