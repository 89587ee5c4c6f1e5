"""Knowledge maps: DAGs of discrete variables with conditional tables.

This is the substrate layer. It owns the joint-distribution oracle
(full enumeration, capped), d-separation, superfluous-arc testing and
arc reversal. Everything here is immutable and pure; the comparison
tolerance defaults to 1e-9 and can be overridden through the
SIMNET_TOLERANCE environment variable.
"""

from __future__ import annotations

import math
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

DEFAULT_TOLERANCE = 1e-9
JOINT_STATE_CAP = 1 << 22


def tolerance() -> float:
    """Absolute tolerance for probability comparisons."""
    raw = os.environ.get("SIMNET_TOLERANCE")
    if raw is None:
        return DEFAULT_TOLERANCE
    try:
        return float(raw)
    except ValueError:
        return DEFAULT_TOLERANCE


class ImpossibleEvidenceError(ValueError):
    """Raised when conditioning on an event of probability zero."""


@dataclass(frozen=True)
class Variable:
    """A discrete variable with a stable, ordered instance list."""

    name: str
    instances: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        if len(self.instances) < 2:
            raise ValueError(f"variable {self.name!r} needs at least 2 instances")
        if len(set(self.instances)) != len(self.instances):
            raise ValueError(f"variable {self.name!r} has duplicate instance labels")

    @property
    def card(self) -> int:
        return len(self.instances)

    def index(self, label: str) -> int:
        try:
            return self.instances.index(label)
        except ValueError:
            raise ValueError(
                f"{label!r} is not an instance of variable {self.name!r}"
            ) from None


@dataclass(frozen=True)
class KnowledgeMap:
    """Directed graph over variables; missing arcs assert independence.

    ``variables`` order is canonical: it fixes joint-state indexing and
    the parent order expected of conditional tables. ``distinguished``
    optionally names the hypothesis node h, which must have no
    predecessors.
    """

    variables: tuple[Variable, ...]
    arcs: frozenset[tuple[str, str]]
    distinguished: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "arcs", frozenset(tuple(a) for a in self.arcs))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable names")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def variable(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise ValueError(f"unknown variable {name!r}")

    def has_variable(self, name: str) -> bool:
        return any(v.name == name for v in self.variables)

    def parents_of(self, name: str) -> tuple[str, ...]:
        """Parents in variable declaration order (canonical table order)."""
        return tuple(v.name for v in self.variables if (v.name, name) in self.arcs)

    def children_of(self, name: str) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables if (name, v.name) in self.arcs)

    def find_cycle(self) -> Optional[list[str]]:
        """Return one directed cycle as a node list, or None."""
        color = {n: 0 for n in self.names}
        stack: list[str] = []

        def visit(n: str) -> Optional[list[str]]:
            color[n] = 1
            stack.append(n)
            for c in self.children_of(n):
                if color.get(c, 2) == 1:
                    return stack[stack.index(c):] + [c]
                if color.get(c, 2) == 0:
                    found = visit(c)
                    if found:
                        return found
            color[n] = 2
            stack.pop()
            return None

        for n in self.names:
            if color[n] == 0:
                found = visit(n)
                if found:
                    return found
        return None

    def is_acyclic(self) -> bool:
        return self.find_cycle() is None

    def topological_order(self) -> tuple[str, ...]:
        """Kahn's algorithm; ties broken by declaration order."""
        indeg = {n: len(self.parents_of(n)) for n in self.names}
        order: list[str] = []
        ready = [n for n in self.names if indeg[n] == 0]
        while ready:
            n = ready.pop(0)
            order.append(n)
            for c in self.children_of(n):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
            ready.sort(key=self.names.index)
        if len(order) != len(self.names):
            raise ValueError("graph has a directed cycle")
        return tuple(order)

    def connected_to(self, name: str) -> frozenset[str]:
        """Nodes with an undirected path to ``name`` (including itself)."""
        neighbours: dict[str, set[str]] = {n: set() for n in self.names}
        for a, b in self.arcs:
            neighbours[a].add(b)
            neighbours[b].add(a)
        seen = {name}
        queue = deque([name])
        while queue:
            n = queue.popleft()
            for m in sorted(neighbours[n]):
                if m not in seen:
                    seen.add(m)
                    queue.append(m)
        return frozenset(seen)


@dataclass(frozen=True)
class ConditionalTable:
    """p(child | parents) with rows indexed row-major over the parents.

    Row k corresponds to the parent assignment obtained by unraveling k
    over the parent cardinalities in declared parent order (last parent
    varies fastest). Each row is a distribution over the child's
    instances in their declared order.
    """

    child: str
    parents: tuple[str, ...]
    rows: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2:
            raise ValueError(f"table for {self.child!r} must be 2-dimensional")
        rows = rows.copy()
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def child_card(self) -> int:
        return self.rows.shape[1]

    def row_index(self, parent_indices: Sequence[int], parent_cards: Sequence[int]) -> int:
        if not self.parents:
            return 0
        return int(np.ravel_multi_index(tuple(parent_indices), tuple(parent_cards)))

    def is_deterministic(self, atol: float = 0.0) -> bool:
        near01 = np.minimum(np.abs(self.rows), np.abs(self.rows - 1.0))
        return bool((near01 <= atol).all())


@dataclass(frozen=True)
class AssessedKnowledgeMap:
    """A knowledge map together with one conditional table per variable."""

    map: KnowledgeMap
    tables: Mapping[str, ConditionalTable]

    def __post_init__(self):
        object.__setattr__(self, "tables", dict(self.tables))

    def table(self, name: str) -> ConditionalTable:
        return self.tables[name]


@dataclass(frozen=True)
class JointDistribution:
    """Flat probability vector over all instance combinations.

    Index order is row-major over ``variables`` (last variable varies
    fastest).
    """

    variables: tuple[Variable, ...]
    probabilities: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=float).reshape(-1).copy()
        probs.flags.writeable = False
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "variables", tuple(self.variables))

    @property
    def strictly_positive(self) -> bool:
        return bool((self.probabilities > 0).all())

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(v.card for v in self.variables)

    def as_array(self) -> np.ndarray:
        return self.probabilities.reshape(self.shape)

    def probability(self, assignment: Mapping[str, str]) -> float:
        idx = []
        for v in self.variables:
            if v.name not in assignment:
                raise ValueError(f"assignment is missing variable {v.name!r}")
            idx.append(v.index(assignment[v.name]))
        return float(self.as_array()[tuple(idx)])


@dataclass(frozen=True)
class ExpansionOrder:
    """A permutation of variable names used to expand the joint."""

    order: tuple[str, ...]

    def consistent_with(self, km: KnowledgeMap) -> bool:
        pos = {n: i for i, n in enumerate(self.order)}
        if set(pos) != set(km.names):
            return False
        return all(pos[a] < pos[b] for a, b in km.arcs)


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self) -> bool:
        return self.ok


def validate_map(akm: AssessedKnowledgeMap, tol: Optional[float] = None) -> ValidationReport:
    """Report every structural and numeric defect of an assessed map.

    Nothing is raised: problems are collected so a caller can show them
    all at once. Zero table entries are legal but produce a warning,
    since downstream independence tests assume strict positivity.
    """
    tol = tolerance() if tol is None else tol
    km = akm.map
    errors: list[str] = []
    warnings: list[str] = []

    known = set(km.names)
    for a, b in sorted(km.arcs):
        if a not in known or b not in known:
            errors.append(f"arc ({a}, {b}) references an undeclared variable")
    cycle = km.find_cycle() if not errors else None
    if cycle:
        errors.append("directed cycle: " + " -> ".join(cycle))
    if km.distinguished is not None:
        if km.distinguished not in known:
            errors.append(f"distinguished variable {km.distinguished!r} is undeclared")
        elif km.parents_of(km.distinguished):
            errors.append(
                f"distinguished variable {km.distinguished!r} has predecessors"
            )

    zero_seen = False
    for v in km.variables:
        t = akm.tables.get(v.name)
        if t is None:
            errors.append(f"variable {v.name!r} has no conditional table")
            continue
        expected_parents = km.parents_of(v.name)
        if tuple(t.parents) != expected_parents:
            errors.append(
                f"table for {v.name!r} declares parents {tuple(t.parents)}, "
                f"graph has {expected_parents}"
            )
            continue
        cards = [km.variable(p).card for p in t.parents]
        expected_rows = int(np.prod(cards)) if cards else 1
        if t.n_rows != expected_rows or t.child_card != v.card:
            errors.append(
                f"table for {v.name!r} has shape {t.rows.shape}, "
                f"expected ({expected_rows}, {v.card})"
            )
            continue
        if (t.rows < -tol).any() or (t.rows > 1 + tol).any():
            errors.append(f"table for {v.name!r} has entries outside [0, 1]")
        sums = t.rows.sum(axis=1)
        bad = np.where(np.abs(sums - 1.0) > tol)[0]
        for k in bad:
            errors.append(
                f"table for {v.name!r}, row {int(k)}: entries sum to {sums[k]:.12g}"
            )
        if (t.rows <= 0).any():
            zero_seen = True
    extra = sorted(set(akm.tables) - known)
    for name in extra:
        errors.append(f"table for undeclared variable {name!r}")
    if zero_seen and not errors:
        warnings.append(
            "model contains zero probabilities; it is not strictly positive"
        )
    return ValidationReport(tuple(errors), tuple(warnings))


def joint_from_map(akm: AssessedKnowledgeMap, cap: int = JOINT_STATE_CAP) -> JointDistribution:
    """Enumerate the full joint as the product of the table factors."""
    km = akm.map
    cards = [v.card for v in km.variables]
    n_states = math.prod(cards)
    if n_states > cap:
        raise ValueError(
            f"joint has {n_states} states, above the enumeration cap of {cap}"
        )
    pos = {v.name: i for i, v in enumerate(km.variables)}
    joint = np.ones(cards)
    for v in km.variables:
        t = akm.table(v.name)
        axes = [pos[p] for p in t.parents] + [pos[v.name]]
        arr = t.rows.reshape([cards[i] for i in axes])
        arr = arr.transpose(np.argsort(axes))
        member = set(axes)
        shape = [cards[i] if i in member else 1 for i in range(len(cards))]
        joint = joint * arr.reshape(shape)
    return JointDistribution(km.variables, joint.reshape(-1))


def d_separated(
    km: KnowledgeMap,
    x: Iterable[str],
    y: Iterable[str],
    z: Iterable[str],
) -> bool:
    """Graphical independence test.

    True iff no active undirected path connects ``x`` and ``y`` given
    ``z``: a node with converging arcs blocks unless it or a successor
    is in ``z``; any other node blocks exactly when it is in ``z``.
    The criterion assumes the map has no deterministic nodes; callers
    that mix in 0/1 tables get a necessary but not sufficient test.
    """
    xs, ys, zs = set(x), set(y), set(z)
    known = set(km.names)
    for n in xs | ys | zs:
        if n not in known:
            raise ValueError(f"unknown variable {n!r}")
    if (xs & ys) or (xs & zs) or (ys & zs):
        raise ValueError("query sets must be pairwise disjoint")

    parents = {n: set(km.parents_of(n)) for n in km.names}
    children = {n: set(km.children_of(n)) for n in km.names}

    # ancestors of z, including z itself
    anc = set(zs)
    queue = deque(zs)
    while queue:
        n = queue.popleft()
        for p in parents[n]:
            if p not in anc:
                anc.add(p)
                queue.append(p)

    # breadth-first walk over (node, arrival direction)
    UP, DOWN = 0, 1
    visited: set[tuple[str, int]] = set()
    queue2 = deque((n, UP) for n in xs)
    while queue2:
        n, direction = queue2.popleft()
        if (n, direction) in visited:
            continue
        visited.add((n, direction))
        if n in ys and n not in zs:
            return False
        if direction == UP and n not in zs:
            for p in parents[n]:
                queue2.append((p, UP))
            for c in children[n]:
                queue2.append((c, DOWN))
        elif direction == DOWN:
            if n not in zs:
                for c in children[n]:
                    queue2.append((c, DOWN))
            if n in anc:
                for p in parents[n]:
                    queue2.append((p, UP))
    return True


def query_conditional(
    akm: AssessedKnowledgeMap,
    target: str,
    evidence: Mapping[str, str],
    cap: int = JOINT_STATE_CAP,
) -> np.ndarray:
    """Brute-force p(target | evidence) from the enumerated joint."""
    km = akm.map
    if target in evidence:
        raise ValueError("target variable cannot also be evidence")
    joint = joint_from_map(akm, cap=cap).as_array()
    pos = {v.name: i for i, v in enumerate(km.variables)}
    index: list = [slice(None)] * len(km.variables)
    for name, label in evidence.items():
        index[pos[name]] = km.variable(name).index(label)
    sub = joint[tuple(index)]
    remaining = [n for n in km.names if n not in evidence]
    target_axis = remaining.index(target)
    other_axes = tuple(i for i in range(sub.ndim) if i != target_axis)
    vec = sub.sum(axis=other_axes) if other_axes else sub
    total = float(vec.sum())
    if total <= 0.0:
        raise ImpossibleEvidenceError(
            f"evidence {dict(evidence)!r} has probability zero"
        )
    return vec / total


def is_superfluous_arc(
    akm: AssessedKnowledgeMap,
    arc: tuple[str, str],
    tol: Optional[float] = None,
) -> bool:
    """True iff dropping the arc changes no conditional assertion.

    Compares the assessed rows p(y|C(y)) against p(y|C(y) minus x)
    computed from the enumerated joint, for every parent instance whose
    reduced conditioning event has positive probability.
    """
    tol = tolerance() if tol is None else tol
    x, y = arc
    km = akm.map
    if arc not in km.arcs:
        raise ValueError(f"arc ({x}, {y}) is not in the map")
    parents = km.parents_of(y)
    others = tuple(p for p in parents if p != x)
    table = akm.table(y)
    parent_cards = [km.variable(p).card for p in parents]

    # p(y | parents minus x) under every instance of the reduced set
    reduced: dict[tuple[str, ...], np.ndarray] = {}
    for assignment in _instances(km, others):
        try:
            reduced[assignment] = query_conditional(
                akm, y, dict(zip(others, assignment))
            )
        except ImpossibleEvidenceError:
            continue

    for assignment in _instances(km, parents):
        key = tuple(lbl for p, lbl in zip(parents, assignment) if p != x)
        if key not in reduced:
            continue
        idx = table.row_index(
            [km.variable(p).index(lbl) for p, lbl in zip(parents, assignment)],
            parent_cards,
        )
        if not np.allclose(table.rows[idx], reduced[key], atol=tol):
            return False
    return True


def _instances(km: KnowledgeMap, names: Sequence[str]):
    import itertools

    return itertools.product(*[km.variable(n).instances for n in names])


def reverse_arc(akm: AssessedKnowledgeMap, arc: tuple[str, str]) -> AssessedKnowledgeMap:
    """Flip x -> y, giving each endpoint the union of the old parents.

    The returned map encodes the same joint distribution. Reversal is
    refused when another directed path from x to y exists, since the
    flipped arc would then close a cycle.
    """
    x, y = arc
    km = akm.map
    if arc not in km.arcs:
        raise ValueError(f"arc ({x}, {y}) is not in the map")
    remaining = km.arcs - {arc}
    if _directed_reachable(km, remaining, x, y):
        raise ValueError(f"reversing ({x}, {y}) would create a directed cycle")

    a_set = set(km.parents_of(x))
    b_set = set(km.parents_of(y)) - {x}
    union = [n for n in km.names if n in (a_set | b_set)]
    new_y_parents = tuple(union)
    new_x_parents = tuple(n for n in km.names if n in (a_set | b_set | {y}))

    x_var, y_var = km.variable(x), km.variable(y)
    x_table, y_table = akm.table(x), akm.table(y)
    x_parents, y_parents = km.parents_of(x), km.parents_of(y)
    x_cards = [km.variable(p).card for p in x_parents]
    y_cards = [km.variable(p).card for p in y_parents]
    union_cards = [km.variable(n).card for n in union]

    n_union = int(np.prod(union_cards)) if union else 1
    py = np.zeros((n_union, y_var.card))
    px_given_y = np.zeros((n_union, y_var.card, x_var.card))
    for u_idx, u in enumerate(_index_product(union_cards)):
        u_map = dict(zip(union, u))
        x_row = x_table.rows[
            x_table.row_index([u_map[p] for p in x_parents], x_cards)
        ]
        mix = np.zeros((x_var.card, y_var.card))
        for k in range(x_var.card):
            vals = {**u_map, x: k}
            y_row = y_table.rows[
                y_table.row_index([vals[p] for p in y_parents], y_cards)
            ]
            mix[k] = x_row[k] * y_row
        py[u_idx] = mix.sum(axis=0)
        for j in range(y_var.card):
            if py[u_idx, j] > 0:
                px_given_y[u_idx, j] = mix[:, j] / py[u_idx, j]
            else:
                px_given_y[u_idx, j] = 1.0 / x_var.card

    new_x_rows = np.zeros(
        (int(np.prod([km.variable(p).card for p in new_x_parents])) if new_x_parents else 1,
         x_var.card)
    )
    for r_idx, assignment in enumerate(
        _index_product([km.variable(p).card for p in new_x_parents])
    ):
        vals = dict(zip(new_x_parents, assignment))
        u_idx = (
            int(np.ravel_multi_index([vals[n] for n in union], union_cards))
            if union
            else 0
        )
        new_x_rows[r_idx] = px_given_y[u_idx, vals[y]]

    new_arcs = set(remaining)
    new_arcs.add((y, x))
    for p in new_y_parents:
        new_arcs.add((p, y))
    for p in new_x_parents:
        new_arcs.add((p, x))
    new_km = KnowledgeMap(km.variables, frozenset(new_arcs), km.distinguished)

    tables = dict(akm.tables)
    tables[y] = ConditionalTable(y, new_y_parents, py)
    tables[x] = ConditionalTable(x, new_x_parents, new_x_rows)
    return AssessedKnowledgeMap(new_km, tables)


def _directed_reachable(
    km: KnowledgeMap, arcs: frozenset[tuple[str, str]], src: str, dst: str
) -> bool:
    queue = deque([src])
    seen = {src}
    while queue:
        n = queue.popleft()
        for a, b in arcs:
            if a == n and b not in seen:
                if b == dst:
                    return True
                seen.add(b)
                queue.append(b)
    return False


def _index_product(cards: Sequence[int]):
    if not cards:
        yield ()
        return
    yield from np.ndindex(*cards)
