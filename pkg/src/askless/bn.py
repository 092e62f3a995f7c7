"""Core graphical-model types: DAGs, conditional probability tables, networks.

Conventions fixed here and relied on everywhere else:

* CPT rows are indexed by a mixed-radix code over the parent levels, in the
  stored parent order, with the **last parent varying fastest**. Reshaping a
  table to ``(*parent_cardinalities, n_levels)`` in C order is therefore the
  same layout.
* Parent lists are stored in schema (declaration) order.
* All types are immutable after construction and safe to share across
  threads.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    CycleDetected,
    DuplicateEdge,
    IncompleteAssignment,
    InvalidLevel,
    MalformedDocument,
    MissingParentValue,
    SelfLoop,
    UnknownNode,
)
from .schema import SurveySchema

Evidence = Mapping[str, str]

ROW_SUM_TOL = 1e-9
# looser bound applied when reading tables back from text
ROW_SUM_LOAD_TOL = 1e-6


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph over named nodes.

    Construct through :func:`validate_dag`, which enforces all invariants.
    """

    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]
    _parents: Mapping[str, tuple[str, ...]] = field(init=False, repr=False, compare=False)
    _order: tuple[str, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {n: i for i, n in enumerate(self.nodes)}
        parents: dict[str, list[str]] = {n: [] for n in self.nodes}
        for parent, child in self.edges:
            parents[child].append(parent)
        for child in parents:
            parents[child].sort(key=index.__getitem__)
        object.__setattr__(
            self, "_parents", {n: tuple(ps) for n, ps in parents.items()}
        )
        object.__setattr__(self, "_order", _toposort(self.nodes, self._parents))

    def parents(self, node: str) -> tuple[str, ...]:
        try:
            return self._parents[node]
        except KeyError:
            raise UnknownNode(f"no node {node!r} in graph") from None

    def children(self, node: str) -> tuple[str, ...]:
        index = {n: i for i, n in enumerate(self.nodes)}
        kids = sorted((c for p, c in self.edges if p == node), key=index.__getitem__)
        return tuple(kids)

    def has_edge(self, parent: str, child: str) -> bool:
        return (parent, child) in self.edges


def validate_dag(nodes: Sequence[str], edges: Iterable[tuple[str, str]]) -> Dag:
    """Check node/edge consistency and acyclicity, returning the graph.

    Raises UnknownNode, SelfLoop, DuplicateEdge, or CycleDetected (naming
    one offending cycle).
    """
    nodes = tuple(nodes)
    if not nodes:
        raise UnknownNode("a graph needs at least one node")
    if len(set(nodes)) != len(nodes):
        raise DuplicateEdge("duplicate node names")
    node_set = set(nodes)
    seen: set[tuple[str, str]] = set()
    for edge in edges:
        parent, child = edge
        if parent not in node_set:
            raise UnknownNode(f"edge endpoint {parent!r} is not a declared node")
        if child not in node_set:
            raise UnknownNode(f"edge endpoint {child!r} is not a declared node")
        if parent == child:
            raise SelfLoop(f"self-loop on {parent!r}")
        if edge in seen:
            raise DuplicateEdge(f"edge {parent!r} -> {child!r} given twice")
        seen.add(edge)
    _find_cycle(nodes, seen)  # raises CycleDetected
    return Dag(nodes=nodes, edges=frozenset(seen))


def _find_cycle(nodes: Sequence[str], edges: set[tuple[str, str]]) -> None:
    children: dict[str, list[str]] = {n: [] for n in nodes}
    for p, c in edges:
        children[p].append(c)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in nodes}
    stack_path: list[str] = []

    def visit(start: str) -> None:
        stack = [(start, iter(children[start]))]
        color[start] = GREY
        stack_path.append(start)
        while stack:
            node, it = stack[-1]
            for child in it:
                if color[child] == GREY:
                    i = stack_path.index(child)
                    raise CycleDetected(stack_path[i:] + [child])
                if color[child] == WHITE:
                    color[child] = GREY
                    stack_path.append(child)
                    stack.append((child, iter(children[child])))
                    break
            else:
                color[node] = BLACK
                stack_path.pop()
                stack.pop()

    for n in nodes:
        if color[n] == WHITE:
            visit(n)


def _toposort(nodes: Sequence[str], parents: Mapping[str, Sequence[str]]) -> tuple[str, ...]:
    index = {n: i for i, n in enumerate(nodes)}
    remaining = {n: set(parents[n]) for n in nodes}
    order: list[str] = []
    ready = [n for n, ps in remaining.items() if not ps]
    children: dict[str, list[str]] = {n: [] for n in nodes}
    for n, ps in parents.items():
        for p in ps:
            children[p].append(n)
    heap = [index[n] for n in ready]
    heapq.heapify(heap)
    by_index = list(nodes)
    while heap:
        n = by_index[heapq.heappop(heap)]
        order.append(n)
        for c in children[n]:
            remaining[c].discard(n)
            if not remaining[c]:
                heapq.heappush(heap, index[c])
    if len(order) != len(nodes):
        raise CycleDetected([n for n in nodes if remaining[n]])
    return tuple(order)


def topological_order(dag: Dag) -> tuple[str, ...]:
    """Parents before children; ties broken by node declaration order."""
    return dag._order


@dataclass(frozen=True)
class Cpt:
    """Conditional probability table of one variable given its parents.

    ``table`` has one row per parent configuration (see
    :func:`parent_config_index`) and one column per level of the variable.
    ``parent_levels`` carries the level labels of each parent so the table
    is self-describing.
    """

    variable: str
    levels: tuple[str, ...]
    parents: tuple[str, ...]
    parent_levels: tuple[tuple[str, ...], ...]
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(
            self, "parent_levels", tuple(tuple(ls) for ls in self.parent_levels)
        )
        table = np.asarray(self.table, dtype=float)
        table.setflags(write=False)
        object.__setattr__(self, "table", table)
        if len(self.parents) != len(self.parent_levels):
            raise MalformedDocument(f"{self.variable}: parents/parent_levels mismatch")
        rows = 1
        for ls in self.parent_levels:
            rows *= len(ls)
        if table.shape != (rows, len(self.levels)):
            raise MalformedDocument(
                f"{self.variable}: table shape {table.shape} != ({rows}, {len(self.levels)})"
            )
        if np.any(table < 0) or np.any(table > 1):
            raise MalformedDocument(f"{self.variable}: probabilities outside [0, 1]")
        if np.any(np.abs(table.sum(axis=1) - 1.0) > ROW_SUM_TOL):
            raise MalformedDocument(f"{self.variable}: CPT rows must sum to 1")

    @property
    def n_rows(self) -> int:
        return self.table.shape[0]

    def level_index(self, level: str) -> int:
        try:
            return self.levels.index(level)
        except ValueError:
            raise InvalidLevel(
                f"{level!r} is not a level of {self.variable}"
            ) from None


def parent_config_index(cpt: Cpt, assignment: Mapping[str, str]) -> int:
    """Row index for a full parent assignment (last parent varies fastest)."""
    idx = 0
    for parent, levels in zip(cpt.parents, cpt.parent_levels):
        if parent not in assignment:
            raise MissingParentValue(
                f"{cpt.variable}: no value for parent {parent!r}"
            )
        value = assignment[parent]
        try:
            li = levels.index(value)
        except ValueError:
            raise InvalidLevel(f"{value!r} is not a level of {parent}") from None
        idx = idx * len(levels) + li
    return idx


@dataclass(frozen=True)
class BayesianNetwork:
    """A schema, a DAG over its variables, and one CPT per node."""

    schema: SurveySchema
    dag: Dag
    cpts: Mapping[str, Cpt]

    def __post_init__(self):
        object.__setattr__(self, "cpts", dict(self.cpts))
        if set(self.dag.nodes) != set(self.cpts):
            raise MalformedDocument("cpts must cover exactly the DAG nodes")
        for name in self.dag.nodes:
            if name not in self.schema:
                raise UnknownNode(f"DAG node {name!r} not in schema")
            cpt = self.cpts[name]
            if cpt.variable != name:
                raise MalformedDocument(f"cpt for {name!r} names {cpt.variable!r}")
            if cpt.parents != self.dag.parents(name):
                raise MalformedDocument(
                    f"{name}: cpt parents {cpt.parents} != dag parents "
                    f"{self.dag.parents(name)}"
                )
            if cpt.levels != self.schema.levels(name):
                raise MalformedDocument(f"{name}: cpt levels disagree with schema")

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.dag.nodes


def joint_probability(bn: BayesianNetwork, assignment: Mapping[str, str]) -> float:
    """Probability of one full assignment under the network factorization."""
    missing = [n for n in bn.nodes if n not in assignment]
    if missing:
        raise IncompleteAssignment(f"no value for {', '.join(missing)}")
    prob = 1.0
    for node in bn.nodes:
        cpt = bn.cpts[node]
        row = parent_config_index(cpt, assignment)
        prob *= cpt.table[row, cpt.level_index(assignment[node])]
        if prob == 0.0:
            return 0.0
    return prob


def check_evidence(bn: BayesianNetwork, evidence: Evidence) -> None:
    for var, value in evidence.items():
        if var not in bn.cpts:
            raise UnknownNode(f"evidence variable {var!r} is not in the network")
        bn.cpts[var].level_index(value)  # raises InvalidLevel


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def network_to_doc(bn: BayesianNetwork) -> dict:
    """JSON-ready document; probabilities keep full repr precision."""
    return {
        "schema": bn.schema.to_doc(),
        "nodes": [
            {
                "name": name,
                "levels": list(bn.cpts[name].levels),
                "parents": list(bn.cpts[name].parents),
                "cptRows": [list(row) for row in bn.cpts[name].table],
            }
            for name in bn.nodes
        ],
    }


def network_from_doc(doc: Mapping) -> BayesianNetwork:
    from .schema import parse_schema

    try:
        schema = parse_schema(doc["schema"])
        entries = list(doc["nodes"])
    except (KeyError, TypeError) as exc:
        raise MalformedDocument(f"network document missing field: {exc}") from exc
    names = [e["name"] for e in entries]
    edges = [(p, e["name"]) for e in entries for p in e.get("parents", ())]
    dag = validate_dag(names, edges)
    levels_of = {e["name"]: tuple(e["levels"]) for e in entries}
    cpts = {}
    for e in entries:
        name = e["name"]
        parents = tuple(e.get("parents", ()))
        table = np.asarray(e["cptRows"], dtype=float)
        if table.ndim != 2:
            raise MalformedDocument(f"{name}: cptRows must be a row-major matrix")
        sums = table.sum(axis=1)
        off = np.abs(sums - 1.0)
        if np.any(off > ROW_SUM_LOAD_TOL):
            raise MalformedDocument(f"{name}: CPT row sums off by more than {ROW_SUM_LOAD_TOL}")
        # renormalize only rows that would fail construction, so a legal
        # saved table reloads bit-exactly
        fix = off > ROW_SUM_TOL
        if np.any(fix):
            table = table.copy()
            table[fix] = table[fix] / sums[fix, None]
        cpts[name] = Cpt(
            variable=name,
            levels=levels_of[name],
            parents=parents,
            parent_levels=tuple(levels_of[p] for p in parents),
            table=table,
        )
    return BayesianNetwork(schema=schema, dag=dag, cpts=cpts)


def save_network(bn: BayesianNetwork, path: str | Path) -> None:
    Path(path).write_text(json.dumps(network_to_doc(bn), indent=1) + "\n")


def load_network(path: str | Path) -> BayesianNetwork:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"{path}: not valid JSON ({exc})") from exc
    return network_from_doc(doc)


# ---------------------------------------------------------------------------
# structure comparison helpers
# ---------------------------------------------------------------------------

def skeleton(dag: Dag) -> frozenset[frozenset[str]]:
    """Undirected edge set."""
    return frozenset(frozenset(e) for e in dag.edges)


def v_structures(dag: Dag) -> frozenset[tuple[str, str, str]]:
    """Colliders a -> c <- b with a, b non-adjacent, as (a, b, c), a < b."""
    skel = skeleton(dag)
    out = set()
    for c in dag.nodes:
        ps = dag.parents(c)
        for i, a in enumerate(ps):
            for b in ps[i + 1:]:
                if frozenset((a, b)) not in skel:
                    out.add((min(a, b), max(a, b), c))
    return frozenset(out)


def markov_equivalent(d1: Dag, d2: Dag) -> bool:
    """Same skeleton and same v-structures."""
    return skeleton(d1) == skeleton(d2) and v_structures(d1) == v_structures(d2)
