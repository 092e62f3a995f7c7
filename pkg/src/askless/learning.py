"""Score-based structure learning and maximum-likelihood parameter fitting.

Hill climbing searches the space of DAGs by greedily applying the single
best edge addition, deletion, or reversal until no legal move improves the
decomposable AIC/BIC score. Scores are "larger is better":

    AIC = LL - p        BIC = LL - (ln N / 2) * p

with p the total number of free CPT parameters. Per-family scores are
cached by (node, parent set), so a move's delta only recomputes the
families it touches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .bn import BayesianNetwork, Cpt, Dag, validate_dag
from .data import Dataset
from .errors import EmptyDataset, InconsistentConstraints, UnknownNode
from .schema import SurveySchema

AIC = "aic"
BIC = "bic"

# a move must beat the incumbent score by this much to be accepted
IMPROVEMENT_EPS = 1e-9
# deltas within this relative band count as ties, which go to the move
# enumerated first (float summation order must not pick winners)
TIE_REL_EPS = 1e-9


@dataclass(frozen=True)
class HillClimbConfig:
    criterion: str = AIC
    max_parents: int = 4
    max_iterations: int = 500
    restarts: int = 0
    seed: int = 0
    forbidden_edges: frozenset[tuple[str, str]] = frozenset()
    required_edges: frozenset[tuple[str, str]] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "forbidden_edges", frozenset(self.forbidden_edges))
        object.__setattr__(self, "required_edges", frozenset(self.required_edges))
        if self.criterion not in (AIC, BIC):
            raise ValueError(f"criterion must be {AIC!r} or {BIC!r}")
        if self.max_parents < 1:
            raise ValueError("max_parents must be >= 1")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")


class _Encoded:
    """Dataset recoded as level indices for fast family counting."""

    def __init__(self, dataset: Dataset, variables: Sequence[str]):
        if len(dataset) == 0:
            raise EmptyDataset("learning needs at least one row")
        self.variables = tuple(variables)
        self.index = {v: i for i, v in enumerate(self.variables)}
        self.cards = []
        cols = []
        for v in self.variables:
            levels = dataset.schema.levels(v)
            lookup = {lv: i for i, lv in enumerate(levels)}
            try:
                column = dataset.column(v)
            except Exception:
                raise UnknownNode(f"dataset has no column for node {v!r}") from None
            cols.append(np.fromiter((lookup[x] for x in column), dtype=np.int64,
                                    count=len(dataset)))
            self.cards.append(len(levels))
        self.codes = np.stack(cols, axis=1)
        self.n = len(dataset)

    def family_counts(self, var: str, parents: Sequence[str]) -> np.ndarray:
        """Count matrix with one row per parent configuration (last parent
        fastest) and one column per level of ``var``."""
        vi = self.index[var]
        card = self.cards[vi]
        code = np.zeros(self.n, dtype=np.int64)
        rows = 1
        for p in parents:
            pi = self.index[p]
            code = code * self.cards[pi] + self.codes[:, pi]
            rows *= self.cards[pi]
        code = code * card + self.codes[:, vi]
        counts = np.bincount(code, minlength=rows * card)
        return counts.reshape(rows, card)


def _family_ll(counts: np.ndarray) -> float:
    """Maximized log-likelihood contribution of one family."""
    row_totals = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.log(counts / row_totals)
    mask = counts > 0
    return float((counts[mask] * logs[mask]).sum())


def _n_params(card: int, parent_cards: Iterable[int]) -> int:
    p = card - 1
    for c in parent_cards:
        p *= c
    return p


class _Scorer:
    """Per-family decomposable score with a (node, parent-set) cache."""

    def __init__(self, encoded: _Encoded, criterion: str):
        self.enc = encoded
        if criterion == AIC:
            self.penalty_unit = 1.0
        elif criterion == BIC:
            self.penalty_unit = math.log(encoded.n) / 2.0
        else:
            raise ValueError(f"unknown criterion {criterion!r}")
        self._cache: dict[tuple[str, tuple[str, ...]], float] = {}

    def family(self, var: str, parents: Sequence[str]) -> float:
        key = (var, tuple(sorted(parents)))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        counts = self.enc.family_counts(var, parents)
        p = _n_params(self.enc.cards[self.enc.index[var]],
                      (self.enc.cards[self.enc.index[q]] for q in parents))
        value = _family_ll(counts) - self.penalty_unit * p
        self._cache[key] = value
        return value

    def total(self, parents_of: Mapping[str, Sequence[str]]) -> float:
        return sum(self.family(v, parents_of[v]) for v in self.enc.variables)


def log_likelihood(dag: Dag, dataset: Dataset) -> float:
    """Log-likelihood of the data under MLE-fitted CPTs for this structure."""
    enc = _Encoded(dataset, dag.nodes)
    return sum(_family_ll(enc.family_counts(v, dag.parents(v))) for v in dag.nodes)


def score(dag: Dag, dataset: Dataset, criterion: str) -> float:
    """Penalized network score (larger is better)."""
    enc = _Encoded(dataset, dag.nodes)
    scorer = _Scorer(enc, criterion)
    return scorer.total({v: dag.parents(v) for v in dag.nodes})


def fit_mle(dag: Dag, dataset: Dataset, smoothing: float = 0.0) -> BayesianNetwork:
    """Frequency-ratio CPTs with optional additive smoothing.

    With smoothing 0, a parent configuration that never occurs gets a
    uniform row so downstream queries stay well-defined.
    """
    if smoothing < 0:
        raise ValueError("smoothing must be >= 0")
    enc = _Encoded(dataset, dag.nodes)
    schema = dataset.schema
    cpts = {}
    for v in dag.nodes:
        parents = dag.parents(v)
        counts = enc.family_counts(v, parents).astype(float)
        card = counts.shape[1]
        totals = counts.sum(axis=1, keepdims=True)
        table = np.empty_like(counts)
        denom = totals + smoothing * card
        seen = denom[:, 0] > 0
        table[seen] = (counts[seen] + smoothing) / denom[seen]
        table[~seen] = 1.0 / card
        cpts[v] = Cpt(
            variable=v,
            levels=schema.levels(v),
            parents=parents,
            parent_levels=tuple(schema.levels(p) for p in parents),
            table=table,
        )
    return BayesianNetwork(schema=schema, dag=dag, cpts=cpts)


# ---------------------------------------------------------------------------
# hill climbing
# ---------------------------------------------------------------------------

class _Graph:
    """Mutable adjacency used during the search."""

    def __init__(self, nodes: Sequence[str], edges: Iterable[tuple[str, str]] = ()):
        self.nodes = tuple(nodes)
        self.parents: dict[str, list[str]] = {n: [] for n in nodes}
        self.children: dict[str, set[str]] = {n: set() for n in nodes}
        self._pos = {n: i for i, n in enumerate(nodes)}
        for a, b in edges:
            self.add(a, b)

    def add(self, a: str, b: str) -> None:
        self.parents[b].append(a)
        self.parents[b].sort(key=self._pos.__getitem__)
        self.children[a].add(b)

    def remove(self, a: str, b: str) -> None:
        self.parents[b].remove(a)
        self.children[a].discard(b)

    def has_edge(self, a: str, b: str) -> bool:
        return b in self.children[a]

    def has_path(self, a: str, b: str) -> bool:
        """Directed path a ~> b (including a == b)."""
        if a == b:
            return True
        stack = [a]
        seen = {a}
        while stack:
            for c in self.children[stack.pop()]:
                if c == b:
                    return True
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return False

    def edge_list(self) -> list[tuple[str, str]]:
        return [(p, c) for c in self.nodes for p in self.parents[c]]

    def to_dag(self) -> Dag:
        return validate_dag(self.nodes, self.edge_list())


_ADD, _DELETE, _REVERSE = "add", "delete", "reverse"


def _legal_moves(g: _Graph, config: HillClimbConfig):
    """Yield (kind, a, b) in the fixed tie-break order: all additions, then
    deletions, then reversals, node pairs in schema order."""
    pairs = [(a, b) for a in g.nodes for b in g.nodes if a != b]
    for a, b in pairs:
        if (
            not g.has_edge(a, b)
            and (a, b) not in config.forbidden_edges
            and len(g.parents[b]) < config.max_parents
            and not g.has_path(b, a)
        ):
            yield (_ADD, a, b)
    for a, b in pairs:
        if g.has_edge(a, b) and (a, b) not in config.required_edges:
            yield (_DELETE, a, b)
    for a, b in pairs:
        if (
            g.has_edge(a, b)
            and (a, b) not in config.required_edges
            and (b, a) not in config.forbidden_edges
            and len(g.parents[a]) < config.max_parents
        ):
            g.remove(a, b)
            acyclic = not g.has_path(a, b)
            g.add(a, b)
            if acyclic:
                yield (_REVERSE, a, b)


def _move_delta(g: _Graph, scorer: _Scorer, kind: str, a: str, b: str) -> float:
    pos = g._pos
    if kind == _ADD:
        new_b = sorted(g.parents[b] + [a], key=pos.__getitem__)
        return scorer.family(b, new_b) - scorer.family(b, g.parents[b])
    if kind == _DELETE:
        new_b = [p for p in g.parents[b] if p != a]
        return scorer.family(b, new_b) - scorer.family(b, g.parents[b])
    # reverse: b loses a, a gains b
    new_b = [p for p in g.parents[b] if p != a]
    new_a = sorted(g.parents[a] + [b], key=pos.__getitem__)
    return (
        scorer.family(b, new_b)
        - scorer.family(b, g.parents[b])
        + scorer.family(a, new_a)
        - scorer.family(a, g.parents[a])
    )


def _apply(g: _Graph, kind: str, a: str, b: str) -> None:
    if kind == _ADD:
        g.add(a, b)
    elif kind == _DELETE:
        g.remove(a, b)
    else:
        g.remove(a, b)
        g.add(b, a)


@dataclass
class ClimbResult:
    dag: Dag
    score: float
    trace: list[float] = field(default_factory=list)


def _climb(g: _Graph, scorer: _Scorer, config: HillClimbConfig) -> ClimbResult:
    current = scorer.total(g.parents)
    trace = [current]
    for _ in range(config.max_iterations):
        best_delta = 0.0
        best_move = None
        for kind, a, b in _legal_moves(g, config):
            delta = _move_delta(g, scorer, kind, a, b)
            if best_move is None:
                if delta > IMPROVEMENT_EPS:
                    best_delta, best_move = delta, (kind, a, b)
            elif delta > best_delta + TIE_REL_EPS * max(1.0, abs(best_delta)):
                best_delta, best_move = delta, (kind, a, b)
        if best_move is None:
            break
        _apply(g, *best_move)
        current += best_delta
        trace.append(current)
    return ClimbResult(dag=g.to_dag(), score=current, trace=trace)


def _perturb(g: _Graph, config: HillClimbConfig, rng: np.random.Generator) -> None:
    """Random edge flips used between restarts."""
    n = len(g.nodes)
    flips = max(2, n // 4)
    for _ in range(flips):
        a, b = (g.nodes[i] for i in rng.choice(n, size=2, replace=False))
        if g.has_edge(a, b):
            if (a, b) not in config.required_edges:
                g.remove(a, b)
        elif (
            (a, b) not in config.forbidden_edges
            and len(g.parents[b]) < config.max_parents
            and not g.has_path(b, a)
        ):
            g.add(a, b)


def _check_constraints(nodes: Sequence[str], config: HillClimbConfig) -> None:
    overlap = config.required_edges & config.forbidden_edges
    if overlap:
        raise InconsistentConstraints(f"edges both required and forbidden: {sorted(overlap)}")
    node_set = set(nodes)
    for a, b in config.required_edges | config.forbidden_edges:
        if a not in node_set or b not in node_set:
            raise UnknownNode(f"constraint edge ({a}, {b}) names an unknown node")
    try:
        validate_dag(tuple(nodes), config.required_edges)
    except Exception as exc:
        raise InconsistentConstraints(f"required edges are not a DAG: {exc}") from exc
    for b in node_set:
        indeg = sum(1 for (x, y) in config.required_edges if y == b)
        if indeg > config.max_parents:
            raise InconsistentConstraints(f"{b}: required in-degree exceeds max_parents")


def hill_climb_result(dataset: Dataset, config: HillClimbConfig,
                      nodes: Sequence[str] | None = None) -> ClimbResult:
    """Run the search and keep the score trace (one entry per accepted move)."""
    if nodes is None:
        nodes = [v for v in dataset.schema.variables if v in dataset.columns]
    _check_constraints(nodes, config)
    enc = _Encoded(dataset, nodes)
    scorer = _Scorer(enc, config.criterion)

    g = _Graph(nodes, config.required_edges)
    best = _climb(g, scorer, config)
    if config.restarts:
        rng = np.random.default_rng(config.seed)
        for _ in range(config.restarts):
            g = _Graph(nodes, best.dag.edges)
            _perturb(g, config, rng)
            candidate = _climb(g, scorer, config)
            if candidate.score > best.score + IMPROVEMENT_EPS:
                best = candidate
    return best


def hill_climb(dataset: Dataset, config: HillClimbConfig | None = None,
               nodes: Sequence[str] | None = None) -> Dag:
    """Greedy local search from the empty graph (plus any required edges)."""
    return hill_climb_result(dataset, config or HillClimbConfig(), nodes).dag


def learn_network(dataset: Dataset, config: HillClimbConfig | None = None,
                  smoothing: float = 0.0) -> BayesianNetwork:
    """Structure search followed by CPT fitting, the usual one-call path."""
    dag = hill_climb(dataset, config)
    return fit_mle(dag, dataset, smoothing)
