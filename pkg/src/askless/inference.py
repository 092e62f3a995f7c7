"""Conditional-probability queries with partial evidence.

Two engines answer the same question P(target | evidence):

* :func:`eliminate` — exact variable elimination; the reference engine.
* :func:`lw_query` — likelihood weighting, an importance sampler that fixes
  evidence nodes and weights each sample by the probability of the evidence
  given its sampled parents. Scales to large sample counts because all
  samples advance through the network together as arrays.

Both are pure functions of the (immutable) network, so any number of
queries may run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .bn import BayesianNetwork, Evidence, check_evidence, topological_order
from .errors import (
    AllZeroWeights,
    ConflictingEvidence,
    TargetInEvidence,
    ZeroProbabilityEvidence,
)

EXACT = "exact"
LIKELIHOOD_WEIGHTING = "lw"

DEFAULT_SAMPLES = 5000

_NORM_TOL = 1e-9


@dataclass(frozen=True)
class Posterior:
    """Distribution over one variable's levels, tagged with its provenance."""

    variable: str
    probs: Mapping[str, float]
    engine: str
    effective_samples: float

    def __post_init__(self):
        object.__setattr__(self, "probs", dict(self.probs))
        total = sum(self.probs.values())
        if any(p < 0 for p in self.probs.values()) or abs(total - 1.0) > _NORM_TOL:
            raise ValueError(f"posterior over {self.variable} is not normalized")

    def argmax(self) -> str:
        """Most probable level; ties go to the earliest level."""
        best_level, best_p = None, -1.0
        for level, p in self.probs.items():
            if p > best_p:
                best_level, best_p = level, p
        return best_level

    def to_doc(self) -> dict:
        return {
            "variable": self.variable,
            "probs": dict(self.probs),
            "engine": self.engine,
            "effectiveSamples": (
                "exact" if math.isinf(self.effective_samples) else self.effective_samples
            ),
        }


def _check_query(bn: BayesianNetwork, target: str, evidence: Evidence) -> None:
    if target not in bn.cpts:
        from .errors import UnknownNode

        raise UnknownNode(f"target {target!r} is not a network node")
    if target in evidence:
        raise TargetInEvidence(f"target {target!r} appears in the evidence")
    check_evidence(bn, evidence)


# ---------------------------------------------------------------------------
# exact engine: variable elimination
# ---------------------------------------------------------------------------

class _Factor:
    __slots__ = ("vars", "values")

    def __init__(self, vars: tuple[str, ...], values: np.ndarray):
        self.vars = vars
        self.values = values

    def multiply(self, other: "_Factor", pos: Mapping[str, int]) -> "_Factor":
        merged = tuple(sorted(set(self.vars) | set(other.vars), key=pos.__getitem__))
        return _Factor(
            merged,
            self._expand(merged) * other._expand(merged),
        )

    def _expand(self, merged: tuple[str, ...]) -> np.ndarray:
        # insert singleton axes for missing variables, then rely on broadcasting
        shape = [1] * len(merged)
        src = {v: i for i, v in enumerate(self.vars)}
        axes = [src[v] for v in merged if v in src]
        arr = np.transpose(self.values, axes) if self.vars else self.values
        j = 0
        for i, v in enumerate(merged):
            if v in src:
                shape[i] = arr.shape[j]
                j += 1
        return arr.reshape(shape)

    def sum_out(self, var: str) -> "_Factor":
        axis = self.vars.index(var)
        return _Factor(
            self.vars[:axis] + self.vars[axis + 1:],
            self.values.sum(axis=axis),
        )

    def restrict(self, var: str, index: int) -> "_Factor":
        axis = self.vars.index(var)
        return _Factor(
            self.vars[:axis] + self.vars[axis + 1:],
            np.take(self.values, index, axis=axis),
        )


def _cpt_factor(bn: BayesianNetwork, node: str) -> _Factor:
    cpt = bn.cpts[node]
    shape = tuple(len(ls) for ls in cpt.parent_levels) + (len(cpt.levels),)
    # row-major reshape matches the mixed-radix row convention
    return _Factor(cpt.parents + (node,), cpt.table.reshape(shape))


def _elimination_order(bn: BayesianNetwork, hidden: set[str],
                       scopes: Sequence[tuple[str, ...]]) -> list[str]:
    """Min-degree over the moral graph of the restricted factor scopes,
    ties broken by schema order."""
    pos = {v: i for i, v in enumerate(bn.schema.variables)}
    neighbors: dict[str, set[str]] = {v: set() for v in hidden}
    for scope in scopes:
        inside = [v for v in scope if v in hidden]
        for i, a in enumerate(inside):
            for b in inside[i + 1:]:
                neighbors[a].add(b)
                neighbors[b].add(a)
    order = []
    remaining = set(hidden)
    while remaining:
        v = min(remaining, key=lambda x: (len(neighbors[x] & remaining), pos[x]))
        order.append(v)
        live = neighbors[v] & remaining
        for a in live:
            neighbors[a] |= live - {a}
        remaining.remove(v)
    return order


def eliminate(bn: BayesianNetwork, target: str, evidence: Evidence) -> Posterior:
    """Exact P(target | evidence) by summing hidden variables out of the
    factor product. Matches brute-force joint enumeration."""
    _check_query(bn, target, evidence)
    pos = {v: i for i, v in enumerate(bn.schema.variables)}

    factors = []
    for node in bn.nodes:
        f = _cpt_factor(bn, node)
        for var in f.vars:
            if var in evidence:
                f = f.restrict(var, bn.cpts[var].level_index(evidence[var]))
        factors.append(f)

    hidden = {v for v in bn.nodes if v != target and v not in evidence}
    for var in _elimination_order(bn, hidden, [f.vars for f in factors]):
        touching = [f for f in factors if var in f.vars]
        rest = [f for f in factors if var not in f.vars]
        product = touching[0]
        for f in touching[1:]:
            product = product.multiply(f, pos)
        rest.append(product.sum_out(var))
        factors = rest

    result = factors[0]
    for f in factors[1:]:
        result = result.multiply(f, pos)
    values = result.values if result.vars == (target,) else result.values.reshape(-1)
    total = float(values.sum())
    if total <= 0.0:
        raise ZeroProbabilityEvidence(
            f"evidence has probability 0 under the network (target {target})"
        )
    levels = bn.cpts[target].levels
    probs = values / total
    return Posterior(
        variable=target,
        probs={lv: float(p) for lv, p in zip(levels, probs)},
        engine=EXACT,
        effective_samples=math.inf,
    )


# ---------------------------------------------------------------------------
# sampling engine: likelihood weighting
# ---------------------------------------------------------------------------

def lw_query(bn: BayesianNetwork, target: str, evidence: Evidence,
             n_samples: int = DEFAULT_SAMPLES, seed: int = 0) -> Posterior:
    """Weighted forward sampling of P(target | evidence).

    Non-evidence nodes are sampled from their CPTs in topological order;
    evidence nodes contribute their conditional probability to the sample
    weight instead. Deterministic for a given seed.
    """
    _check_query(bn, target, evidence)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)

    sampled: dict[str, np.ndarray] = {}
    weights = np.ones(n_samples)
    for node in topological_order(bn.dag):
        cpt = bn.cpts[node]
        if cpt.parents:
            rows = np.zeros(n_samples, dtype=np.int64)
            for parent, levels in zip(cpt.parents, cpt.parent_levels):
                rows = rows * len(levels) + sampled[parent]
            probs = cpt.table[rows]
        else:
            probs = np.broadcast_to(cpt.table[0], (n_samples, len(cpt.levels)))
        if node in evidence:
            li = cpt.level_index(evidence[node])
            weights = weights * probs[:, li]
            sampled[node] = np.full(n_samples, li, dtype=np.int64)
        else:
            u = rng.random(n_samples)
            cdf = np.cumsum(probs, axis=1)
            idx = (u[:, None] > cdf).sum(axis=1)
            sampled[node] = np.minimum(idx, len(cpt.levels) - 1)

    total = float(weights.sum())
    if total <= 0.0:
        raise AllZeroWeights(
            "every sample had weight 0; evidence may be impossible or "
            "n_samples too small"
        )
    levels = bn.cpts[target].levels
    tallies = np.bincount(sampled[target], weights=weights, minlength=len(levels))
    ess = total * total / float((weights * weights).sum())
    return Posterior(
        variable=target,
        probs={lv: float(w / total) for lv, w in zip(levels, tallies)},
        engine=LIKELIHOOD_WEIGHTING,
        effective_samples=ess,
    )


# ---------------------------------------------------------------------------
# prediction and incremental updates
# ---------------------------------------------------------------------------

def query(bn: BayesianNetwork, target: str, evidence: Evidence,
          engine: str = EXACT, n_samples: int = DEFAULT_SAMPLES,
          seed: int = 0) -> Posterior:
    if engine == EXACT:
        return eliminate(bn, target, evidence)
    if engine == LIKELIHOOD_WEIGHTING:
        return lw_query(bn, target, evidence, n_samples=n_samples, seed=seed)
    raise ValueError(f"unknown engine {engine!r}")


def predict(bn: BayesianNetwork, target: str, evidence: Evidence,
            engine: str = EXACT, n_samples: int = DEFAULT_SAMPLES,
            seed: int = 0) -> str:
    """Most probable level of the target under the chosen engine."""
    return query(bn, target, evidence, engine, n_samples, seed).argmax()


def merge_evidence(prior: Evidence, new: Evidence) -> dict[str, str]:
    merged = dict(prior)
    for var, value in new.items():
        if var in merged and merged[var] != value:
            raise ConflictingEvidence(
                f"{var} already observed as {merged[var]!r}, got {value!r}"
            )
        merged[var] = value
    return merged


def incremental_update(bn: BayesianNetwork, target: str, prior_evidence: Evidence,
                       new_answers: Evidence, engine: str = EXACT,
                       n_samples: int = DEFAULT_SAMPLES, seed: int = 0) -> Posterior:
    """Fold new answers into the evidence and requery; the network itself
    never changes, so this equals a fresh query on the union."""
    merged = merge_evidence(prior_evidence, new_answers)
    return query(bn, target, merged, engine, n_samples, seed)
