"""Shared test utilities: small network builders and brute-force oracles."""
import itertools
from dataclasses import replace

import numpy as np

from askless.bn import BayesianNetwork, Cpt, validate_dag
from askless.schema import QuestionSpec, SurveySchema

TREND_SEEDS = (101, 102, 103, 104, 105)
_trend_cache = {}


def trend_runs():
    """Per seed: (network, 4,000-row test set, climb result) learned with
    hill climbing + AIC from a fresh 10,000-row bundled population.

    Built once per test session; several suites share these runs.
    """
    if "runs" not in _trend_cache:
        from askless.data import default_generator_config, generate_synthetic
        from askless.learning import HillClimbConfig, fit_mle, hill_climb_result
        from askless.schema import default_schema

        schema = default_schema()
        base = default_generator_config()
        runs = []
        for seed in TREND_SEEDS:
            train = generate_synthetic(schema, replace(base, rows=10_000, seed=seed))
            test = generate_synthetic(schema, replace(base, rows=4_000, seed=seed + 5000))
            result = hill_climb_result(train, HillClimbConfig(criterion="aic"))
            runs.append((fit_mle(result.dag, train, 0.0), test, result))
        _trend_cache["runs"] = runs
    return _trend_cache["runs"]


def make_schema(spec):
    """spec: list of (name, levels) pairs; the last variable is the label."""
    questions = [
        QuestionSpec(name, "", tuple(levels),
                     "label" if i == len(spec) - 1 else "asked")
        for i, (name, levels) in enumerate(spec)
    ]
    return SurveySchema(tuple(questions), spec[-1][0])


def make_network(schema, edges, tables):
    """Assemble a network from {node: row-major table} matrices."""
    dag = validate_dag(schema.variables, edges)
    cpts = {}
    for name in schema.variables:
        parents = dag.parents(name)
        cpts[name] = Cpt(
            variable=name,
            levels=schema.levels(name),
            parents=parents,
            parent_levels=tuple(schema.levels(p) for p in parents),
            table=np.asarray(tables[name], dtype=float),
        )
    return BayesianNetwork(schema=schema, dag=dag, cpts=cpts)


def random_network(rng, n_nodes=None, max_levels=4, max_parents=3):
    """A random DAG over variables X0..Xn with Dirichlet CPT rows."""
    if n_nodes is None:
        n_nodes = int(rng.integers(3, 11))
    names = [f"X{i}" for i in range(n_nodes)]
    levels = {
        n: tuple(str(i) for i in range(int(rng.integers(2, max_levels + 1))))
        for n in names
    }
    schema = make_schema([(n, levels[n]) for n in names])
    edges = []
    for j, child in enumerate(names):
        if j == 0:
            continue
        k = int(rng.integers(0, min(max_parents, j) + 1))
        for i in sorted(rng.choice(j, size=k, replace=False)):
            edges.append((names[i], child))
    dag = validate_dag(names, edges)
    cpts = {}
    for name in names:
        parents = dag.parents(name)
        rows = 1
        for p in parents:
            rows *= len(levels[p])
        table = rng.dirichlet(np.ones(len(levels[name])), size=rows)
        cpts[name] = Cpt(
            variable=name,
            levels=levels[name],
            parents=parents,
            parent_levels=tuple(levels[p] for p in parents),
            table=table,
        )
    return BayesianNetwork(schema=schema, dag=dag, cpts=cpts)


def enumerate_posterior(bn, target, evidence):
    """Brute-force P(target | evidence) by summing the full joint, built
    straight from the CPT factorization (independent of the elimination
    engine's factor algebra)."""
    names = list(bn.nodes)
    shapes = [len(bn.cpts[n].levels) for n in names]
    joint = np.ones(shapes)
    for name in names:
        cpt = bn.cpts[name]
        axes = [names.index(p) for p in cpt.parents] + [names.index(name)]
        arr = cpt.table.reshape([shapes[a] for a in axes])
        arr = arr.transpose(np.argsort(axes))  # ascending global axis order
        shape = [1] * len(names)
        for a in axes:
            shape[a] = shapes[a]
        joint = joint * arr.reshape(shape)
    index = []
    for name in names:
        if name in evidence:
            index.append(bn.cpts[name].level_index(evidence[name]))
        else:
            index.append(slice(None))
    restricted = joint[tuple(index)]
    keep = [n for n in names if n not in evidence]
    axis = keep.index(target)
    other = tuple(i for i in range(restricted.ndim) if i != axis)
    marginal = restricted.sum(axis=other) if other else restricted
    total = marginal.sum()
    return {lv: float(p / total) for lv, p in zip(bn.cpts[target].levels, marginal)}


def total_variation(p, q):
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def all_assignments(bn):
    names = list(bn.nodes)
    for combo in itertools.product(*[bn.cpts[n].levels for n in names]):
        yield dict(zip(names, combo))
