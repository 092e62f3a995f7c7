"""Line search over the number of survey questions.

For each candidate k, every test respondent is scored from a fresh random
k-subset of the askable questions, and the resulting segment predictions
are compared against the true labels. The chosen k is either the smallest
one whose harmonic-macro F meets the threshold, or the best-scoring one.

Each respondent's randomness (subset draw plus any sampler seed) derives
from (seed, k, row index), so results are identical however the per-row
work is scheduled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .bn import BayesianNetwork
from .data import Dataset
from .errors import KTooLarge, UnlabeledTestSet
from .inference import DEFAULT_SAMPLES, LIKELIHOOD_WEIGHTING, predict
from .metrics import EvaluationReport, evaluate

MODE_THRESHOLD = "threshold"
MODE_BEST = "best"

DEFAULT_GRID = (5, 10, 15, 20)


@dataclass(frozen=True)
class FindKConfig:
    grid: tuple[int, ...] = DEFAULT_GRID
    threshold: float = 0.70
    mode: str = MODE_THRESHOLD
    question_pool: tuple[str, ...] = ()  # empty means: all asked variables
    engine: str = LIKELIHOOD_WEIGHTING
    n_samples: int = DEFAULT_SAMPLES
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(self.grid))
        object.__setattr__(self, "question_pool", tuple(self.question_pool))
        if not self.grid:
            raise ValueError("grid must not be empty")
        if list(self.grid) != sorted(self.grid):
            raise ValueError("grid must be ascending")
        if self.mode not in (MODE_THRESHOLD, MODE_BEST):
            raise ValueError(f"mode must be {MODE_THRESHOLD!r} or {MODE_BEST!r}")
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError("threshold must be in (0, 1]")


@dataclass(frozen=True)
class FindKReport:
    per_k: Mapping[int, EvaluationReport]
    chosen_k: int | None
    mode: str
    threshold: float
    decision: str

    def to_doc(self) -> dict:
        return {
            "mode": self.mode,
            "threshold": self.threshold,
            "chosenK": self.chosen_k,
            "decision": self.decision,
            "perK": {str(k): r.to_doc() for k, r in sorted(self.per_k.items())},
        }

    def render_tables(self) -> str:
        parts = [
            self.per_k[k].render_table(title=f"Accuracy metrics for k={k}")
            for k in sorted(self.per_k)
        ]
        parts.append(f"Decision: {self.decision}")
        return "\n\n".join(parts)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_doc(), indent=1) + "\n")


def random_subset(pool: Sequence[str], k: int, rng: np.random.Generator) -> list[str]:
    """Uniform k-subset without replacement; advances the generator state."""
    if not 0 <= k <= len(pool):
        raise KTooLarge(f"cannot draw {k} questions from a pool of {len(pool)}")
    picks = rng.choice(len(pool), size=k, replace=False)
    return [pool[i] for i in picks]


def choose_k(scores: Mapping[int, float], mode: str, threshold: float
             ) -> tuple[int | None, str]:
    """Selection rule over per-k scores; returns (k or None, decision note)."""
    ks = sorted(scores)
    if mode == MODE_THRESHOLD:
        for k in ks:
            if scores[k] >= threshold:
                return k, f"threshold: k={k} is the smallest with f {scores[k]:.4f} >= {threshold}"
        return None, f"threshold: no k reached {threshold}"
    best = max(ks, key=lambda k: (scores[k], -k))
    return best, f"best: k={best} maximizes f at {scores[best]:.4f}"


def _evaluate_at_k(bn: BayesianNetwork, test_set: Dataset, k: int,
                   config: FindKConfig, pool: tuple[str, ...]) -> EvaluationReport:
    label_var = bn.schema.label_var
    labels = test_set.column(label_var)
    classes = bn.schema.levels(label_var)
    predictions = []
    for i in range(len(test_set)):
        seq = np.random.SeedSequence([config.seed, k, i])
        rng = np.random.default_rng(seq)
        questions = random_subset(pool, k, rng)
        row = test_set.row(i)
        evidence = {q: row[q] for q in questions}
        child_seed = int(seq.generate_state(1)[0])
        predictions.append(
            predict(bn, label_var, evidence, engine=config.engine,
                    n_samples=config.n_samples, seed=child_seed)
        )
    return evaluate(predictions, labels, classes)


def find_k(bn: BayesianNetwork, test_set: Dataset, config: FindKConfig,
           evaluator: Callable[[int], EvaluationReport] | None = None) -> FindKReport:
    """Evaluate every k in the grid and apply the selection rule.

    ``evaluator`` substitutes the per-k evaluation (used to exercise the
    selection logic against fixed metric tables).
    """
    pool = config.question_pool or bn.schema.asked
    bad = [q for q in pool if q not in bn.schema or bn.schema[q].role != "asked"]
    if bad:
        raise ValueError(f"pool entries are not askable questions: {bad}")
    for k in config.grid:
        if not 1 <= k <= len(pool):
            raise KTooLarge(f"k={k} outside [1, {len(pool)}]")
    if evaluator is None and not test_set.has_labels:
        raise UnlabeledTestSet("find_k needs a labeled test set")

    per_k: dict[int, EvaluationReport] = {}
    for k in config.grid:
        per_k[k] = evaluator(k) if evaluator else _evaluate_at_k(
            bn, test_set, k, config, tuple(pool)
        )
    chosen, decision = choose_k(
        {k: r.f_of_macro_pr for k, r in per_k.items()}, config.mode, config.threshold
    )
    return FindKReport(
        per_k=per_k,
        chosen_k=chosen,
        mode=config.mode,
        threshold=config.threshold,
        decision=decision,
    )
