"""Multiclass precision / recall / F-score with the two macro aggregates.

``macro_f`` is the unweighted mean of per-class F-scores; ``f_of_macro_pr``
is the harmonic mean of macro precision and macro recall. Both are
reported; selection logic elsewhere keys on ``f_of_macro_pr``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import LengthMismatch, UnknownClass


def f_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f_score: float
    support: int


@dataclass(frozen=True)
class EvaluationReport:
    classes: tuple[str, ...]
    per_class: Mapping[str, ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f: float
    f_of_macro_pr: float
    confusion: tuple[tuple[int, ...], ...]  # confusion[true][predicted]

    def to_doc(self) -> dict:
        return {
            "classes": list(self.classes),
            "perClass": {
                c: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "fScore": m.f_score,
                    "support": m.support,
                }
                for c, m in self.per_class.items()
            },
            "macroPrecision": self.macro_precision,
            "macroRecall": self.macro_recall,
            "macroF": self.macro_f,
            "fOfMacroPR": self.f_of_macro_pr,
            "confusion": [list(row) for row in self.confusion],
        }

    def render_table(self, title: str = "") -> str:
        lines = []
        if title:
            lines.append(title)
        lines.append(f"{'Segment':<10}{'Precision':>10}{'Recall':>10}{'F-Score':>10}{'Support':>10}")
        for c in self.classes:
            m = self.per_class[c]
            lines.append(
                f"{c:<10}{m.precision:>10.2f}{m.recall:>10.2f}{m.f_score:>10.2f}{m.support:>10d}"
            )
        lines.append(
            f"{'Average':<10}{self.macro_precision:>10.2f}{self.macro_recall:>10.2f}"
            f"{self.f_of_macro_pr:>10.2f}"
        )
        return "\n".join(lines)


def evaluate(predictions: Sequence[str], labels: Sequence[str],
             classes: Sequence[str]) -> EvaluationReport:
    """Confusion-matrix metrics for a batch of predictions.

    Zero denominators (a class never predicted, or with no support) give
    precision/recall 0 rather than an error.
    """
    if len(predictions) != len(labels):
        raise LengthMismatch(
            f"{len(predictions)} predictions for {len(labels)} labels"
        )
    if not labels:
        raise LengthMismatch("need at least one prediction")
    classes = tuple(classes)
    index = {c: i for i, c in enumerate(classes)}
    k = len(classes)
    confusion = [[0] * k for _ in range(k)]
    for pred, true in zip(predictions, labels):
        if pred not in index:
            raise UnknownClass(f"prediction {pred!r} is not a known class")
        if true not in index:
            raise UnknownClass(f"label {true!r} is not a known class")
        confusion[index[true]][index[pred]] += 1

    per_class = {}
    for c in classes:
        i = index[c]
        tp = confusion[i][i]
        support = sum(confusion[i])
        predicted = sum(confusion[t][i] for t in range(k))
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        per_class[c] = ClassMetrics(
            precision=precision,
            recall=recall,
            f_score=f_score(precision, recall),
            support=support,
        )
    macro_p = sum(m.precision for m in per_class.values()) / k
    macro_r = sum(m.recall for m in per_class.values()) / k
    return EvaluationReport(
        classes=classes,
        per_class=per_class,
        macro_precision=macro_p,
        macro_recall=macro_r,
        macro_f=sum(m.f_score for m in per_class.values()) / k,
        f_of_macro_pr=f_score(macro_p, macro_r),
        confusion=tuple(tuple(row) for row in confusion),
    )
