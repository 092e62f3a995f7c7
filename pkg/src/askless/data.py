"""Survey response data: CSV ingestion, the derived usage attribute, and a
seeded synthetic population generator.

Datasets are stored column-wise (one list of level strings per variable)
and exposed row-wise where callers need assignments.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    EmptyFile,
    InvalidLevel,
    MissingColumn,
    MissingUsageAnswer,
    ProfileSchemaMismatch,
    UnknownColumn,
)
from .schema import ROLE_ASKED, SurveySchema, default_schema

PROB_TOL = 1e-9

# the six service-usage questions the derived attribute is computed from
USAGE_QUESTIONS = ("MBROW", "MEMAIL", "MBANK", "MVID", "GPS", "SMP")
DERIVED_VAR = "DIS"
# a response of "4" or "5" counts as heavy usage of that service
_HEAVY = frozenset(("4", "5"))


@dataclass(frozen=True)
class Dataset:
    """Complete categorical response rows; the label column is optional."""

    schema: SurveySchema
    columns: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        object.__setattr__(
            self, "columns", {k: tuple(v) for k, v in self.columns.items()}
        )
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise UnknownColumn("columns have differing lengths")
        for name, values in self.columns.items():
            q = self.schema[name]
            levels = set(q.levels)
            for i, v in enumerate(values):
                if v not in levels:
                    raise InvalidLevel(
                        f"row {i + 1}, column {name}: {v!r} is not a valid level"
                    )

    def __len__(self) -> int:
        if not self.columns:
            return 0
        return len(next(iter(self.columns.values())))

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v for v in self.schema.variables if v in self.columns)

    @property
    def has_labels(self) -> bool:
        return self.schema.label_var in self.columns

    def row(self, i: int) -> dict[str, str]:
        return {name: self.columns[name][i] for name in self.variables}

    def rows(self) -> Iterator[dict[str, str]]:
        for i in range(len(self)):
            yield self.row(i)

    def column(self, name: str) -> tuple[str, ...]:
        if name not in self.columns:
            raise MissingColumn(f"dataset has no column {name!r}")
        return self.columns[name]

    def subset(self, indices: Sequence[int]) -> "Dataset":
        return Dataset(
            schema=self.schema,
            columns={k: tuple(v[i] for i in indices) for k, v in self.columns.items()},
        )


def read_csv(path: str | Path, schema: SurveySchema, require_label: bool = True) -> Dataset:
    """Load a comma-separated response file whose header matches the schema."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path}: no header row") from None
        known = set(schema.variables)
        for col in header:
            if col not in known:
                raise UnknownColumn(f"{path}: column {col!r} is not in the schema")
        if len(set(header)) != len(header):
            raise UnknownColumn(f"{path}: duplicate column in header")
        header_set = set(header)
        for var in schema.variables:
            if var == schema.label_var and not require_label:
                continue
            if var not in header_set:
                raise MissingColumn(f"{path}: missing column {var!r}")
        levels = {v: set(schema.levels(v)) for v in header}
        columns: dict[str, list[str]] = {v: [] for v in header}
        for lineno, record in enumerate(reader, start=2):
            if len(record) != len(header):
                raise InvalidLevel(f"{path}:{lineno}: expected {len(header)} cells")
            for col, cell in zip(header, record):
                cell = sys.intern(cell)
                if cell not in levels[col]:
                    raise InvalidLevel(
                        f"{path}:{lineno}: {cell!r} is not a valid level of {col}"
                    )
                columns[col].append(cell)
    return Dataset(schema=schema, columns={k: tuple(v) for k, v in columns.items()})


def write_csv(dataset: Dataset, path: str | Path) -> None:
    """Write rows in schema column order; levels never need quoting."""
    variables = dataset.variables
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(variables)
        cols = [dataset.columns[v] for v in variables]
        for i in range(len(dataset)):
            writer.writerow([c[i] for c in cols])


def derive_dis(row: Mapping[str, str], schema: SurveySchema) -> str:
    """Bucket the count of heavily used services into low / med / high.

    A service counts when its response is 4 or 5; 0-1 services is "low",
    2-3 "med", 4+ "high". The rule lives here alone so alternates can be
    swapped in.
    """
    count = 0
    for q in USAGE_QUESTIONS:
        if q not in row:
            raise MissingUsageAnswer(f"usage question {q} unanswered")
        schema[q].level_index(row[q])
        if row[q] in _HEAVY:
            count += 1
    if count <= 1:
        return "low"
    if count <= 3:
        return "med"
    return "high"


@dataclass(frozen=True)
class GeneratorConfig:
    """Synthetic-population recipe: segment mix and per-segment response
    profiles, blurred with a uniform noise component."""

    segment_prior: Mapping[str, float]
    response_profiles: Mapping[str, Mapping[str, tuple[float, ...]]]
    noise: float = 0.15
    rows: int = 10_000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "segment_prior", dict(self.segment_prior))
        object.__setattr__(
            self,
            "response_profiles",
            {s: {q: tuple(p) for q, p in prof.items()}
             for s, prof in self.response_profiles.items()},
        )
        if not 0.0 <= self.noise <= 1.0:
            raise ProfileSchemaMismatch(f"noise {self.noise} outside [0, 1]")
        if abs(sum(self.segment_prior.values()) - 1.0) > PROB_TOL:
            raise ProfileSchemaMismatch("segmentPrior must sum to 1")
        for seg, profile in self.response_profiles.items():
            for q, probs in profile.items():
                if abs(sum(probs) - 1.0) > PROB_TOL:
                    raise ProfileSchemaMismatch(
                        f"profile row for segment {seg}, question {q} must sum to 1"
                    )


def parse_generator_config(doc: Mapping) -> GeneratorConfig:
    return GeneratorConfig(
        segment_prior=doc["segmentPrior"],
        response_profiles={
            s: {q: tuple(p) for q, p in prof.items()}
            for s, prof in doc["responseProfiles"].items()
        },
        noise=doc.get("noise", 0.15),
        rows=doc.get("rows", 10_000),
        seed=doc.get("seed", 0),
    )


def load_generator_config(path: str | Path) -> GeneratorConfig:
    return parse_generator_config(json.loads(Path(path).read_text()))


def default_generator_config() -> GeneratorConfig:
    """Bundled four-segment broadband population; profiles are data."""
    text = resources.files("askless.resources").joinpath("default_generator.json").read_text()
    return parse_generator_config(json.loads(text))


def generate_synthetic(schema: SurveySchema, config: GeneratorConfig) -> Dataset:
    """Sample labeled survey rows: segment, then answers, then the derived
    attribute. Deterministic for a given seed."""
    segments = list(config.segment_prior)
    label_levels = schema.levels(schema.label_var)
    if tuple(segments) != label_levels:
        raise ProfileSchemaMismatch(
            f"segmentPrior keys {segments} must equal label levels {list(label_levels)}"
        )
    asked = [q for q in schema.questions if q.role == ROLE_ASKED]
    for seg in segments:
        profile = config.response_profiles.get(seg)
        if profile is None:
            raise ProfileSchemaMismatch(f"no response profile for segment {seg}")
        for q in asked:
            probs = profile.get(q.abbr)
            if probs is None:
                raise ProfileSchemaMismatch(f"segment {seg}: no profile for {q.abbr}")
            if len(probs) != len(q.levels):
                raise ProfileSchemaMismatch(
                    f"segment {seg}, question {q.abbr}: {len(probs)} probabilities "
                    f"for {len(q.levels)} levels"
                )

    rng = np.random.default_rng(config.seed)
    n = config.rows
    prior = np.array([config.segment_prior[s] for s in segments])
    seg_idx = rng.choice(len(segments), size=n, p=prior)

    columns: dict[str, tuple[str, ...]] = {}
    for q in asked:
        # per-segment level distribution with the uniform noise mixed in
        table = np.array(
            [config.response_profiles[s][q.abbr] for s in segments], dtype=float
        )
        table = (1.0 - config.noise) * table + config.noise / len(q.levels)
        cdf = np.cumsum(table, axis=1)
        u = rng.random(n)
        idx = np.minimum((u[:, None] > cdf[seg_idx]).sum(axis=1), len(q.levels) - 1)
        level_strings = [sys.intern(l) for l in q.levels]
        columns[q.abbr] = tuple(level_strings[i] for i in idx)

    label_strings = [sys.intern(l) for l in label_levels]
    columns[schema.label_var] = tuple(label_strings[i] for i in seg_idx)

    if DERIVED_VAR in schema:
        heavy = np.zeros(n, dtype=int)
        for q in USAGE_QUESTIONS:
            col = columns[q]
            heavy += np.fromiter((v in _HEAVY for v in col), dtype=int, count=n)
        buckets = (sys.intern("low"), sys.intern("med"), sys.intern("high"))
        dis_idx = np.where(heavy <= 1, 0, np.where(heavy <= 3, 1, 2))
        columns[DERIVED_VAR] = tuple(buckets[i] for i in dis_idx)

    return Dataset(schema=schema, columns=columns)


def split_indices(n: int, fraction: float, seed: int) -> tuple[list[int], list[int]]:
    """Deterministic shuffled partition of row indices, first part sized
    round(fraction * n)."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    cut = int(round(fraction * n))
    first = sorted(int(i) for i in order[:cut])
    second = sorted(int(i) for i in order[cut:])
    return first, second
