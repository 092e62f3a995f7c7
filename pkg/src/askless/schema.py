"""Survey questionnaire schema: variables, their categorical domains, and roles.

A schema declares every variable of the survey: the asked questions, any
derived attributes, and exactly one segment-label variable. Variable order
in the schema is the canonical order used for tie-breaking and for CSV
column layout throughout the package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .errors import DuplicateAbbr, MalformedDocument, MissingLabelVar

ROLE_ASKED = "asked"
ROLE_DERIVED = "derived"
ROLE_LABEL = "label"
_ROLES = (ROLE_ASKED, ROLE_DERIVED, ROLE_LABEL)


@dataclass(frozen=True)
class QuestionSpec:
    """One survey variable: identifier, display text, level set, and role."""

    abbr: str
    text: str
    levels: tuple[str, ...]
    role: str = ROLE_ASKED

    def __post_init__(self):
        if not self.abbr:
            raise MalformedDocument("question abbr must be non-empty")
        object.__setattr__(self, "levels", tuple(self.levels))
        if len(self.levels) < 2:
            raise MalformedDocument(f"{self.abbr}: needs at least 2 levels")
        if len(set(self.levels)) != len(self.levels):
            raise MalformedDocument(f"{self.abbr}: duplicate levels")
        if self.role not in _ROLES:
            raise MalformedDocument(f"{self.abbr}: unknown role {self.role!r}")

    def level_index(self, level: str) -> int:
        try:
            return self.levels.index(level)
        except ValueError:
            raise _invalid_level(self.abbr, level, self.levels) from None


def _invalid_level(abbr, level, levels):
    from .errors import InvalidLevel

    return InvalidLevel(f"{level!r} is not a level of {abbr} (levels: {', '.join(levels)})")


@dataclass(frozen=True)
class SurveySchema:
    """Ordered collection of questions with exactly one label variable."""

    questions: tuple[QuestionSpec, ...]
    label_var: str
    _by_abbr: Mapping[str, QuestionSpec] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "questions", tuple(self.questions))
        by_abbr: dict[str, QuestionSpec] = {}
        for q in self.questions:
            if q.abbr in by_abbr:
                raise DuplicateAbbr(f"duplicate question abbr {q.abbr!r}")
            by_abbr[q.abbr] = q
        labels = [q.abbr for q in self.questions if q.role == ROLE_LABEL]
        if labels != [self.label_var]:
            raise MissingLabelVar(
                f"schema must have exactly one role=label question equal to "
                f"labelVar {self.label_var!r}; found {labels}"
            )
        object.__setattr__(self, "_by_abbr", by_abbr)

    def __getitem__(self, abbr: str) -> QuestionSpec:
        try:
            return self._by_abbr[abbr]
        except KeyError:
            from .errors import UnknownNode

            raise UnknownNode(f"no variable {abbr!r} in schema") from None

    def __contains__(self, abbr: str) -> bool:
        return abbr in self._by_abbr

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(q.abbr for q in self.questions)

    @property
    def asked(self) -> tuple[str, ...]:
        """Variables a respondent can actually be asked (the question pool)."""
        return tuple(q.abbr for q in self.questions if q.role == ROLE_ASKED)

    def levels(self, abbr: str) -> tuple[str, ...]:
        return self[abbr].levels

    def to_doc(self) -> dict:
        return {
            "labelVar": self.label_var,
            "questions": [
                {"abbr": q.abbr, "text": q.text, "levels": list(q.levels), "role": q.role}
                for q in self.questions
            ],
        }


def parse_schema(doc: Mapping) -> SurveySchema:
    """Build a schema from a parsed JSON document."""
    if not isinstance(doc, Mapping) or "questions" not in doc:
        raise MalformedDocument("schema document needs a 'questions' array")
    if "labelVar" not in doc:
        raise MissingLabelVar("schema document needs a 'labelVar' field")
    questions = []
    for entry in doc["questions"]:
        try:
            questions.append(
                QuestionSpec(
                    abbr=entry["abbr"],
                    text=entry.get("text", ""),
                    levels=tuple(entry["levels"]),
                    role=entry.get("role", ROLE_ASKED),
                )
            )
        except (KeyError, TypeError) as exc:
            raise MalformedDocument(f"bad question entry {entry!r}: {exc}") from exc
    return SurveySchema(questions=tuple(questions), label_var=doc["labelVar"])


def load_schema(path: str | Path) -> SurveySchema:
    """Read a schema JSON document from disk."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"{path}: not valid JSON ({exc})") from exc
    return parse_schema(doc)


def default_schema() -> SurveySchema:
    """The bundled 24-variable broadband questionnaire (22 asked, DIS, SGV2)."""
    text = resources.files("askless.resources").joinpath("default_schema.json").read_text()
    return parse_schema(json.loads(text))


def check_levels(schema: SurveySchema, assignment: Mapping[str, str],
                 allow: Iterable[str] | None = None) -> None:
    """Validate that every (variable, value) pair fits the schema."""
    for var, value in assignment.items():
        q = schema[var]
        if value not in q.levels:
            raise _invalid_level(var, value, q.levels)
        if allow is not None and var not in allow:
            from .errors import UnknownNode

            raise UnknownNode(f"variable {var!r} not allowed here")
