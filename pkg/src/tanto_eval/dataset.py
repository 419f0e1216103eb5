"""Exam dataset schema, JSONL loading, year splits and demonstration sampling.

The on-disk format is UTF-8 JSON Lines, one question per line, preserving
the original joint answer structure (a whole question with all of its
statements and one combined key). The record schema is documented in the
README under "Dataset format".
"""

from __future__ import annotations

import json
import random
import re
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from .answer_format import (
    DigitSequence,
    FormatViolation,
    ParsedAnswer,
    SingleChoice,
    parse_answer,
    render_answer,
    shape_from_dict,
    shape_to_dict,
)
from .errors import DatasetFormatError

REIWA_BASE_YEAR = 2018  # Reiwa 1 == 2019

# Labels appear in gojuon order on the official exam sheets.
_KATAKANA_ORDER = "アイウエオカキクケコサシスセソタチツテト"

_YEAR_TAG_RE = re.compile(r"^(?:[Rr](\d{1,2})|(\d{4}))$")


class Subject(str, Enum):
    """The three law sections of the multiple-choice exam."""

    CONSTITUTIONAL = "constitutional"
    CIVIL = "civil"
    CRIMINAL = "criminal"

    @property
    def japanese(self) -> str:
        return {
            Subject.CONSTITUTIONAL: "憲法",
            Subject.CIVIL: "民法",
            Subject.CRIMINAL: "刑法",
        }[self]


#: Official maximum points per subject for one exam year.
SUBJECT_MAX_POINTS: dict[Subject, int] = {
    Subject.CONSTITUTIONAL: 50,
    Subject.CIVIL: 75,
    Subject.CRIMINAL: 50,
}


def parse_year_tag(tag: str | int) -> int:
    """Normalize a year tag ("R6", "r6", "2024", 2024) to a Gregorian year."""
    if isinstance(tag, int):
        return tag
    m = _YEAR_TAG_RE.match(tag.strip())
    if not m:
        raise ValueError(f"unrecognized year tag: {tag!r}")
    if m.group(1) is not None:
        return REIWA_BASE_YEAR + int(m.group(1))
    return int(m.group(2))


def reiwa_tag(year: int) -> str:
    """Render a Gregorian year as its Reiwa era tag (2024 -> "R6")."""
    if year <= REIWA_BASE_YEAR:
        raise ValueError(f"year {year} predates the Reiwa era")
    return f"R{year - REIWA_BASE_YEAR}"


@dataclass(frozen=True, slots=True)
class Statement:
    """One labeled proposition within a question (e.g. label "ア")."""

    label: str
    text: str

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("statement label must be non-empty")
        if not self.text:
            raise ValueError(f"statement {self.label!r} has empty text")


@dataclass(frozen=True, slots=True)
class AnswerKey:
    """A gold answer validated against its shape at construction time."""

    shape: SingleChoice | DigitSequence
    answer: ParsedAnswer

    @classmethod
    def from_string(cls, shape: SingleChoice | DigitSequence, value: str) -> "AnswerKey":
        parsed = parse_answer(value, shape)
        if isinstance(parsed, FormatViolation):
            raise ValueError(
                f"answer key {value!r} does not conform to shape {shape}: {parsed.reason.value}"
            )
        return cls(shape=shape, answer=parsed)

    @property
    def as_string(self) -> str:
        return render_answer(self.answer)


@dataclass(frozen=True, slots=True)
class Question:
    """One intact exam question, exactly as posed on the official sheet."""

    id: str
    year: int
    subject: Subject
    preamble: str
    statements: tuple[Statement, ...]
    key: AnswerKey
    points: int
    options: tuple[str, ...] | None = None
    excluded: bool = False

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("question id must be non-empty")
        if self.points < 1:
            raise ValueError(f"{self.id}: points must be >= 1, got {self.points}")
        labels = [s.label for s in self.statements]
        if len(set(labels)) != len(labels):
            raise ValueError(f"{self.id}: duplicate statement labels {labels}")
        kana = [_KATAKANA_ORDER.index(l) for l in labels if l in _KATAKANA_ORDER]
        if len(kana) == len(labels) and kana != sorted(kana):
            raise ValueError(f"{self.id}: statement labels out of order {labels}")
        shape = self.key.shape
        if isinstance(shape, DigitSequence) and self.statements:
            if shape.length != len(self.statements):
                raise ValueError(
                    f"{self.id}: digit sequence length {shape.length} does not match "
                    f"{len(self.statements)} statements"
                )
        if isinstance(shape, SingleChoice) and self.options is not None:
            if shape.option_count != len(self.options):
                raise ValueError(
                    f"{self.id}: option_count {shape.option_count} does not match "
                    f"{len(self.options)} option texts"
                )


@dataclass(frozen=True, slots=True)
class ExamDataset:
    """An immutable collection of questions, shareable across threads."""

    questions: tuple[Question, ...]
    metadata: str = ""

    def __post_init__(self) -> None:
        ids = [q.id for q in self.questions]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate question ids: {dupes}")

    def __len__(self) -> int:
        return len(self.questions)

    def __iter__(self) -> Iterator[Question]:
        return iter(self.questions)

    def by_id(self, question_id: str) -> Question:
        for q in self.questions:
            if q.id == question_id:
                return q
        raise KeyError(question_id)

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(sorted({q.year for q in self.questions}))


@dataclass(frozen=True, slots=True)
class ValidationReport:
    """Per-subject point sums for one exam year, with deviation flags."""

    year: int
    subject_sums: dict[Subject, int]
    expected: dict[Subject, int]
    flags: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.flags

    def to_text(self) -> str:
        lines = [f"year {self.year} ({reiwa_tag(self.year)})"]
        for subject in Subject:
            got = self.subject_sums[subject]
            want = self.expected[subject]
            mark = "ok" if got == want else "MISMATCH"
            lines.append(f"  {subject.value:<14} {got:>3} / {want:>3}  {mark}")
        lines.append(f"  total          {sum(self.subject_sums.values()):>3} / {sum(self.expected.values()):>3}")
        for flag in self.flags:
            lines.append(f"  flag: {flag}")
        return "\n".join(lines)

    def to_record(self) -> dict:
        return {
            "year": self.year,
            "subject_sums": {s.value: n for s, n in self.subject_sums.items()},
            "expected": {s.value: n for s, n in self.expected.items()},
            "flags": list(self.flags),
            "ok": self.ok,
        }


def question_to_record(q: Question) -> dict:
    record = {
        "id": q.id,
        "year": reiwa_tag(q.year),
        "subject": q.subject.value,
        "preamble": q.preamble,
        "statements": [{"label": s.label, "text": s.text} for s in q.statements],
        "options": list(q.options) if q.options is not None else None,
        "answer_shape": shape_to_dict(q.key.shape),
        "answer_key": q.key.as_string,
        "points": q.points,
    }
    if q.excluded:
        record["excluded"] = True
    return record


def question_from_record(record: dict, *, line: int | None = None) -> Question:
    def need(name: str):
        if name not in record:
            raise DatasetFormatError(f"missing field {name!r}", line=line)
        return record[name]

    try:
        shape = shape_from_dict(need("answer_shape"))
        key = AnswerKey.from_string(shape, str(need("answer_key")))
        statements = tuple(
            Statement(label=s["label"], text=s["text"]) for s in need("statements")
        )
        options = record.get("options")
        return Question(
            id=str(need("id")),
            year=parse_year_tag(need("year")),
            subject=Subject(need("subject")),
            preamble=str(need("preamble")),
            statements=statements,
            key=key,
            points=int(need("points")),
            options=tuple(options) if options is not None else None,
            excluded=bool(record.get("excluded", False)),
        )
    except DatasetFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        ident = record.get("id", "<no id>")
        raise DatasetFormatError(f"record {ident}: {exc}", line=line) from exc


def load_dataset(path: str | Path, *, strict_totals: bool = False) -> ExamDataset:
    """Load a JSONL dataset file, enforcing every schema invariant.

    With strict_totals, every year present must sum to the official
    per-subject maxima; leave it off for research subsets.
    """
    path = Path(path)
    questions: list[Question] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"invalid JSON: {exc}", line=line_no) from exc
            question = question_from_record(record, line=line_no)
            if question.id in seen:
                raise DatasetFormatError(f"duplicate id {question.id!r}", line=line_no)
            seen.add(question.id)
            questions.append(question)
    dataset = ExamDataset(questions=tuple(questions), metadata=str(path))
    if strict_totals:
        for year in dataset.years:
            report = validate_exam_year(dataset, year)
            if not report.ok:
                raise DatasetFormatError(
                    f"year {year} fails official totals: {'; '.join(report.flags)}"
                )
    return dataset


def save_dataset(dataset: ExamDataset, path: str | Path) -> None:
    """Write the dataset back out as JSONL; load_dataset round-trips it."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for q in dataset.questions:
            fh.write(json.dumps(question_to_record(q), ensure_ascii=False) + "\n")


def validate_exam_year(dataset: ExamDataset, year: str | int) -> ValidationReport:
    """Check one year's per-subject point sums against the official 50/75/50."""
    year = parse_year_tag(year)
    sums = {subject: 0 for subject in Subject}
    for q in dataset.questions:
        if q.year == year and not q.excluded:
            sums[q.subject] += q.points
    flags = tuple(
        f"{subject.value}: {sums[subject]} points, expected {SUBJECT_MAX_POINTS[subject]}"
        for subject in Subject
        if sums[subject] != SUBJECT_MAX_POINTS[subject]
    )
    return ValidationReport(
        year=year, subject_sums=sums, expected=dict(SUBJECT_MAX_POINTS), flags=flags
    )


def split_by_year(
    dataset: ExamDataset, test_years: Iterable[str | int]
) -> tuple[ExamDataset, ExamDataset]:
    """Partition into (train, test) by exam year; exact and disjoint."""
    wanted = {parse_year_tag(y) for y in test_years}
    if not wanted:
        raise ValueError("test_years must be non-empty")
    missing = wanted - set(dataset.years)
    if missing:
        warnings.warn(
            f"test years {sorted(missing)} not present in dataset; test split may be empty",
            stacklevel=2,
        )
    train = tuple(q for q in dataset.questions if q.year not in wanted)
    test = tuple(q for q in dataset.questions if q.year in wanted)
    return (
        ExamDataset(questions=train, metadata=dataset.metadata),
        ExamDataset(questions=test, metadata=dataset.metadata),
    )


def select_demonstrations(train: ExamDataset, k: int, seed: int) -> list[Question]:
    """Sample k distinct demonstration questions, deterministically for a seed.

    Selection depends only on the train contents (by id), k and seed, not
    on the order questions appear in the file.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if k > len(train):
        raise ValueError(f"cannot select {k} demonstrations from {len(train)} questions")
    ordered = sorted(train.questions, key=lambda q: q.id)
    return random.Random(seed).sample(ordered, k)
