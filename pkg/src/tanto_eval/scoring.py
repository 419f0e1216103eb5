"""Official grading scheme: partial credit, subject aggregation, pass rule.

Grading rules for a digit-sequence question of n statements worth p
points: all statements correct earns p, exactly one wrong earns p - 2
(clamped at zero), two or more wrong earn 0. The partial-credit rule only
applies for n >= 3; shorter sequences and single-choice questions are
all-or-nothing. A format violation always earns 0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping

from .answer_format import (
    DigitSequence,
    DigitString,
    FormatViolation,
    OptionIndex,
    ParsedAnswer,
    SingleChoice,
    ViolationReason,
    conforms,
    parse_answer,
    render_answer,
)
from .dataset import SUBJECT_MAX_POINTS, ExamDataset, Question, Subject
from .errors import DatasetFormatError, UnknownQuestionError

PARTIAL_CREDIT_MIN_STATEMENTS = 3
PARTIAL_CREDIT_PENALTY = 2


@dataclass(frozen=True, slots=True)
class QuestionResult:
    """Outcome of grading one question."""

    question_id: str
    predicted: ParsedAnswer | FormatViolation
    correct_statements: int
    total_statements: int
    points_awarded: int
    exact_match: bool


@dataclass(frozen=True, slots=True)
class PassRule:
    """Year-specific pass thresholds; data, not code.

    The section floor is an exact fraction of each subject maximum
    (40% of 50/75/50 gives integer floors 20/30/20).
    """

    pass_threshold: int = 93
    subject_max: Mapping[Subject, int] = field(
        default_factory=lambda: dict(SUBJECT_MAX_POINTS)
    )
    floor_fraction: Fraction = Fraction(2, 5)

    @property
    def floors(self) -> dict[Subject, int]:
        floors = {}
        for subject, maximum in self.subject_max.items():
            floor = self.floor_fraction * maximum
            if floor.denominator != 1:
                raise ValueError(
                    f"floor fraction {self.floor_fraction} of {maximum} is not an integer"
                )
            floors[subject] = int(floor)
        return floors


@dataclass(frozen=True, slots=True)
class ExamScore:
    """Per-subject and total points plus the pass determination."""

    per_subject: dict[Subject, int]
    total: int
    passed: bool
    subject_floors: dict[Subject, int]
    pass_threshold: int

    @classmethod
    def from_subject_points(
        cls, per_subject: Mapping[Subject, int], rule: PassRule
    ) -> "ExamScore":
        per_subject = {s: int(per_subject.get(s, 0)) for s in Subject}
        floors = rule.floors
        total = sum(per_subject.values())
        passed = total >= rule.pass_threshold and all(
            per_subject[s] >= floors[s] for s in Subject
        )
        return cls(
            per_subject=per_subject,
            total=total,
            passed=passed,
            subject_floors=floors,
            pass_threshold=rule.pass_threshold,
        )

    def to_record(self) -> dict:
        return {
            "per_subject": {s.value: n for s, n in self.per_subject.items()},
            "total": self.total,
            "passed": self.passed,
            "subject_floors": {s.value: n for s, n in self.subject_floors.items()},
            "pass_threshold": self.pass_threshold,
        }


def score_question(q: Question, predicted: ParsedAnswer | FormatViolation) -> QuestionResult:
    """Grade one question under the official rules."""
    key = q.key.answer
    if isinstance(key, DigitString):
        total = len(key.digits)
    else:
        total = 1

    if isinstance(predicted, FormatViolation):
        return QuestionResult(
            question_id=q.id,
            predicted=predicted,
            correct_statements=0,
            total_statements=total,
            points_awarded=0,
            exact_match=False,
        )

    if not conforms(predicted, q.key.shape):
        raise ValueError(
            f"{q.id}: prediction {render_answer(predicted)!r} does not conform to the "
            f"question shape; parse against the question's shape before scoring"
        )

    if isinstance(key, OptionIndex):
        exact = predicted == key
        return QuestionResult(
            question_id=q.id,
            predicted=predicted,
            correct_statements=1 if exact else 0,
            total_statements=1,
            points_awarded=q.points if exact else 0,
            exact_match=exact,
        )

    assert isinstance(predicted, DigitString)
    correct = sum(p == k for p, k in zip(predicted.digits, key.digits))
    wrong = total - correct
    if wrong == 0:
        points = q.points
    elif wrong == 1 and total >= PARTIAL_CREDIT_MIN_STATEMENTS:
        points = max(q.points - PARTIAL_CREDIT_PENALTY, 0)
    else:
        points = 0
    return QuestionResult(
        question_id=q.id,
        predicted=predicted,
        correct_statements=correct,
        total_statements=total,
        points_awarded=points,
        exact_match=wrong == 0,
    )


def score_all(
    dataset: ExamDataset,
    results: Mapping[str, ParsedAnswer | FormatViolation],
) -> list[QuestionResult]:
    """Grade every question; missing answers count as blank responses."""
    known = {q.id for q in dataset.questions}
    unknown = sorted(set(results) - known)
    if unknown:
        raise UnknownQuestionError(f"answers reference unknown question ids: {unknown}")
    graded = []
    for q in dataset.questions:
        predicted = results.get(q.id, FormatViolation(ViolationReason.EMPTY, ""))
        graded.append(score_question(q, predicted))
    return graded


def aggregate_results(
    dataset: ExamDataset, results: Iterable[QuestionResult], rule: PassRule
) -> ExamScore:
    """Sum graded questions into per-subject points and apply the pass rule."""
    by_id = {r.question_id: r.points_awarded for r in results}
    per_subject = {s: 0 for s in Subject}
    for q in dataset.questions:
        per_subject[q.subject] += by_id[q.id]
    return ExamScore.from_subject_points(per_subject, rule)


def score_exam(
    dataset: ExamDataset,
    results: Mapping[str, ParsedAnswer | FormatViolation],
    rule: PassRule,
) -> ExamScore:
    """Aggregate one exam year's results into subject sums and pass/fail."""
    return aggregate_results(dataset, score_all(dataset, results), rule)


def load_answers_file(path: str | Path) -> dict[str, str]:
    """Parse the line-delimited ``id<TAB>raw_answer`` answers format."""
    answers: dict[str, str] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise DatasetFormatError("expected id<TAB>raw_answer", line=line_no)
            qid, raw = line.split("\t", 1)
            if qid in answers:
                raise DatasetFormatError(f"duplicate answer for {qid!r}", line=line_no)
            answers[qid] = raw
    return answers


def score_raw_answers(
    dataset: ExamDataset,
    raw_answers: Mapping[str, str],
    rule: PassRule,
    *,
    lenient: bool = False,
) -> tuple[ExamScore, list[QuestionResult]]:
    """Parse raw answer strings with the strict grammar, then grade."""
    known = {q.id for q in dataset.questions}
    unknown = sorted(set(raw_answers) - known)
    if unknown:
        raise UnknownQuestionError(f"answers reference unknown question ids: {unknown}")
    parsed = {
        q.id: parse_answer(raw_answers[q.id], q.key.shape, lenient=lenient)
        for q in dataset.questions
        if q.id in raw_answers
    }
    graded = score_all(dataset, parsed)
    return aggregate_results(dataset, graded, rule), graded


def exact_match_accuracy(results: Iterable[QuestionResult]) -> float:
    """Fraction of questions whose final answer equals the key in full."""
    results = list(results)
    if not results:
        raise ValueError("accuracy over zero results is undefined")
    return sum(r.exact_match for r in results) / len(results)


def brute_force_score_oracle(q: Question, *, max_space: int = 10**6) -> dict[str, int]:
    """Exhaustive answer -> points table, built by direct rule application.

    Deliberately independent of score_question: mismatches are counted by
    string comparison over the enumerated answer space. Used to cross-check
    the scorer.
    """
    shape = q.key.shape
    key = q.key.as_string
    table: dict[str, int] = {}
    if isinstance(shape, SingleChoice):
        if shape.option_count > max_space:
            raise ValueError(f"{q.id}: answer space {shape.option_count} exceeds bound {max_space}")
        for i in range(1, shape.option_count + 1):
            table[str(i)] = q.points if str(i) == key else 0
        return table

    space = len(shape.alphabet) ** shape.length
    if space > max_space:
        raise ValueError(f"{q.id}: answer space {space} exceeds bound {max_space}")
    for combo in itertools.product(sorted(shape.alphabet), repeat=shape.length):
        candidate = "".join(str(d) for d in combo)
        mismatches = sum(a != b for a, b in zip(candidate, key))
        if mismatches == 0:
            points = q.points
        elif mismatches == 1 and shape.length >= PARTIAL_CREDIT_MIN_STATEMENTS:
            points = max(q.points - PARTIAL_CREDIT_PENALTY, 0)
        else:
            points = 0
        table[candidate] = points
    return table
