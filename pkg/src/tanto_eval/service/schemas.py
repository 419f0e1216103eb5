"""Request/response models for the HTTP API."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..answer_format import (
    AnswerShape,
    DigitSequence,
    FormatViolation,
    ParsedAnswer,
    SingleChoice,
    render_answer,
)
from ..scoring import ExamScore, QuestionResult


class ShapeModel(BaseModel):
    kind: Literal["single_choice", "digit_sequence"]
    option_count: Optional[int] = None
    length: Optional[int] = None
    alphabet: Optional[list[int]] = None

    def to_shape(self) -> AnswerShape:
        if self.kind == "single_choice":
            if self.option_count is None:
                raise ValueError("single_choice shape needs option_count")
            return SingleChoice(option_count=self.option_count)
        if self.length is None:
            raise ValueError("digit_sequence shape needs length")
        if self.alphabet is None:
            return DigitSequence(length=self.length)
        return DigitSequence(length=self.length, alphabet=frozenset(self.alphabet))


class ParseRequest(BaseModel):
    raw: str
    shape: ShapeModel
    lenient: bool = False


class ParseResponse(BaseModel):
    ok: bool
    canonical: Optional[str] = None
    violation_reason: Optional[str] = None
    raw: str

    @classmethod
    def from_result(cls, raw: str, result: ParsedAnswer | FormatViolation) -> "ParseResponse":
        if isinstance(result, FormatViolation):
            return cls(ok=False, violation_reason=result.reason.value, raw=raw)
        return cls(ok=True, canonical=render_answer(result), raw=raw)


class ValidateRequest(BaseModel):
    dataset_path: str
    year: str
    strict: bool = False


class ValidateResponse(BaseModel):
    year: int
    subject_sums: dict[str, int]
    expected: dict[str, int]
    flags: list[str]
    ok: bool
    text: str


class PassRuleModel(BaseModel):
    pass_threshold: int = 93
    floor_fraction: str = "2/5"


class QuestionResultModel(BaseModel):
    question_id: str
    answer: Optional[str] = None
    violation_reason: Optional[str] = None
    points_awarded: int
    exact_match: bool
    correct_statements: int
    total_statements: int

    @classmethod
    def from_result(cls, result: QuestionResult) -> "QuestionResultModel":
        answer = None
        violation = None
        if isinstance(result.predicted, FormatViolation):
            violation = result.predicted.reason.value
        else:
            answer = render_answer(result.predicted)
        return cls(
            question_id=result.question_id,
            answer=answer,
            violation_reason=violation,
            points_awarded=result.points_awarded,
            exact_match=result.exact_match,
            correct_statements=result.correct_statements,
            total_statements=result.total_statements,
        )


class ExamScoreModel(BaseModel):
    per_subject: dict[str, int]
    total: int
    passed: bool
    subject_floors: dict[str, int]
    pass_threshold: int

    @classmethod
    def from_score(cls, score: ExamScore) -> "ExamScoreModel":
        return cls(**score.to_record())


class ScoreExamRequest(BaseModel):
    dataset_path: str
    answers_path: str
    year: Optional[str] = None
    rule: PassRuleModel = Field(default_factory=PassRuleModel)
    lenient: bool = False


class ScoreExamResponse(BaseModel):
    score: ExamScoreModel
    results: list[QuestionResultModel]
    accuracy: float
    missing: list[str]


class RunRequest(BaseModel):
    dataset_path: str
    test_year: str
    strategy: Literal["zero_shot", "few_shot", "self_verify", "multi_agent"] = "zero_shot"
    inner: Literal["zero_shot", "few_shot", "multi_agent"] = "zero_shot"
    backend: str = "oracle"
    agent_backends: Optional[dict[str, str]] = None
    agent_mode: Literal["shared", "separate"] = "shared"
    few_shot_k: int = 5
    few_shot_seed: int = 0
    candidate_batch_size: int = 20
    repeats: int = 1
    run_seed: int = 0
    parallelism: int = 1
    lenient: bool = False
    temperature: float = 0.0
    max_output_tokens: int = 512
    sample_seed: Optional[int] = None
    rule: PassRuleModel = Field(default_factory=PassRuleModel)
    out_dir: Optional[str] = None
    http_endpoint: Optional[str] = None
    http_model: Optional[str] = None


class SummaryModel(BaseModel):
    label: str
    accuracy: float
    exam_scale: dict[str, float]
    per_subject_avg: dict[str, float]
    pass_per_repeat: list[bool]
    repeats: int
    questions: int
    fingerprint: str
    incomplete: bool


class RunResponse(BaseModel):
    fingerprint: str
    out_dir: Optional[str]
    incomplete: bool
    scores: list[ExamScoreModel]
    summary: SummaryModel
    rendered: str


class ReplayRequest(BaseModel):
    run_dir: str
    out_dir: Optional[str] = None


class ReplayResponse(BaseModel):
    summary: SummaryModel
    rendered: str
    matches_original: bool


class ReportRequest(BaseModel):
    run_dirs: list[str]
    format: Literal["text", "markdown", "json"] = "text"


class ReportResponse(BaseModel):
    document: str


class HealthResponse(BaseModel):
    status: str
    version: str
