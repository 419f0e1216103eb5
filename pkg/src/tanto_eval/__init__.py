"""Exam-faithful evaluation and inference orchestration for the Japanese
bar exam multiple-choice format: format-preserving datasets, strict answer
grammar, official partial-credit scoring, and pluggable inference
pipelines with replayable transcripts."""

from .answer_format import (
    AnswerShape,
    DigitSequence,
    DigitString,
    FormatViolation,
    OptionIndex,
    ParsedAnswer,
    SingleChoice,
    ViolationReason,
    parse_answer,
    render_answer,
)
from .backend import (
    CompletionContext,
    CompletionRecord,
    HttpBackendConfig,
    HttpChatBackend,
    ModelBackend,
    OracleBackend,
    ReplayBackend,
    SamplingParams,
    ScriptedBackend,
    Transcript,
    replay_store,
)
from .dataset import (
    AnswerKey,
    ExamDataset,
    Question,
    Statement,
    Subject,
    ValidationReport,
    load_dataset,
    save_dataset,
    select_demonstrations,
    split_by_year,
    validate_exam_year,
)
from .errors import (
    BackendError,
    DatasetFormatError,
    LeakageError,
    ReplayMissError,
    TantoError,
    TemplateError,
    UnknownQuestionError,
)
from .pipeline import (
    AnswerAttempt,
    EvaluationRun,
    PipelineConfig,
    load_run,
    replay_run,
    run_evaluation,
    run_few_shot,
    run_multi_agent,
    run_self_verification,
    run_zero_shot,
    scan_for_leakage,
)
from .report import EvaluationSummary, render, summarize
from .scoring import (
    ExamScore,
    PassRule,
    QuestionResult,
    brute_force_score_oracle,
    exact_match_accuracy,
    score_exam,
    score_question,
)

__version__ = "0.1.0"
