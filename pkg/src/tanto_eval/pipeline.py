"""Inference strategies over a dataset: zero-shot, few-shot, self-verification
and the four-stage multi-agent pipeline, plus replayable evaluation runs.

Call-count contract per question: zero-shot and few-shot issue exactly one
completion; self-verification issues exactly two (one extra forward pass);
multi-agent issues retriever batches + verifier + one extractor per
retained pair + reasoner (3 + retained for a single-batch pool).
"""

from __future__ import annotations

import hashlib
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

from .answer_format import (
    FormatViolation,
    ParsedAnswer,
    ViolationReason,
    answer_from_dict,
    answer_to_dict,
    normalize_digits,
    parse_answer,
    render_answer,
)
from .backend import (
    CompletionContext,
    CompletionRecord,
    ModelBackend,
    SamplingParams,
    Transcript,
    replay_store,
)
from .dataset import (
    ExamDataset,
    Question,
    Subject,
    load_dataset,
    select_demonstrations,
    split_by_year,
)
from .errors import BackendError, LeakageError, ReplayMissError
from .prompts import (
    AGENT_ROLES,
    PromptConfig,
    PromptRegistry,
    build_agent_prompt,
    build_answer_prompt,
    build_verification_prompt_raw,
    default_registry,
)
from .scoring import ExamScore, PassRule, QuestionResult, aggregate_results, score_all

STRATEGIES = ("zero_shot", "few_shot", "self_verify", "multi_agent")

_NUMBER_RE = re.compile(r"[0-9]+")


@dataclass(frozen=True, slots=True)
class PipelineConfig:
    """Which strategy to run, and every knob needed to reproduce it.

    When params.seed is unset, each repeat samples with seed
    run_seed + run_index, so repeated trials against a live backend are
    distinct but reproducible.
    """

    strategy: str = "zero_shot"
    few_shot_k: int = 5
    few_shot_seed: int = 0
    inner: str = "zero_shot"  # inner strategy for self_verify
    agent_mode: str = "shared"  # shared | separate
    candidate_batch_size: int = 20
    repeats: int = 1
    run_seed: int = 0
    parallelism: int = 1
    lenient: bool = False
    params: SamplingParams = field(default_factory=SamplingParams)
    prompt: PromptConfig = field(default_factory=PromptConfig)

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; pick one of {STRATEGIES}")
        if self.strategy == "self_verify":
            if self.inner == "self_verify":
                raise ValueError("self_verify cannot nest itself: one verification pass only")
            if self.inner not in STRATEGIES:
                raise ValueError(f"unknown inner strategy {self.inner!r}")
        if self.agent_mode not in ("shared", "separate"):
            raise ValueError(f"agent_mode must be shared or separate, got {self.agent_mode!r}")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if self.candidate_batch_size < 1:
            raise ValueError("candidate_batch_size must be >= 1")
        if self.few_shot_k < 0:
            raise ValueError("few_shot_k must be >= 0")

    def to_snapshot(self) -> dict:
        return {
            "strategy": self.strategy,
            "few_shot_k": self.few_shot_k,
            "few_shot_seed": self.few_shot_seed,
            "inner": self.inner,
            "agent_mode": self.agent_mode,
            "candidate_batch_size": self.candidate_batch_size,
            "repeats": self.repeats,
            "run_seed": self.run_seed,
            "parallelism": self.parallelism,
            "lenient": self.lenient,
            "params": self.params.to_record(),
            "prompt": {
                "demos_in_system": self.prompt.demos_in_system,
                "include_system_role": self.prompt.include_system_role,
            },
        }

    @classmethod
    def from_snapshot(cls, data: Mapping) -> "PipelineConfig":
        prompt = data.get("prompt", {})
        return cls(
            strategy=data["strategy"],
            few_shot_k=int(data.get("few_shot_k", 5)),
            few_shot_seed=int(data.get("few_shot_seed", 0)),
            inner=data.get("inner", "zero_shot"),
            agent_mode=data.get("agent_mode", "shared"),
            candidate_batch_size=int(data.get("candidate_batch_size", 20)),
            repeats=int(data.get("repeats", 1)),
            run_seed=int(data.get("run_seed", 0)),
            parallelism=int(data.get("parallelism", 1)),
            lenient=bool(data.get("lenient", False)),
            params=SamplingParams.from_record(data.get("params", {})),
            prompt=PromptConfig(
                demos_in_system=bool(prompt.get("demos_in_system", False)),
                include_system_role=bool(prompt.get("include_system_role", True)),
            ),
        )


@dataclass(frozen=True, slots=True)
class AnswerAttempt:
    """One question's journey through a strategy, with completion references."""

    question_id: str
    run_index: int
    initial: ParsedAnswer | FormatViolation
    final: ParsedAnswer | FormatViolation
    verified: bool
    stage_records: tuple[CompletionRecord, ...]

    def __post_init__(self) -> None:
        if not self.verified and self.final != self.initial:
            raise ValueError(
                f"{self.question_id}: final differs from initial on an unverified attempt"
            )


def _complete(
    backend: ModelBackend,
    messages,
    params: SamplingParams,
    context: CompletionContext,
    transcript: Transcript | None,
) -> CompletionRecord:
    try:
        record = backend.complete(messages, params, context)
    except ReplayMissError:
        raise
    except BackendError as exc:
        raise BackendError(
            f"question {context.question_id} stage {context.stage}: {exc}"
        ) from exc
    if transcript is not None:
        transcript.append(record)
    return record


def run_zero_shot(
    q: Question,
    backend: ModelBackend,
    *,
    run_index: int = 0,
    params: SamplingParams = SamplingParams(),
    prompt_config: PromptConfig = PromptConfig(),
    registry: PromptRegistry | None = None,
    transcript: Transcript | None = None,
    lenient: bool = False,
) -> AnswerAttempt:
    """One completion, parsed strictly against the question's shape."""
    registry = registry or default_registry()
    messages = build_answer_prompt(q, (), prompt_config, registry)
    record = _complete(
        backend, messages, params, CompletionContext(q.id, "answer", run_index), transcript
    )
    parsed = parse_answer(record.response, q.key.shape, lenient=lenient)
    return AnswerAttempt(
        question_id=q.id,
        run_index=run_index,
        initial=parsed,
        final=parsed,
        verified=False,
        stage_records=(record,),
    )


def run_few_shot(
    q: Question,
    demos: Sequence[Question],
    backend: ModelBackend,
    *,
    run_index: int = 0,
    params: SamplingParams = SamplingParams(),
    prompt_config: PromptConfig = PromptConfig(),
    registry: PromptRegistry | None = None,
    transcript: Transcript | None = None,
    lenient: bool = False,
) -> AnswerAttempt:
    """Zero-shot with demonstrations; refuses demos drawn from the test year."""
    leaked = [d.id for d in demos if d.year == q.year]
    if leaked:
        raise LeakageError(
            f"demonstrations {leaked} share exam year {q.year} with test question {q.id}"
        )
    registry = registry or default_registry()
    messages = build_answer_prompt(q, [(d, d.key) for d in demos], prompt_config, registry)
    record = _complete(
        backend, messages, params, CompletionContext(q.id, "answer", run_index), transcript
    )
    parsed = parse_answer(record.response, q.key.shape, lenient=lenient)
    return AnswerAttempt(
        question_id=q.id,
        run_index=run_index,
        initial=parsed,
        final=parsed,
        verified=False,
        stage_records=(record,),
    )


def run_self_verification(
    q: Question,
    backend: ModelBackend,
    inner_strategy: str = "zero_shot",
    *,
    demos: Sequence[Question] = (),
    pool: ExamDataset | None = None,
    role_backends: Mapping[str, ModelBackend] | None = None,
    candidate_batch_size: int = 20,
    run_index: int = 0,
    params: SamplingParams = SamplingParams(),
    prompt_config: PromptConfig = PromptConfig(),
    registry: PromptRegistry | None = None,
    transcript: Transcript | None = None,
    lenient: bool = False,
) -> AnswerAttempt:
    """Inner strategy, then exactly one verification pass over its answer.

    A violation in the inner pass is shown to the verifier verbatim (the
    only path by which a violation can be repaired); an unparseable
    verifier reply falls back to the initial answer, so verification can
    never destroy a well-formed parse.
    """
    registry = registry or default_registry()
    common = dict(
        run_index=run_index,
        params=params,
        prompt_config=prompt_config,
        registry=registry,
        transcript=transcript,
        lenient=lenient,
    )
    if inner_strategy == "zero_shot":
        inner = run_zero_shot(q, backend, **common)
    elif inner_strategy == "few_shot":
        inner = run_few_shot(q, demos, backend, **common)
    elif inner_strategy == "multi_agent":
        if pool is None:
            raise ValueError("multi_agent inner strategy needs a candidate pool")
        inner = run_multi_agent(
            q,
            pool,
            role_backends or {role: backend for role in AGENT_ROLES},
            candidate_batch_size=candidate_batch_size,
            **common,
        )
    else:
        raise ValueError(f"unsupported inner strategy {inner_strategy!r}")

    initial = inner.final
    if isinstance(initial, FormatViolation):
        answer_text = initial.raw
    else:
        answer_text = render_answer(initial)
    messages = build_verification_prompt_raw(q, answer_text, prompt_config, registry)
    record = _complete(
        backend, messages, params, CompletionContext(q.id, "verification", run_index), transcript
    )
    verdict = parse_answer(record.response, q.key.shape, lenient=lenient)
    final = initial if isinstance(verdict, FormatViolation) else verdict
    return AnswerAttempt(
        question_id=q.id,
        run_index=run_index,
        initial=initial,
        final=final,
        verified=True,
        stage_records=inner.stage_records + (record,),
    )


def parse_candidate_numbers(text: str) -> set[int]:
    """Retriever/verifier reply contract: numbers separated by non-digits.

    Anything unparseable yields the empty selection instead of failing, so
    one flaky stage cannot abort a run.
    """
    return {int(m) for m in _NUMBER_RE.findall(normalize_digits(text))}


def _resolve_role_backends(
    backend: ModelBackend | Mapping[str, ModelBackend],
) -> dict[str, ModelBackend]:
    if isinstance(backend, ModelBackend):
        return {role: backend for role in AGENT_ROLES}
    mapping = dict(backend)
    if set(mapping) != set(AGENT_ROLES):
        raise ValueError(
            f"multi-agent needs exactly the roles {sorted(AGENT_ROLES)}, got {sorted(mapping)}"
        )
    return mapping


def run_multi_agent(
    q: Question,
    pool: ExamDataset,
    role_backends: ModelBackend | Mapping[str, ModelBackend],
    *,
    candidate_batch_size: int = 20,
    run_index: int = 0,
    params: SamplingParams = SamplingParams(),
    prompt_config: PromptConfig = PromptConfig(),
    registry: PromptRegistry | None = None,
    transcript: Transcript | None = None,
    lenient: bool = False,
) -> AnswerAttempt:
    """Sequential retriever -> verifier -> extractor -> reasoner dataflow."""
    backends = _resolve_role_backends(role_backends)
    registry = registry or default_registry()
    usable = sorted((p for p in pool.questions if not p.excluded), key=lambda p: p.id)
    if not usable:
        raise ValueError(f"question {q.id}: candidate pool is empty")
    leaked = [p.id for p in usable if p.year == q.year]
    if leaked:
        raise LeakageError(
            f"candidate pool entries {leaked[:5]} share exam year {q.year} "
            f"with test question {q.id}"
        )
    numbered = [(i, p, p.key) for i, p in enumerate(usable, start=1)]
    records: list[CompletionRecord] = []

    selected: set[int] = set()
    for start in range(0, len(numbered), candidate_batch_size):
        batch = numbered[start : start + candidate_batch_size]
        messages = build_agent_prompt(
            "retriever", {"question": q, "candidates": batch}, prompt_config, registry
        )
        record = _complete(
            backends["retriever"],
            messages,
            params,
            CompletionContext(q.id, "retriever", run_index),
            transcript,
        )
        records.append(record)
        batch_numbers = {n for n, _, _ in batch}
        selected |= parse_candidate_numbers(record.response) & batch_numbers

    retrieved = [entry for entry in numbered if entry[0] in selected]

    messages = build_agent_prompt(
        "verifier", {"question": q, "candidates": retrieved}, prompt_config, registry
    )
    record = _complete(
        backends["verifier"],
        messages,
        params,
        CompletionContext(q.id, "verifier", run_index),
        transcript,
    )
    records.append(record)
    retained_numbers = parse_candidate_numbers(record.response) & {n for n, _, _ in retrieved}
    retained = [entry for entry in retrieved if entry[0] in retained_numbers]

    knowledge_items: list[str] = []
    for _, past_q, past_key in retained:
        messages = build_agent_prompt(
            "extractor", {"question": past_q, "answer": past_key}, prompt_config, registry
        )
        record = _complete(
            backends["extractor"],
            messages,
            params,
            CompletionContext(q.id, "extractor", run_index),
            transcript,
        )
        records.append(record)
        knowledge_items.append(record.response.strip())

    messages = build_agent_prompt(
        "reasoner",
        {"question": q, "knowledge": "\n".join(knowledge_items)},
        prompt_config,
        registry,
    )
    record = _complete(
        backends["reasoner"],
        messages,
        params,
        CompletionContext(q.id, "reasoner", run_index),
        transcript,
    )
    records.append(record)

    final = parse_answer(record.response, q.key.shape, lenient=lenient)
    return AnswerAttempt(
        question_id=q.id,
        run_index=run_index,
        initial=final,
        final=final,
        verified=False,
        stage_records=tuple(records),
    )


@dataclass(frozen=True, slots=True)
class RepeatResult:
    """One full pass over the test questions, graded."""

    run_index: int
    attempts: tuple[AnswerAttempt, ...]
    results: tuple[QuestionResult, ...]
    score: ExamScore


@dataclass(slots=True)
class EvaluationRun:
    """Attempts x repeats, the transcript, and the resolved config snapshot."""

    snapshot: dict
    repeats: tuple[RepeatResult, ...]
    transcript: Transcript
    incomplete: bool = False

    @property
    def fingerprint(self) -> str:
        return self.snapshot["fingerprint"]

    def save(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(
            json.dumps(self.snapshot, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        self.transcript.save(out / "transcript.jsonl")
        with (out / "attempts.jsonl").open("w", encoding="utf-8") as fh:
            for repeat in self.repeats:
                for attempt, result in zip(repeat.attempts, repeat.results):
                    fh.write(json.dumps(_attempt_record(attempt, result), ensure_ascii=False) + "\n")
        with (out / "scores.jsonl").open("w", encoding="utf-8") as fh:
            for repeat in self.repeats:
                row = {"run_index": repeat.run_index, "incomplete": self.incomplete}
                row.update(repeat.score.to_record())
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        return out


def _attempt_record(attempt: AnswerAttempt, result: QuestionResult) -> dict:
    return {
        "question_id": attempt.question_id,
        "run_index": attempt.run_index,
        "initial": answer_to_dict(attempt.initial),
        "final": answer_to_dict(attempt.final),
        "verified": attempt.verified,
        "stages": [{"stage": r.stage, "digest": r.digest} for r in attempt.stage_records],
        "points_awarded": result.points_awarded,
        "exact_match": result.exact_match,
        "correct_statements": result.correct_statements,
        "total_statements": result.total_statements,
    }


def config_fingerprint(snapshot: Mapping) -> str:
    body = {k: v for k, v in snapshot.items() if k != "fingerprint"}
    canonical = json.dumps(body, ensure_ascii=False, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _rule_to_record(rule: PassRule) -> dict:
    return {
        "pass_threshold": rule.pass_threshold,
        "subject_max": {s.value: n for s, n in rule.subject_max.items()},
        "floor_fraction": str(rule.floor_fraction),
    }


def rule_from_record(data: Mapping) -> PassRule:
    return PassRule(
        pass_threshold=int(data["pass_threshold"]),
        subject_max={Subject(k): int(v) for k, v in data["subject_max"].items()},
        floor_fraction=Fraction(data["floor_fraction"]),
    )


def build_snapshot(
    config: PipelineConfig,
    rule: PassRule,
    *,
    backend_spec: str = "",
    run_meta: Mapping[str, object] | None = None,
    registry: PromptRegistry | None = None,
) -> dict:
    registry = registry or default_registry()
    snapshot: dict = dict(config.to_snapshot())
    snapshot["backend"] = backend_spec
    snapshot["pass_rule"] = _rule_to_record(rule)
    snapshot["template_hashes"] = registry.hashes()
    snapshot.update(dict(run_meta or {}))
    snapshot["fingerprint"] = config_fingerprint(snapshot)
    return snapshot


def _run_one_question(
    q: Question,
    config: PipelineConfig,
    backend: ModelBackend | Mapping[str, ModelBackend],
    demos: Sequence[Question],
    pool: ExamDataset | None,
    run_index: int,
    registry: PromptRegistry,
    transcript: Transcript,
) -> AnswerAttempt:
    params = config.params
    if params.seed is None:
        params = replace(params, seed=config.run_seed + run_index)
    common = dict(
        run_index=run_index,
        params=params,
        prompt_config=config.prompt,
        registry=registry,
        transcript=transcript,
        lenient=config.lenient,
    )
    primary = backend if isinstance(backend, ModelBackend) else next(iter(backend.values()))
    if config.strategy == "zero_shot":
        return run_zero_shot(q, primary, **common)
    if config.strategy == "few_shot":
        return run_few_shot(q, demos, primary, **common)
    if config.strategy == "self_verify":
        return run_self_verification(
            q,
            primary,
            config.inner,
            demos=demos,
            pool=pool,
            role_backends=backend if isinstance(backend, Mapping) else None,
            candidate_batch_size=config.candidate_batch_size,
            **common,
        )
    return run_multi_agent(
        q,
        pool,  # type: ignore[arg-type]
        backend,
        candidate_batch_size=config.candidate_batch_size,
        **common,
    )


def _execute(
    test: ExamDataset,
    config: PipelineConfig,
    backend: ModelBackend | Mapping[str, ModelBackend],
    train: ExamDataset | None,
    rule: PassRule,
    registry: PromptRegistry,
) -> tuple[tuple[RepeatResult, ...], Transcript, bool]:
    test = ExamDataset(
        questions=tuple(q for q in test.questions if not q.excluded),
        metadata=test.metadata,
    )
    if not test.questions:
        raise ValueError("no scorable questions in the test split")
    needs_demos = config.strategy == "few_shot" or (
        config.strategy == "self_verify" and config.inner == "few_shot"
    )
    needs_pool = config.strategy == "multi_agent" or (
        config.strategy == "self_verify" and config.inner == "multi_agent"
    )
    if (needs_demos or needs_pool) and train is None:
        raise ValueError(f"strategy {config.strategy} needs a training split")
    if train is not None:
        overlap = {q.id for q in train.questions} & {q.id for q in test.questions}
        if overlap:
            raise LeakageError(f"train and test splits share questions: {sorted(overlap)[:5]}")

    demos: list[Question] = []
    if needs_demos:
        demos = select_demonstrations(train, config.few_shot_k, config.few_shot_seed)
    pool = train if needs_pool else None

    transcript = Transcript()
    incomplete = False
    repeats: list[RepeatResult] = []
    for run_index in range(config.repeats):

        def attempt_for(q: Question) -> AnswerAttempt:
            nonlocal incomplete
            try:
                return _run_one_question(
                    q, config, backend, demos, pool, run_index, registry, transcript
                )
            except ReplayMissError:
                raise
            except BackendError:
                incomplete = True
                blank = FormatViolation(ViolationReason.EMPTY, "")
                return AnswerAttempt(
                    question_id=q.id,
                    run_index=run_index,
                    initial=blank,
                    final=blank,
                    verified=False,
                    stage_records=(),
                )

        if config.parallelism > 1:
            with ThreadPoolExecutor(max_workers=config.parallelism) as pool_exec:
                attempts = tuple(pool_exec.map(attempt_for, test.questions))
        else:
            attempts = tuple(attempt_for(q) for q in test.questions)

        answers = {a.question_id: a.final for a in attempts}
        results = tuple(score_all(test, answers))
        score = aggregate_results(test, results, rule)
        repeats.append(
            RepeatResult(run_index=run_index, attempts=attempts, results=results, score=score)
        )
    return tuple(repeats), transcript, incomplete


def run_evaluation(
    test: ExamDataset,
    config: PipelineConfig,
    backend: ModelBackend | Mapping[str, ModelBackend],
    *,
    train: ExamDataset | None = None,
    rule: PassRule | None = None,
    backend_spec: str = "",
    run_meta: Mapping[str, object] | None = None,
    registry: PromptRegistry | None = None,
    out_dir: str | Path | None = None,
) -> EvaluationRun:
    """Run `config.repeats` independent passes over the test questions.

    Questions flagged excluded (e.g. invalidated by later law changes) are
    skipped entirely.
    """
    if not test.questions:
        raise ValueError("test split is empty")
    rule = rule or PassRule()
    registry = registry or default_registry()
    if not isinstance(backend, ModelBackend):
        _resolve_role_backends(backend)  # validates the role set
    snapshot = build_snapshot(
        config, rule, backend_spec=backend_spec, run_meta=run_meta, registry=registry
    )
    repeats, transcript, incomplete = _execute(test, config, backend, train, rule, registry)
    run = EvaluationRun(
        snapshot=snapshot, repeats=repeats, transcript=transcript, incomplete=incomplete
    )
    if out_dir is not None:
        run.save(out_dir)
    return run


def load_run(run_dir: str | Path) -> EvaluationRun:
    """Rehydrate a saved run directory for reporting.

    Attempts come back without their full completion records (the stage
    digests in attempts.jsonl still reference the transcript), which is
    all summarizing needs.
    """
    run_dir = Path(run_dir)
    snapshot = json.loads((run_dir / "config.json").read_text(encoding="utf-8"))
    transcript = Transcript.load(run_dir / "transcript.jsonl")

    attempts_by_run: dict[int, list[AnswerAttempt]] = {}
    results_by_run: dict[int, list[QuestionResult]] = {}
    with (run_dir / "attempts.jsonl").open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            run_index = int(row["run_index"])
            final = answer_from_dict(row["final"])
            attempts_by_run.setdefault(run_index, []).append(
                AnswerAttempt(
                    question_id=row["question_id"],
                    run_index=run_index,
                    initial=answer_from_dict(row["initial"]),
                    final=final,
                    verified=bool(row["verified"]),
                    stage_records=(),
                )
            )
            results_by_run.setdefault(run_index, []).append(
                QuestionResult(
                    question_id=row["question_id"],
                    predicted=final,
                    correct_statements=int(row["correct_statements"]),
                    total_statements=int(row["total_statements"]),
                    points_awarded=int(row["points_awarded"]),
                    exact_match=bool(row["exact_match"]),
                )
            )

    incomplete = False
    repeats: list[RepeatResult] = []
    with (run_dir / "scores.jsonl").open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            run_index = int(row["run_index"])
            incomplete = incomplete or bool(row.get("incomplete", False))
            score = ExamScore(
                per_subject={Subject(k): int(v) for k, v in row["per_subject"].items()},
                total=int(row["total"]),
                passed=bool(row["passed"]),
                subject_floors={Subject(k): int(v) for k, v in row["subject_floors"].items()},
                pass_threshold=int(row["pass_threshold"]),
            )
            repeats.append(
                RepeatResult(
                    run_index=run_index,
                    attempts=tuple(attempts_by_run.get(run_index, ())),
                    results=tuple(results_by_run.get(run_index, ())),
                    score=score,
                )
            )
    repeats.sort(key=lambda r: r.run_index)
    return EvaluationRun(
        snapshot=snapshot,
        repeats=tuple(repeats),
        transcript=transcript,
        incomplete=incomplete,
    )


def replay_run(
    run_dir: str | Path,
    *,
    dataset: ExamDataset | None = None,
    registry: PromptRegistry | None = None,
    out_dir: str | Path | None = None,
) -> EvaluationRun:
    """Re-execute a stored run purely from its transcript.

    The stored config snapshot is attached verbatim, so a replayed run
    carries the original fingerprint and summarizes byte-identically.
    """
    run_dir = Path(run_dir)
    snapshot = json.loads((run_dir / "config.json").read_text(encoding="utf-8"))
    config = PipelineConfig.from_snapshot(snapshot)
    rule = rule_from_record(snapshot["pass_rule"])
    registry = registry or default_registry()

    if dataset is None:
        dataset_path = snapshot.get("dataset_path")
        if not dataset_path:
            raise ValueError("run snapshot has no dataset_path; pass dataset explicitly")
        dataset = load_dataset(dataset_path)
    test_year = snapshot.get("test_year")
    if test_year is not None:
        train, test = split_by_year(dataset, [test_year])
    else:
        train, test = None, dataset

    backend = replay_store(run_dir / "transcript.jsonl")
    repeats, transcript, incomplete = _execute(test, config, backend, train, rule, registry)
    run = EvaluationRun(
        snapshot=snapshot, repeats=repeats, transcript=transcript, incomplete=incomplete
    )
    if out_dir is not None:
        run.save(out_dir)
    return run


def scan_for_leakage(transcript: Transcript, test: ExamDataset) -> tuple[str, ...]:
    """Prove no test question's statement text leaked into another's prompts.

    Statement texts are the distinctive content; preambles are shared
    boilerplate on the real exam and are deliberately not scanned.
    """
    breaches: list[str] = []
    texts = {
        q.id: [s.text for s in q.statements if s.text.strip()] for q in test.questions
    }
    for record in transcript.records:
        prompt_text = "\n".join(m.content for m in record.messages)
        for other_id, statements in texts.items():
            if other_id == record.question_id:
                continue
            for text in statements:
                if text in prompt_text:
                    breaches.append(
                        f"question {other_id} statement text found in a prompt for "
                        f"{record.question_id} (stage {record.stage}, run {record.run_index})"
                    )
                    break
    return tuple(breaches)
