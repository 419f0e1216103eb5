"""FastAPI service wrapping the core toolkit.

The CLI is a thin client of these endpoints; anything it can do, any
other HTTP client can do too. File paths in requests are resolved on the
service host (the CLI's default mode runs the app in-process, so paths
are local either way).
"""

from __future__ import annotations

import json
import os
from fractions import Fraction
from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..answer_format import parse_answer
from ..backend import (
    HttpBackendConfig,
    HttpChatBackend,
    ModelBackend,
    OracleBackend,
    SamplingParams,
    ScriptedBackend,
    replay_store,
)
from ..dataset import ExamDataset, load_dataset, parse_year_tag, split_by_year, validate_exam_year
from ..errors import BackendError, DatasetFormatError, LeakageError, TantoError, TemplateError, UnknownQuestionError
from ..pipeline import PipelineConfig, load_run, replay_run, rule_from_record, run_evaluation
from ..prompts import AGENT_ROLES
from ..report import load_summary, render, save_summary, summarize
from ..scoring import PassRule, exact_match_accuracy, load_answers_file, score_raw_answers
from .schemas import (
    ExamScoreModel,
    HealthResponse,
    ParseRequest,
    ParseResponse,
    PassRuleModel,
    QuestionResultModel,
    ReplayRequest,
    ReplayResponse,
    ReportRequest,
    ReportResponse,
    RunRequest,
    RunResponse,
    ScoreExamRequest,
    ScoreExamResponse,
    SummaryModel,
    ValidateRequest,
    ValidateResponse,
)

ENDPOINT_ENV = "TANTO_EVAL_ENDPOINT"
MODEL_ENV = "TANTO_EVAL_MODEL"
API_KEY_ENV = "TANTO_EVAL_API_KEY"


def _usage(message: str, status: int = 400) -> HTTPException:
    return HTTPException(status_code=status, detail={"kind": "usage", "message": message})


def _failure(message: str) -> HTTPException:
    return HTTPException(status_code=502, detail={"kind": "failure", "message": message})


def _load_dataset_or_400(path: str) -> ExamDataset:
    if not Path(path).is_file():
        raise _usage(f"dataset file not found: {path}", status=404)
    try:
        return load_dataset(path)
    except DatasetFormatError as exc:
        raise _usage(f"invalid dataset: {exc}") from exc


def _rule_from_model(model: PassRuleModel) -> PassRule:
    return PassRule(
        pass_threshold=model.pass_threshold,
        floor_fraction=Fraction(model.floor_fraction),
    )


def backend_from_spec(spec: str, request: RunRequest, test: ExamDataset) -> ModelBackend:
    """Build a backend from its CLI-style spec string.

    Supported: ``oracle``, ``replay:<transcript>``, ``scripted:<json file>``
    and ``http`` (endpoint/model from the request or environment; the auth
    token only ever comes from the environment).
    """
    if spec == "oracle":
        return OracleBackend(test)
    if spec.startswith("replay:"):
        path = spec.split(":", 1)[1]
        if not Path(path).is_file():
            raise _usage(f"transcript not found: {path}", status=404)
        return replay_store(path)
    if spec.startswith("scripted:"):
        path = spec.split(":", 1)[1]
        if not Path(path).is_file():
            raise _usage(f"scripted responses file not found: {path}", status=404)
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        responses: dict = {}
        default = None
        for key, value in raw.items():
            if key == "@default":
                default = value
            elif "@" in key:
                qid, stage = key.rsplit("@", 1)
                responses[(qid, stage)] = value
            else:
                responses[key] = value
        return ScriptedBackend(responses=responses, default=default)
    if spec == "http":
        endpoint = request.http_endpoint or os.environ.get(ENDPOINT_ENV, "")
        model = request.http_model or os.environ.get(MODEL_ENV, "")
        if not endpoint or not model:
            raise _usage(
                f"http backend needs an endpoint and model "
                f"(flags or {ENDPOINT_ENV}/{MODEL_ENV})"
            )
        return HttpChatBackend(HttpBackendConfig(endpoint=endpoint, model=model, api_key_env=API_KEY_ENV))
    raise _usage(f"unknown backend spec: {spec!r}")


def _summary_model(summary) -> SummaryModel:
    return SummaryModel(**summary.to_record())


def create_app() -> FastAPI:
    app = FastAPI(title="tanto-eval", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/answer/parse", response_model=ParseResponse)
    def parse(request: ParseRequest) -> ParseResponse:
        try:
            shape = request.shape.to_shape()
        except ValueError as exc:
            raise _usage(str(exc)) from exc
        return ParseResponse.from_result(
            request.raw, parse_answer(request.raw, shape, lenient=request.lenient)
        )

    @app.post("/dataset/validate", response_model=ValidateResponse)
    def validate(request: ValidateRequest) -> ValidateResponse:
        dataset = _load_dataset_or_400(request.dataset_path)
        try:
            report = validate_exam_year(dataset, request.year)
        except ValueError as exc:
            raise _usage(str(exc)) from exc
        record = report.to_record()
        return ValidateResponse(text=report.to_text(), **record)

    @app.post("/score/exam", response_model=ScoreExamResponse)
    def score(request: ScoreExamRequest) -> ScoreExamResponse:
        dataset = _load_dataset_or_400(request.dataset_path)
        if request.year is not None:
            try:
                year = parse_year_tag(request.year)
            except ValueError as exc:
                raise _usage(str(exc)) from exc
            dataset = ExamDataset(
                questions=tuple(q for q in dataset.questions if q.year == year),
                metadata=dataset.metadata,
            )
        excluded_ids = {q.id for q in dataset.questions if q.excluded}
        dataset = ExamDataset(
            questions=tuple(q for q in dataset.questions if not q.excluded),
            metadata=dataset.metadata,
        )
        if not dataset.questions:
            raise _usage("no questions to score (wrong --year?)")
        if not Path(request.answers_path).is_file():
            raise _usage(f"answers file not found: {request.answers_path}", status=404)
        try:
            answers = load_answers_file(request.answers_path)
            answers = {k: v for k, v in answers.items() if k not in excluded_ids}
            exam_score, results = score_raw_answers(
                dataset, answers, _rule_from_model(request.rule), lenient=request.lenient
            )
        except (DatasetFormatError, UnknownQuestionError, ValueError) as exc:
            raise _usage(str(exc)) from exc
        missing = sorted(q.id for q in dataset.questions if q.id not in answers)
        return ScoreExamResponse(
            score=ExamScoreModel.from_score(exam_score),
            results=[QuestionResultModel.from_result(r) for r in results],
            accuracy=exact_match_accuracy(results),
            missing=missing,
        )

    @app.post("/run", response_model=RunResponse)
    def run(request: RunRequest) -> RunResponse:
        dataset = _load_dataset_or_400(request.dataset_path)
        try:
            train, test = split_by_year(dataset, [request.test_year])
        except ValueError as exc:
            raise _usage(str(exc)) from exc
        if not test.questions:
            raise _usage(f"no questions for test year {request.test_year}")

        try:
            config = PipelineConfig(
                strategy=request.strategy,
                few_shot_k=request.few_shot_k,
                few_shot_seed=request.few_shot_seed,
                inner=request.inner,
                agent_mode=request.agent_mode,
                candidate_batch_size=request.candidate_batch_size,
                repeats=request.repeats,
                run_seed=request.run_seed,
                parallelism=request.parallelism,
                lenient=request.lenient,
                params=SamplingParams(
                    temperature=request.temperature,
                    max_output_tokens=request.max_output_tokens,
                    seed=request.sample_seed,
                ),
            )
        except ValueError as exc:
            raise _usage(str(exc)) from exc

        uses_agents = request.strategy == "multi_agent" or (
            request.strategy == "self_verify" and request.inner == "multi_agent"
        )
        if uses_agents and request.agent_mode == "separate":
            specs = request.agent_backends or {}
            if set(specs) != set(AGENT_ROLES):
                raise _usage(
                    f"separate agent mode needs backend specs for exactly {sorted(AGENT_ROLES)}"
                )
            backend = {role: backend_from_spec(spec, request, test) for role, spec in specs.items()}
            backend_spec = ";".join(f"{role}={specs[role]}" for role in sorted(specs))
        else:
            backend = backend_from_spec(request.backend, request, test)
            backend_spec = request.backend

        rule = _rule_from_model(request.rule)
        try:
            evaluation = run_evaluation(
                test,
                config,
                backend,
                train=train,
                rule=rule,
                backend_spec=backend_spec,
                run_meta={
                    "dataset_path": str(Path(request.dataset_path).resolve()),
                    "test_year": request.test_year,
                },
                out_dir=request.out_dir,
            )
        except (LeakageError, BackendError) as exc:
            raise _failure(str(exc)) from exc
        except (ValueError, TemplateError) as exc:
            raise _usage(str(exc)) from exc

        summary = summarize(evaluation, rule)
        if request.out_dir is not None:
            save_summary(summary, request.out_dir)
        return RunResponse(
            fingerprint=evaluation.fingerprint,
            out_dir=request.out_dir,
            incomplete=evaluation.incomplete,
            scores=[ExamScoreModel.from_score(r.score) for r in evaluation.repeats],
            summary=_summary_model(summary),
            rendered=render(summary, "text"),
        )

    @app.post("/replay", response_model=ReplayResponse)
    def replay(request: ReplayRequest) -> ReplayResponse:
        run_dir = Path(request.run_dir)
        if not (run_dir / "config.json").is_file():
            raise _usage(f"not a run directory: {request.run_dir}", status=404)
        try:
            evaluation = replay_run(run_dir, out_dir=request.out_dir)
        except TantoError as exc:
            raise _failure(str(exc)) from exc
        rule = rule_from_record(evaluation.snapshot["pass_rule"])
        summary = summarize(evaluation, rule)
        rendered_json = render(summary, "json")
        if request.out_dir is not None:
            save_summary(summary, request.out_dir)
        matches = False
        original = run_dir / "summary.json"
        if original.is_file():
            matches = original.read_text(encoding="utf-8") == rendered_json
        return ReplayResponse(
            summary=_summary_model(summary),
            rendered=render(summary, "text"),
            matches_original=matches,
        )

    @app.post("/report", response_model=ReportResponse)
    def report(request: ReportRequest) -> ReportResponse:
        summaries = []
        for run_dir in request.run_dirs:
            path = Path(run_dir)
            if not (path / "config.json").is_file():
                raise _usage(f"not a run directory: {run_dir}", status=404)
            if (path / "summary.json").is_file():
                summaries.append(load_summary(path))
            else:
                loaded = load_run(path)
                summaries.append(summarize(loaded, rule_from_record(loaded.snapshot["pass_rule"])))
        return ReportResponse(document=render(summaries, request.format))

    return app


app = create_app()
