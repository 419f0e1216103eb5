"""Model backends: one completion interface, four implementations.

Every completion is tagged with a request digest (stable hash of messages,
sampling params and backend name) that doubles as the replay key and the
retry idempotency token. Transcripts are JSONL files of completion
records; a replay backend answers purely from such a file and treats a
cache miss as an error, never as a reason to go live.
"""

from __future__ import annotations

import abc
import hashlib
import json
import os
import random
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping

import httpx

from .answer_format import render_answer
from .dataset import ExamDataset
from .errors import BackendError, ReplayMissError
from .prompts import Message, MessageSequence


@dataclass(frozen=True, slots=True)
class SamplingParams:
    """Decoding knobs; the defaults approximate deterministic decoding."""

    temperature: float = 0.0
    max_output_tokens: int = 512
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def to_record(self) -> dict:
        return {
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
            "seed": self.seed,
        }

    @classmethod
    def from_record(cls, data: Mapping) -> "SamplingParams":
        return cls(
            temperature=float(data.get("temperature", 0.0)),
            max_output_tokens=int(data.get("max_output_tokens", 512)),
            seed=data.get("seed"),
        )


@dataclass(frozen=True, slots=True)
class CompletionContext:
    """Where a completion belongs in a run; recorded in the transcript."""

    question_id: str
    stage: str = "answer"
    run_index: int = 0


@dataclass(frozen=True, slots=True)
class CompletionRecord:
    digest: str
    backend: str
    question_id: str
    stage: str
    run_index: int
    messages: MessageSequence
    params: SamplingParams
    response: str
    latency_s: float
    attempt_count: int = 1
    truncated: bool = False

    def to_record(self) -> dict:
        return {
            "digest": self.digest,
            "backend": self.backend,
            "question_id": self.question_id,
            "stage": self.stage,
            "run_index": self.run_index,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "params": self.params.to_record(),
            "response": self.response,
            "latency_s": self.latency_s,
            "attempt_count": self.attempt_count,
            "truncated": self.truncated,
        }

    @classmethod
    def from_record(cls, data: Mapping) -> "CompletionRecord":
        return cls(
            digest=data["digest"],
            backend=data["backend"],
            question_id=data["question_id"],
            stage=data["stage"],
            run_index=int(data["run_index"]),
            messages=tuple(Message(m["role"], m["content"]) for m in data["messages"]),
            params=SamplingParams.from_record(data["params"]),
            response=data["response"],
            latency_s=float(data["latency_s"]),
            attempt_count=int(data.get("attempt_count", 1)),
            truncated=bool(data.get("truncated", False)),
        )


def _canonical(messages: MessageSequence, params: SamplingParams) -> str:
    return json.dumps(
        {
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "params": params.to_record(),
        },
        ensure_ascii=False,
        sort_keys=True,
        separators=(",", ":"),
    )


def request_digest(messages: MessageSequence, params: SamplingParams, backend_name: str) -> str:
    payload = backend_name + "\x00" + _canonical(messages, params)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def content_key(messages: MessageSequence, params: SamplingParams) -> str:
    """Digest without the backend name; replay lookups use this so a stored
    run replays regardless of which backend originally served it."""
    return hashlib.sha256(_canonical(messages, params).encode("utf-8")).hexdigest()


class ModelBackend(abc.ABC):
    """A model that completes a message sequence."""

    name: str = "backend"
    supports_system_role: bool = True

    @abc.abstractmethod
    def complete(
        self,
        messages: MessageSequence,
        params: SamplingParams,
        context: CompletionContext,
    ) -> CompletionRecord:
        """Return the raw completion, verbatim; parsing owns normalization."""

    def _record(
        self,
        messages: MessageSequence,
        params: SamplingParams,
        context: CompletionContext,
        response: str,
        latency_s: float,
        attempt_count: int = 1,
        truncated: bool = False,
    ) -> CompletionRecord:
        if not messages:
            raise BackendError("cannot complete an empty message sequence")
        return CompletionRecord(
            digest=request_digest(messages, params, self.name),
            backend=self.name,
            question_id=context.question_id,
            stage=context.stage,
            run_index=context.run_index,
            messages=tuple(messages),
            params=params,
            response=response,
            latency_s=latency_s,
            attempt_count=attempt_count,
            truncated=truncated,
        )


class OracleBackend(ModelBackend):
    """Answers every prompt with the gold key of the question it belongs to."""

    name = "oracle"

    def __init__(self, dataset: ExamDataset):
        self._dataset = dataset

    def complete(self, messages, params, context) -> CompletionRecord:
        try:
            question = self._dataset.by_id(context.question_id)
        except KeyError as exc:
            raise BackendError(f"oracle has no question {context.question_id!r}") from exc
        return self._record(
            messages, params, context, render_answer(question.key.answer), latency_s=0.0
        )


class ScriptedBackend(ModelBackend):
    """Deterministic canned responses for tests and forced scenarios.

    Keys are looked up most-specific first: (question_id, stage), then
    question_id, then the default response.
    """

    name = "scripted"

    def __init__(
        self,
        responses: Mapping[str | tuple[str, str], str] | None = None,
        default: str | None = None,
        respond: Callable[[CompletionContext, MessageSequence], str | None] | None = None,
    ):
        self._responses = dict(responses or {})
        self._default = default
        self._respond = respond

    def complete(self, messages, params, context) -> CompletionRecord:
        response: str | None = None
        if self._respond is not None:
            response = self._respond(context, messages)
        if response is None:
            response = self._responses.get((context.question_id, context.stage))
        if response is None:
            response = self._responses.get(context.question_id)
        if response is None:
            response = self._default
        if response is None:
            raise BackendError(
                f"scripted backend has no response for {context.question_id!r} "
                f"stage {context.stage!r}"
            )
        return self._record(messages, params, context, response, latency_s=0.0)


class ReplayBackend(ModelBackend):
    """Replays a stored transcript; a miss is an error, never a live call."""

    name = "replay"

    def __init__(self, records: Iterable[CompletionRecord], source: str = ""):
        self._by_key: dict[str, list[CompletionRecord]] = {}
        self.source = source
        for record in records:
            self._by_key.setdefault(
                content_key(record.messages, record.params), []
            ).append(record)

    def __len__(self) -> int:
        return sum(len(v) for v in self._by_key.values())

    def complete(self, messages, params, context) -> CompletionRecord:
        key = content_key(messages, params)
        stored = self._by_key.get(key)
        if not stored:
            raise ReplayMissError(
                f"no stored completion for question {context.question_id!r} "
                f"stage {context.stage!r} (run {context.run_index}) in {self.source or 'transcript'}"
            )
        match = next((r for r in stored if r.run_index == context.run_index), stored[0])
        return replace(
            match,
            question_id=context.question_id,
            stage=context.stage,
            run_index=context.run_index,
        )


@dataclass(frozen=True, slots=True)
class RetryPolicy:
    max_attempts: int = 3
    base_delay_s: float = 0.5
    max_delay_s: float = 8.0


@dataclass(frozen=True, slots=True)
class HttpBackendConfig:
    """Connection settings for a generic chat-completion endpoint.

    The auth token is read from the named environment variable at call
    time; it is never persisted to run artifacts.
    """

    endpoint: str
    model: str
    api_key_env: str = "TANTO_EVAL_API_KEY"
    timeout_s: float = 120.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)


class HttpChatBackend(ModelBackend):
    """Remote chat-completion backend with bounded, jittered retries."""

    def __init__(
        self,
        config: HttpBackendConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        jitter: random.Random | None = None,
    ):
        self.name = f"http:{config.model}"
        self._config = config
        self._client = httpx.Client(
            base_url=config.endpoint, timeout=config.timeout_s, transport=transport
        )
        self._sleep = sleep
        self._jitter = jitter or random.Random()

    def _headers(self) -> dict[str, str]:
        token = os.environ.get(self._config.api_key_env, "")
        headers = {"Content-Type": "application/json"}
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, messages, params, context) -> CompletionRecord:
        if not messages:
            raise BackendError("cannot complete an empty message sequence")
        payload = {
            "model": self._config.model,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": params.temperature,
            "max_tokens": params.max_output_tokens,
        }
        if params.seed is not None:
            payload["seed"] = params.seed

        retry = self._config.retry
        started = time.perf_counter()
        last_error: Exception | None = None
        for attempt in range(1, retry.max_attempts + 1):
            try:
                response = self._client.post(
                    "/chat/completions", json=payload, headers=self._headers()
                )
            except httpx.HTTPError as exc:
                last_error = exc
            else:
                if response.status_code == 200:
                    body = response.json()
                    choice = body["choices"][0]
                    return self._record(
                        messages,
                        params,
                        context,
                        choice["message"]["content"],
                        latency_s=time.perf_counter() - started,
                        attempt_count=attempt,
                        truncated=choice.get("finish_reason") == "length",
                    )
                if response.status_code not in (429, 500, 502, 503, 504):
                    raise BackendError(
                        f"{self.name}: HTTP {response.status_code}: {response.text[:200]}"
                    )
                last_error = BackendError(f"{self.name}: HTTP {response.status_code}")
            if attempt < retry.max_attempts:
                delay = min(retry.base_delay_s * 2 ** (attempt - 1), retry.max_delay_s)
                self._sleep(delay * (0.5 + self._jitter.random()))
        raise BackendError(
            f"{self.name}: gave up after {retry.max_attempts} attempts: {last_error}"
        )

    def close(self) -> None:
        self._client.close()


class Transcript:
    """Append-only completion log, persisted as JSONL. Appends are locked so
    concurrently processed questions can share one sink."""

    def __init__(self, records: Iterable[CompletionRecord] = ()):
        self._records: list[CompletionRecord] = list(records)
        self._lock = threading.Lock()

    def append(self, record: CompletionRecord) -> None:
        with self._lock:
            self._records.append(record)

    @property
    def records(self) -> tuple[CompletionRecord, ...]:
        return tuple(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def save(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            for record in self._records:
                fh.write(json.dumps(record.to_record(), ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Transcript":
        path = Path(path)
        records = []
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(CompletionRecord.from_record(json.loads(line)))
        return cls(records)


def replay_store(transcript_path: str | Path) -> ReplayBackend:
    """Build a replay backend from a stored transcript file."""
    transcript = Transcript.load(transcript_path)
    return ReplayBackend(transcript.records, source=str(transcript_path))
