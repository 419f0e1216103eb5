"""Prompt template registry and message-sequence builders.

Templates live as data assets next to this module (one ``.prompt`` file
each, with a small header declaring id, role, language and placeholders)
so prompt variants can be swapped without code changes. Every run records
the template hashes it was built with.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence

import yaml

from ..answer_format import ParsedAnswer, render_answer
from ..dataset import AnswerKey, Question
from ..errors import TemplateError

_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")

AGENT_ROLES = ("retriever", "verifier", "extractor", "reasoner")


@dataclass(frozen=True, slots=True)
class Message:
    role: str  # "system" | "user"
    content: str


MessageSequence = tuple[Message, ...]


@dataclass(frozen=True, slots=True)
class PromptTemplate:
    id: str
    role: str
    language: str
    placeholders: tuple[str, ...]
    body: str

    def __post_init__(self) -> None:
        undeclared = set(_PLACEHOLDER_RE.findall(self.body)) - set(self.placeholders)
        if undeclared:
            raise TemplateError(
                f"template {self.id}: undeclared placeholders {sorted(undeclared)}"
            )

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.body.encode("utf-8")).hexdigest()

    def render(self, bindings: Mapping[str, str] | None = None) -> str:
        bindings = dict(bindings or {})
        missing = set(self.placeholders) - set(bindings)
        if missing:
            raise TemplateError(f"template {self.id}: missing bindings {sorted(missing)}")

        def substitute(match: re.Match) -> str:
            return bindings[match.group(1)]

        rendered = _PLACEHOLDER_RE.sub(substitute, self.body)
        leftover = _PLACEHOLDER_RE.findall(rendered)
        if leftover:
            raise TemplateError(
                f"template {self.id}: unresolved placeholders {sorted(set(leftover))}"
            )
        return rendered


def _parse_asset(text: str, name: str) -> PromptTemplate:
    if not text.startswith("---\n"):
        raise TemplateError(f"asset {name}: missing header block")
    try:
        header_text, body = text[4:].split("\n---\n", 1)
    except ValueError as exc:
        raise TemplateError(f"asset {name}: unterminated header block") from exc
    header = yaml.safe_load(header_text)
    if body.endswith("\n"):
        body = body[:-1]
    return PromptTemplate(
        id=str(header["id"]),
        role=str(header["role"]),
        language=str(header["language"]),
        placeholders=tuple(header.get("placeholders") or ()),
        body=body,
    )


class PromptRegistry:
    """Immutable set of templates loaded from an asset directory."""

    def __init__(self, templates: Sequence[PromptTemplate]):
        self._templates = {t.id: t for t in templates}

    @classmethod
    def load_default(cls) -> "PromptRegistry":
        templates = []
        asset_dir = resources.files(__package__) / "assets"
        for entry in sorted(asset_dir.iterdir(), key=lambda e: e.name):
            if entry.name.endswith(".prompt"):
                templates.append(_parse_asset(entry.read_text(encoding="utf-8"), entry.name))
        return cls(templates)

    def get(self, template_id: str) -> PromptTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise TemplateError(f"unknown template id: {template_id}") from None

    def ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._templates))

    def hashes(self) -> dict[str, str]:
        return {tid: self._templates[tid].sha256 for tid in self.ids()}


_default_registry: PromptRegistry | None = None


def default_registry() -> PromptRegistry:
    global _default_registry
    if _default_registry is None:
        _default_registry = PromptRegistry.load_default()
    return _default_registry


@dataclass(frozen=True, slots=True)
class PromptConfig:
    """Knobs for prompt assembly that the source material leaves open."""

    demos_in_system: bool = False
    include_system_role: bool = True


def render_question_text(q: Question) -> str:
    """The question exactly as shown to the model: preamble, statements, options."""
    lines = [q.preamble] if q.preamble else []
    for statement in q.statements:
        lines.append(f"{statement.label}．{statement.text}")
    if q.options:
        for i, option in enumerate(q.options, start=1):
            lines.append(f"{i}. {option}")
    text = "\n".join(lines)
    if not text.strip():
        raise TemplateError(f"question {q.id} renders to empty text")
    return text


def _demonstration_block(
    demos: Sequence[tuple[Question, AnswerKey]], registry: PromptRegistry
) -> str:
    template = registry.get("demonstration")
    rendered = [
        template.render(
            {"question": render_question_text(q), "answer": key.as_string}
        )
        for q, key in demos
    ]
    return "\n\n".join(rendered)


def _with_system(
    user_text: str, registry: PromptRegistry, config: PromptConfig
) -> MessageSequence:
    messages: list[Message] = []
    if config.include_system_role:
        messages.append(Message("system", registry.get("system_role").body))
    messages.append(Message("user", user_text))
    return tuple(messages)


def build_answer_prompt(
    q: Question,
    demos: Sequence[tuple[Question, AnswerKey]] = (),
    config: PromptConfig = PromptConfig(),
    registry: PromptRegistry | None = None,
) -> MessageSequence:
    """Zero-shot or few-shot answering prompt, statements verbatim."""
    registry = registry or default_registry()
    demo_block = _demonstration_block(demos, registry) if demos else ""
    user = registry.get("answer_user").render(
        {
            "instructions": registry.get("answer_format").body,
            "demonstrations": demo_block + "\n\n" if demo_block and not config.demos_in_system else "",
            "question": render_question_text(q),
        }
    )
    messages = list(_with_system(user, registry, config))
    if demo_block and config.demos_in_system:
        messages.insert(1 if config.include_system_role else 0, Message("system", demo_block))
    return tuple(messages)


def build_verification_prompt(
    q: Question,
    initial: ParsedAnswer,
    config: PromptConfig = PromptConfig(),
    registry: PromptRegistry | None = None,
) -> MessageSequence:
    """Second-pass prompt pairing the question with the model's own answer."""
    return build_verification_prompt_raw(q, render_answer(initial), config, registry)


def build_verification_prompt_raw(
    q: Question,
    answer_text: str,
    config: PromptConfig = PromptConfig(),
    registry: PromptRegistry | None = None,
) -> MessageSequence:
    registry = registry or default_registry()
    user = registry.get("verification_user").render(
        {
            "instructions": registry.get("verification").body,
            "question": render_question_text(q),
            "answer": answer_text,
        }
    )
    return _with_system(user, registry, config)


def render_candidates(numbered: Sequence[tuple[int, Question, AnswerKey]]) -> str:
    """Candidate pool entries as numbered question/answer blocks."""
    blocks = []
    for number, q, key in numbered:
        blocks.append(f"{number}. 問題:\n{render_question_text(q)}\n解答: {key.as_string}")
    return "\n\n".join(blocks)


def build_agent_prompt(
    role: str,
    bindings: Mapping[str, object],
    config: PromptConfig = PromptConfig(),
    registry: PromptRegistry | None = None,
) -> MessageSequence:
    """Role-specific prompt for one multi-agent stage.

    Required bindings per role:
      retriever  question: Question, candidates: [(number, Question, AnswerKey)]
      verifier   question: Question, candidates: [(number, Question, AnswerKey)]
      extractor  question: Question, answer: AnswerKey
      reasoner   question: Question, knowledge: str
    """
    registry = registry or default_registry()
    if role not in AGENT_ROLES:
        raise TemplateError(f"unknown agent role: {role!r}")

    def need(name: str):
        if name not in bindings:
            raise TemplateError(f"agent role {role}: missing binding {name!r}")
        return bindings[name]

    instructions = registry.get(f"agent_{role}").body
    if role in ("retriever", "verifier"):
        candidates = list(need("candidates"))
        if role == "retriever" and not candidates:
            raise TemplateError("retriever needs a non-empty candidate pool")
        user = registry.get(f"{role}_user").render(
            {
                "instructions": instructions,
                "question": render_question_text(need("question")),
                "candidates": render_candidates(candidates),
            }
        )
    elif role == "extractor":
        user = registry.get("extractor_user").render(
            {
                "instructions": instructions,
                "question": render_question_text(need("question")),
                "answer": need("answer").as_string,
            }
        )
    else:
        user = registry.get("reasoner_user").render(
            {
                "instructions": instructions,
                "knowledge": str(need("knowledge")),
                "format_instructions": registry.get("answer_format").body,
                "question": render_question_text(need("question")),
            }
        )
    return _with_system(user, registry, config)
