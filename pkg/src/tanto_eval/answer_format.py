"""Strict answer grammar: shapes, parsing and canonical rendering.

An answer is accepted only if, after trimming surrounding whitespace and
normalizing full-width digits, it is exactly one token matching the
question's declared shape. Everything else is a FormatViolation, which
scores zero; the parser never guesses. A separate lenient mode exists
for post-hoc analysis of sloppy transcripts and is clearly not the
grading behavior.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

_FULLWIDTH_DIGITS = str.maketrans("０１２３４５６７８９", "0123456789")

_DIGITS_RE = re.compile(r"^[0-9]+$")
_OPTION_RE = re.compile(r"^[1-9][0-9]*$")
_DIGIT_RUN_RE = re.compile(r"[0-9]+")


@dataclass(frozen=True, slots=True)
class SingleChoice:
    """Answer is one option index in 1..option_count."""

    option_count: int

    def __post_init__(self) -> None:
        if self.option_count < 2:
            raise ValueError(f"option_count must be >= 2, got {self.option_count}")


@dataclass(frozen=True, slots=True)
class DigitSequence:
    """Answer is a digit string, one digit per statement, over a small alphabet."""

    length: int
    alphabet: frozenset[int] = frozenset({1, 2})

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError(f"length must be >= 1, got {self.length}")
        if not self.alphabet:
            raise ValueError("alphabet must be non-empty")
        if not all(1 <= d <= 9 for d in self.alphabet):
            raise ValueError(f"alphabet digits must be in 1..9, got {sorted(self.alphabet)}")
        object.__setattr__(self, "alphabet", frozenset(self.alphabet))


AnswerShape = SingleChoice | DigitSequence


def shape_to_dict(shape: AnswerShape) -> dict:
    if isinstance(shape, SingleChoice):
        return {"kind": "single_choice", "option_count": shape.option_count}
    return {
        "kind": "digit_sequence",
        "length": shape.length,
        "alphabet": sorted(shape.alphabet),
    }


def shape_from_dict(data: dict) -> AnswerShape:
    kind = data.get("kind")
    if kind == "single_choice":
        return SingleChoice(option_count=int(data["option_count"]))
    if kind == "digit_sequence":
        alphabet = data.get("alphabet")
        if alphabet is None:
            return DigitSequence(length=int(data["length"]))
        return DigitSequence(
            length=int(data["length"]), alphabet=frozenset(int(d) for d in alphabet)
        )
    raise ValueError(f"unknown answer shape kind: {kind!r}")


@dataclass(frozen=True, slots=True)
class OptionIndex:
    """A parsed single-choice answer."""

    value: int


@dataclass(frozen=True, slots=True)
class DigitString:
    """A parsed per-statement judgment sequence."""

    digits: tuple[int, ...]


ParsedAnswer = OptionIndex | DigitString


class ViolationReason(str, Enum):
    NON_NUMERIC = "non-numeric content"
    WRONG_LENGTH = "wrong length"
    OUT_OF_ALPHABET = "digit outside alphabet"
    MULTIPLE_CANDIDATES = "multiple candidates"
    EMPTY = "empty output"


@dataclass(frozen=True, slots=True)
class FormatViolation:
    """A rejected raw output, kept verbatim for transcripts."""

    reason: ViolationReason
    raw: str


def normalize_digits(text: str) -> str:
    """Map full-width digits to ASCII. Character normalization only."""
    return text.translate(_FULLWIDTH_DIGITS)


def parse_answer(
    raw: str, shape: AnswerShape, *, lenient: bool = False
) -> ParsedAnswer | FormatViolation:
    """Parse raw model output against a shape; violations are values, not errors."""
    normalized = normalize_digits(raw).strip()
    if not normalized:
        return FormatViolation(ViolationReason.EMPTY, raw)

    tokens = normalized.split()
    if len(tokens) > 1:
        if all(_DIGITS_RE.match(t) for t in tokens):
            violation = FormatViolation(ViolationReason.MULTIPLE_CANDIDATES, raw)
        else:
            violation = FormatViolation(ViolationReason.NON_NUMERIC, raw)
        return _relax(raw, shape, violation) if lenient else violation

    parsed = _parse_token(tokens[0], shape, raw)
    if isinstance(parsed, FormatViolation) and lenient:
        return _relax(raw, shape, parsed)
    return parsed


def _parse_token(token: str, shape: AnswerShape, raw: str) -> ParsedAnswer | FormatViolation:
    if isinstance(shape, SingleChoice):
        if not _OPTION_RE.match(token):
            return FormatViolation(ViolationReason.NON_NUMERIC, raw)
        value = int(token)
        if not 1 <= value <= shape.option_count:
            return FormatViolation(ViolationReason.OUT_OF_ALPHABET, raw)
        return OptionIndex(value)

    if not _DIGITS_RE.match(token):
        return FormatViolation(ViolationReason.NON_NUMERIC, raw)
    if len(token) != shape.length:
        return FormatViolation(ViolationReason.WRONG_LENGTH, raw)
    digits = tuple(int(c) for c in token)
    if any(d not in shape.alphabet for d in digits):
        return FormatViolation(ViolationReason.OUT_OF_ALPHABET, raw)
    return DigitString(digits)


def _relax(raw: str, shape: AnswerShape, strict_result: FormatViolation) -> ParsedAnswer | FormatViolation:
    """Lenient fallback: accept iff exactly one embedded token matches the shape."""
    candidates: list[ParsedAnswer] = []
    seen: set[str] = set()
    for run in _DIGIT_RUN_RE.findall(normalize_digits(raw)):
        parsed = _parse_token(run, shape, raw)
        if not isinstance(parsed, FormatViolation) and run not in seen:
            seen.add(run)
            candidates.append(parsed)
    if len(candidates) == 1:
        return candidates[0]
    if len(candidates) > 1:
        return FormatViolation(ViolationReason.MULTIPLE_CANDIDATES, raw)
    return strict_result


def render_answer(answer: ParsedAnswer) -> str:
    """Canonical string form; parse_answer(render_answer(a), shape) == a."""
    if isinstance(answer, OptionIndex):
        return str(answer.value)
    return "".join(str(d) for d in answer.digits)


def conforms(answer: ParsedAnswer, shape: AnswerShape) -> bool:
    """True when a parsed answer is valid for the given shape."""
    if isinstance(answer, OptionIndex):
        return isinstance(shape, SingleChoice) and 1 <= answer.value <= shape.option_count
    return (
        isinstance(shape, DigitSequence)
        and len(answer.digits) == shape.length
        and all(d in shape.alphabet for d in answer.digits)
    )


def answer_to_dict(value: ParsedAnswer | FormatViolation) -> dict:
    """Wire/JSONL encoding for answers and violations."""
    if isinstance(value, OptionIndex):
        return {"kind": "option", "value": value.value}
    if isinstance(value, DigitString):
        return {"kind": "digits", "value": render_answer(value)}
    return {"kind": "violation", "reason": value.reason.value, "raw": value.raw}


def answer_from_dict(data: dict) -> ParsedAnswer | FormatViolation:
    kind = data.get("kind")
    if kind == "option":
        return OptionIndex(int(data["value"]))
    if kind == "digits":
        return DigitString(tuple(int(c) for c in str(data["value"])))
    if kind == "violation":
        return FormatViolation(ViolationReason(data["reason"]), data.get("raw", ""))
    raise ValueError(f"unknown answer kind: {kind!r}")
