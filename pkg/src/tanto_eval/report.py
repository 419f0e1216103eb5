"""Run summaries and their text / markdown / machine-readable renderings.

Presentation rounding follows the exam reporting convention: point
averages to one decimal place, accuracy to four, both half-up. The
machine-readable form keeps full precision and round-trips.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Sequence

from .dataset import Subject
from .pipeline import EvaluationRun
from .scoring import PassRule

ACCURACY_MODES = ("pooled", "per_repeat_mean")


def round_half_up(value: float, places: int) -> float:
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(str(value)).quantize(quantum, rounding=ROUND_HALF_UP))


@dataclass(frozen=True, slots=True)
class EvaluationSummary:
    """The reported metrics for one evaluation run."""

    label: str
    accuracy: float
    exam_avg: float
    exam_min: int
    exam_max: int
    per_subject_avg: dict[Subject, float]
    pass_per_repeat: tuple[bool, ...]
    repeats: int
    questions: int
    fingerprint: str
    incomplete: bool = False

    def __post_init__(self) -> None:
        if not self.exam_min <= self.exam_avg <= self.exam_max:
            raise ValueError(
                f"exam scale stats out of order: {self.exam_avg} not within "
                f"[{self.exam_min}, {self.exam_max}]"
            )

    def to_record(self) -> dict:
        return {
            "label": self.label,
            "accuracy": self.accuracy,
            "exam_scale": {"avg": self.exam_avg, "min": self.exam_min, "max": self.exam_max},
            "per_subject_avg": {s.value: v for s, v in self.per_subject_avg.items()},
            "pass_per_repeat": list(self.pass_per_repeat),
            "repeats": self.repeats,
            "questions": self.questions,
            "fingerprint": self.fingerprint,
            "incomplete": self.incomplete,
        }

    @classmethod
    def from_record(cls, data: dict) -> "EvaluationSummary":
        scale = data["exam_scale"]
        return cls(
            label=data["label"],
            accuracy=float(data["accuracy"]),
            exam_avg=float(scale["avg"]),
            exam_min=int(scale["min"]),
            exam_max=int(scale["max"]),
            per_subject_avg={
                Subject(k): float(v) for k, v in data["per_subject_avg"].items()
            },
            pass_per_repeat=tuple(bool(p) for p in data["pass_per_repeat"]),
            repeats=int(data["repeats"]),
            questions=int(data["questions"]),
            fingerprint=data["fingerprint"],
            incomplete=bool(data.get("incomplete", False)),
        )


def summarize(
    run: EvaluationRun,
    rule: PassRule | None = None,
    *,
    label: str | None = None,
    accuracy_mode: str = "pooled",
) -> EvaluationSummary:
    """Compute the summary metrics from a completed run.

    Accuracy pools exact matches over all question-attempts by default;
    with equal question counts per repeat this equals the mean of
    per-repeat accuracies, selectable via accuracy_mode for transparency.
    Pass flags are taken from the per-repeat scores as computed during the
    run; nothing is re-derived here.
    """
    if accuracy_mode not in ACCURACY_MODES:
        raise ValueError(f"accuracy_mode must be one of {ACCURACY_MODES}")
    if not run.repeats:
        raise ValueError("run has no completed repeats")

    totals = [repeat.score.total for repeat in run.repeats]
    if accuracy_mode == "pooled":
        exact = sum(r.exact_match for repeat in run.repeats for r in repeat.results)
        count = sum(len(repeat.results) for repeat in run.repeats)
        accuracy = exact / count
    else:
        per_repeat = [
            sum(r.exact_match for r in repeat.results) / len(repeat.results)
            for repeat in run.repeats
        ]
        accuracy = sum(per_repeat) / len(per_repeat)

    per_subject_avg = {
        s: sum(repeat.score.per_subject[s] for repeat in run.repeats) / len(run.repeats)
        for s in Subject
    }
    backend = run.snapshot.get("backend") or "unknown"
    strategy = run.snapshot.get("strategy", "unknown")
    if strategy == "self_verify":
        strategy = f"self_verify[{run.snapshot.get('inner', 'zero_shot')}]"
    elif strategy == "multi_agent":
        strategy = f"multi_agent[{run.snapshot.get('agent_mode', 'shared')}]"
    return EvaluationSummary(
        label=label or f"{strategy}/{backend}",
        accuracy=accuracy,
        exam_avg=sum(totals) / len(totals),
        exam_min=min(totals),
        exam_max=max(totals),
        per_subject_avg=per_subject_avg,
        pass_per_repeat=tuple(repeat.score.passed for repeat in run.repeats),
        repeats=len(run.repeats),
        questions=len(run.repeats[0].results),
        fingerprint=run.fingerprint,
        incomplete=run.incomplete,
    )


_COLUMNS = ("Model", "Accuracy", "Exam Scale (Avg/Min/Max)", "Const.", "Civ.", "Crim.")


def _row(summary: EvaluationSummary) -> tuple[str, ...]:
    scale = (
        f"{round_half_up(summary.exam_avg, 1):.1f} / {summary.exam_min} / {summary.exam_max}"
    )
    return (
        summary.label,
        f"{round_half_up(summary.accuracy, 4):.4f}",
        scale,
        f"{round_half_up(summary.per_subject_avg[Subject.CONSTITUTIONAL], 1):.1f}",
        f"{round_half_up(summary.per_subject_avg[Subject.CIVIL], 1):.1f}",
        f"{round_half_up(summary.per_subject_avg[Subject.CRIMINAL], 1):.1f}",
    )


def render(
    summaries: EvaluationSummary | Sequence[EvaluationSummary],
    fmt: str = "text",
) -> str:
    """Render one or more summaries; multiple summaries become comparison rows."""
    if isinstance(summaries, EvaluationSummary):
        summaries = [summaries]
    if fmt == "json":
        records = [s.to_record() for s in summaries]
        payload = records[0] if len(records) == 1 else records
        return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n"

    rows = [_row(s) for s in summaries]
    if fmt == "markdown":
        lines = [
            "| " + " | ".join(_COLUMNS) + " |",
            "| " + " | ".join("---" for _ in _COLUMNS) + " |",
        ]
        lines.extend("| " + " | ".join(row) + " |" for row in rows)
        return "\n".join(lines) + "\n"
    if fmt == "text":
        widths = [
            max(len(_COLUMNS[i]), *(len(row[i]) for row in rows)) for i in range(len(_COLUMNS))
        ]
        header = "  ".join(c.ljust(w) for c, w in zip(_COLUMNS, widths))
        lines = [header, "  ".join("-" * w for w in widths)]
        lines.extend("  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in rows)
        for s in summaries:
            passes = ", ".join("pass" if p else "fail" for p in s.pass_per_repeat)
            lines.append(f"{s.label}: repeats={s.repeats} [{passes}]  fingerprint={s.fingerprint[:12]}")
            if s.incomplete:
                lines.append(f"{s.label}: WARNING run incomplete (backend failures recorded as blanks)")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}; pick text, markdown or json")


def parse_rendered(document: str) -> EvaluationSummary | list[EvaluationSummary]:
    """Inverse of render(..., fmt="json")."""
    payload = json.loads(document)
    if isinstance(payload, list):
        return [EvaluationSummary.from_record(item) for item in payload]
    return EvaluationSummary.from_record(payload)


def save_summary(summary: EvaluationSummary, out_dir: str | Path) -> None:
    """Write summary.json (canonical, byte-stable) and summary.txt."""
    out = Path(out_dir)
    (out / "summary.json").write_text(render(summary, "json"), encoding="utf-8")
    (out / "summary.txt").write_text(render(summary, "text"), encoding="utf-8")


def load_summary(run_dir: str | Path) -> EvaluationSummary:
    data = json.loads((Path(run_dir) / "summary.json").read_text(encoding="utf-8"))
    return EvaluationSummary.from_record(data)
