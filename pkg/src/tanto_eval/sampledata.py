"""Synthetic datasets for demos, smoke tests and the acceptance suite.

Real exam sheets are not bundled; these generators produce structurally
faithful stand-ins: per-statement digit-sequence questions and
combination single-choice questions whose per-subject point sums match
the official 50 / 75 / 50 split for a complete year.
"""

from __future__ import annotations

import random
from pathlib import Path

from .answer_format import DigitSequence, OptionIndex, SingleChoice
from .dataset import (
    AnswerKey,
    ExamDataset,
    Question,
    Statement,
    Subject,
    reiwa_tag,
    save_dataset,
)

_LABELS = "アイウエオ"

# (points, shape factory, how many) per subject; each list sums to the
# official subject maximum.
_YEAR_PLAN: dict[Subject, list[tuple[int, str, int, int]]] = {
    # (count, kind, statements/options, points)
    Subject.CONSTITUTIONAL: [
        (10, "digits", 3, 3),  # 30
        (10, "choice", 5, 2),  # 20
    ],
    Subject.CIVIL: [
        (5, "digits", 5, 4),  # 20
        (5, "digits", 3, 3),  # 15
        (20, "choice", 5, 2),  # 40
    ],
    Subject.CRIMINAL: [
        (10, "digits", 3, 3),  # 30
        (10, "choice", 5, 2),  # 20
    ],
}

_TOPICS = {
    Subject.CONSTITUTIONAL: "基本的人権の保障に関する論点",
    Subject.CIVIL: "契約および物権変動に関する論点",
    Subject.CRIMINAL: "構成要件および違法性に関する論点",
}


def _statements(qid: str, n: int) -> tuple[Statement, ...]:
    return tuple(
        Statement(
            label=_LABELS[i],
            text=f"設問{qid}の記述{_LABELS[i]}：判例の立場に関する検討事項その{i + 1}。",
        )
        for i in range(n)
    )


def _digit_question(qid: str, year: int, subject: Subject, n: int, points: int, rng: random.Random) -> Question:
    shape = DigitSequence(length=n)
    key_digits = tuple(rng.choice((1, 2)) for _ in range(n))
    return Question(
        id=qid,
        year=year,
        subject=subject,
        preamble=(
            f"{_TOPICS[subject]}に関する次のアから{_LABELS[n - 1]}までの各記述について、"
            "それぞれ正しい場合には１を、誤っている場合には２を選びなさい。"
        ),
        statements=_statements(qid, n),
        key=AnswerKey.from_string(shape, "".join(str(d) for d in key_digits)),
        points=points,
    )


def _choice_question(qid: str, year: int, subject: Subject, n_options: int, points: int, rng: random.Random) -> Question:
    shape = SingleChoice(option_count=n_options)
    combos = ["アイ", "アウ", "イウ", "イエ", "ウオ", "エオ", "アエ"]
    return Question(
        id=qid,
        year=year,
        subject=subject,
        preamble=(
            f"{_TOPICS[subject]}に関する次のアからオまでの各記述のうち、"
            "誤っているものを組み合わせたものは、後記１から５までのうちどれか。"
        ),
        statements=_statements(qid, 5),
        options=tuple(combos[i % len(combos)] for i in range(n_options)),
        key=AnswerKey(shape=shape, answer=OptionIndex(rng.randint(1, n_options))),
        points=points,
    )


def build_exam_year(year: int, seed: int = 0) -> ExamDataset:
    """One complete synthetic exam year summing to 50/75/50 points."""
    rng = random.Random(f"{seed}:{year}")
    questions: list[Question] = []
    for subject in Subject:
        serial = 0
        for count, kind, size, points in _YEAR_PLAN[subject]:
            for _ in range(count):
                serial += 1
                qid = f"{reiwa_tag(year)}-{subject.value[:5]}-{serial:02d}"
                if kind == "digits":
                    questions.append(_digit_question(qid, year, subject, size, points, rng))
                else:
                    questions.append(_choice_question(qid, year, subject, size, points, rng))
    return ExamDataset(questions=tuple(questions), metadata=f"synthetic year {year}")


def build_sample_dataset(years: tuple[int, ...] = (2019, 2020, 2021, 2022, 2023, 2024), seed: int = 0) -> ExamDataset:
    """Several complete synthetic years, mirroring a train/test corpus."""
    questions: list[Question] = []
    for year in years:
        questions.extend(build_exam_year(year, seed).questions)
    return ExamDataset(questions=tuple(questions), metadata=f"synthetic years {years}")


def write_sample_dataset(path: str | Path, years: tuple[int, ...] = (2019, 2020, 2021, 2022, 2023, 2024), seed: int = 0) -> Path:
    """Generate and save a sample dataset; returns the path written."""
    path = Path(path)
    save_dataset(build_sample_dataset(years, seed), path)
    return path
