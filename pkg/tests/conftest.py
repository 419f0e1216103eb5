from __future__ import annotations

import pytest

from tanto_eval.answer_format import DigitSequence, OptionIndex, SingleChoice
from tanto_eval.dataset import AnswerKey, ExamDataset, Question, Statement, Subject, save_dataset
from tanto_eval.sampledata import build_exam_year, build_sample_dataset


def _statements(prefix: str, n: int) -> tuple[Statement, ...]:
    labels = "アイウエオ"
    return tuple(
        Statement(label=labels[i], text=f"{prefix}：検討すべき記述その{i + 1}。")
        for i in range(n)
    )


@pytest.fixture(scope="session")
def grading_examples() -> ExamDataset:
    """Three questions mirroring the published grading examples structurally:
    a 3-statement digit question (key 211, 3 pts), a 5-option combination
    question (key 2, 2 pts) and a 5-statement digit question (key 22121, 4 pts).
    """
    q1 = Question(
        id="fix-q1",
        year=2024,
        subject=Subject.CONSTITUTIONAL,
        preamble="次のアからウまでの各記述について、正しい場合には１を、誤っている場合には２を選びなさい。",
        statements=_statements("経済的自由に関する設問1", 3),
        key=AnswerKey.from_string(DigitSequence(length=3), "211"),
        points=3,
    )
    q2 = Question(
        id="fix-q2",
        year=2024,
        subject=Subject.CIVIL,
        preamble="次のアからオまでの各記述のうち、誤っているものを組み合わせたものは、後記１から５までのうちどれか。",
        statements=_statements("相続人に関する設問2", 5),
        options=("アイ", "アウ", "イエ", "ウオ", "エオ"),
        key=AnswerKey(shape=SingleChoice(option_count=5), answer=OptionIndex(2)),
        points=2,
    )
    q3 = Question(
        id="fix-q3",
        year=2024,
        subject=Subject.CRIMINAL,
        preamble="次のアからオまでの各記述を判例の立場に従って検討し、正しい場合には１を、誤っている場合には２を選びなさい。",
        statements=_statements("文書偽造に関する設問3", 5),
        key=AnswerKey.from_string(DigitSequence(length=5), "22121"),
        points=4,
    )
    return ExamDataset(questions=(q1, q2, q3), metadata="grading fixture")


@pytest.fixture(scope="session")
def full_year() -> ExamDataset:
    """One complete synthetic exam year summing to 50/75/50."""
    return build_exam_year(2024)


@pytest.fixture(scope="session")
def corpus() -> ExamDataset:
    """Six synthetic years (2019-2024), the train/test corpus."""
    return build_sample_dataset()


@pytest.fixture(scope="session")
def corpus_file(corpus, tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "corpus.jsonl"
    save_dataset(corpus, path)
    return path
