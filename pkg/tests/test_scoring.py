from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tanto_eval.answer_format import (
    DigitSequence,
    DigitString,
    FormatViolation,
    OptionIndex,
    SingleChoice,
    ViolationReason,
    parse_answer,
)
from tanto_eval.dataset import AnswerKey, ExamDataset, Question, Statement, Subject
from tanto_eval.errors import UnknownQuestionError
from tanto_eval.scoring import (
    ExamScore,
    PassRule,
    brute_force_score_oracle,
    exact_match_accuracy,
    score_all,
    score_exam,
    score_question,
)

# Frozen oracle tables, enumerated independently: every candidate string is
# compared digit-wise to the key and the published rule applied directly
# (0 wrong -> p, exactly 1 wrong -> p-2 when n >= 3, else 0).
KEY_211_TABLE = {
    "211": 3,
    "221": 1,
    "212": 1,
    "111": 1,
    "121": 0,
    "112": 0,
    "222": 0,
    "122": 0,
}

SINGLE_CHOICE_TABLE = {"1": 0, "2": 2, "3": 0, "4": 0, "5": 0}


def _digit_question(qid: str, key: str, points: int, subject=Subject.CONSTITUTIONAL) -> Question:
    labels = "アイウエオカキクケコ"
    return Question(
        id=qid,
        year=2024,
        subject=subject,
        preamble="各記述について１か２を選びなさい。",
        statements=tuple(
            Statement(labels[i], f"{qid} の記述{labels[i]}。") for i in range(len(key))
        ),
        key=AnswerKey.from_string(DigitSequence(length=len(key)), key),
        points=points,
    )


def _choice_question(qid: str, key: int, points: int, options: int = 5) -> Question:
    return Question(
        id=qid,
        year=2024,
        subject=Subject.CIVIL,
        preamble="正しい組合せを選びなさい。",
        statements=(),
        options=tuple(f"組合せ{i}" for i in range(1, options + 1)),
        key=AnswerKey(shape=SingleChoice(option_count=options), answer=OptionIndex(key)),
        points=points,
    )


Q211 = _digit_question("q-211", "211", 3)
Q22121 = _digit_question("q-22121", "22121", 4)
QCHOICE = _choice_question("q-choice", key=2, points=2)


def test_brute_force_oracle_matches_frozen_table():
    assert brute_force_score_oracle(Q211) == KEY_211_TABLE


def test_brute_force_oracle_single_choice():
    assert brute_force_score_oracle(QCHOICE) == SINGLE_CHOICE_TABLE


def test_brute_force_oracle_five_statement_shape():
    table = brute_force_score_oracle(Q22121)
    assert len(table) == 32
    values = sorted(table.values(), reverse=True)
    assert values.count(4) == 1
    assert values.count(2) == 5  # C(5,1) one-wrong strings
    assert values.count(0) == 26


def test_brute_force_oracle_space_bound():
    q = _digit_question("q-large", "1" * 8, 3)
    with pytest.raises(ValueError, match="exceeds"):
        brute_force_score_oracle(q, max_space=200)


@pytest.mark.parametrize(
    "predicted,points,exact",
    [
        ("211", 3, True),
        ("221", 1, False),
        ("112", 0, False),
        ("122", 0, False),
    ],
)
def test_score_three_statement_question(predicted, points, exact):
    result = score_question(Q211, parse_answer(predicted, Q211.key.shape))
    assert result.points_awarded == points
    assert result.exact_match is exact


def test_score_five_statement_one_wrong():
    result = score_question(Q22121, parse_answer("21121", Q22121.key.shape))
    assert result.points_awarded == 2
    assert result.correct_statements == 4


def test_worked_example_five_statements_four_points():
    q = _digit_question("q-worked", "11111", 4)
    exact = score_question(q, DigitString((1, 1, 1, 1, 1)))
    one_wrong = score_question(q, DigitString((2, 1, 1, 1, 1)))
    two_wrong = score_question(q, DigitString((2, 2, 1, 1, 1)))
    assert exact.points_awarded == 4
    assert one_wrong.points_awarded == 2  # 4 of 5 correct
    assert two_wrong.points_awarded == 0  # 3 of 5 correct, over 50% accuracy
    assert two_wrong.correct_statements == 3


def test_single_choice_is_all_or_nothing():
    assert score_question(QCHOICE, OptionIndex(2)).points_awarded == 2
    assert score_question(QCHOICE, OptionIndex(3)).points_awarded == 0


def test_short_digit_sequences_are_all_or_nothing():
    q = _digit_question("q-short", "12", 3)
    assert score_question(q, DigitString((1, 2))).points_awarded == 3
    assert score_question(q, DigitString((1, 1))).points_awarded == 0


def test_penalty_is_floored_at_zero():
    q = _digit_question("q-cheap", "121", 2)
    one_wrong = score_question(q, DigitString((1, 1, 1)))
    assert one_wrong.points_awarded == 0


def test_format_violation_scores_zero():
    violation = FormatViolation(ViolationReason.WRONG_LENGTH, "1112")
    result = score_question(Q211, violation)
    assert result.points_awarded == 0
    assert result.exact_match is False
    assert result.correct_statements == 0


def test_shape_mismatch_is_a_programming_error():
    with pytest.raises(ValueError, match="conform"):
        score_question(Q211, OptionIndex(2))


def test_key_as_prediction_earns_full_points(corpus):
    for q in corpus.questions:
        result = score_question(q, q.key.answer)
        assert result.points_awarded == q.points
        assert result.exact_match


def test_scorer_agrees_with_oracle_everywhere(corpus):
    for q in corpus.questions:
        table = brute_force_score_oracle(q)
        for candidate, expected in table.items():
            predicted = parse_answer(candidate, q.key.shape)
            assert not isinstance(predicted, FormatViolation)
            assert score_question(q, predicted).points_awarded == expected, (q.id, candidate)


def test_mismatch_monotonicity():
    rng = random.Random(11)
    for _ in range(200):
        n = rng.randint(3, 7)
        key = [rng.choice((1, 2)) for _ in range(n)]
        q = _digit_question("q-mono", "".join(map(str, key)), rng.randint(2, 5))
        flips_b = set(rng.sample(range(n), rng.randint(0, n)))
        flips_a = set(rng.sample(sorted(flips_b), rng.randint(0, len(flips_b))))
        def flip(positions):
            return DigitString(
                tuple(3 - d if i in positions else d for i, d in enumerate(key))
            )
        points_a = score_question(q, flip(flips_a)).points_awarded
        points_b = score_question(q, flip(flips_b)).points_awarded
        assert points_a >= points_b


@given(st.integers(min_value=2, max_value=6), st.integers(min_value=1, max_value=8), st.data())
def test_points_always_within_bounds(length, points, data):
    key = "".join(str(data.draw(st.sampled_from((1, 2)))) for _ in range(length))
    q = _digit_question("q-fuzz", key, points)
    digits = tuple(data.draw(st.sampled_from((1, 2))) for _ in range(length))
    result = score_question(q, DigitString(digits))
    assert 0 <= result.points_awarded <= q.points
    if result.exact_match:
        assert result.points_awarded == q.points


def test_score_exam_perfect_and_zero(full_year):
    rule = PassRule()
    perfect = score_exam(
        full_year, {q.id: q.key.answer for q in full_year.questions}, rule
    )
    assert perfect.per_subject == {
        Subject.CONSTITUTIONAL: 50,
        Subject.CIVIL: 75,
        Subject.CRIMINAL: 50,
    }
    assert perfect.total == 175
    assert perfect.passed

    wrong = FormatViolation(ViolationReason.EMPTY, "")
    zero = score_exam(full_year, {q.id: wrong for q in full_year.questions}, rule)
    assert zero.total == 0
    assert not zero.passed


def test_score_exam_missing_answers_count_zero(full_year):
    rule = PassRule()
    answers = {q.id: q.key.answer for q in full_year.questions[1:]}
    score = score_exam(full_year, answers, rule)
    assert score.total == 175 - full_year.questions[0].points


def test_score_exam_rejects_unknown_ids(full_year):
    with pytest.raises(UnknownQuestionError, match="ghost"):
        score_exam(full_year, {"ghost-01": OptionIndex(1)}, PassRule())


def test_default_floors():
    assert PassRule().floors == {
        Subject.CONSTITUTIONAL: 20,
        Subject.CIVIL: 30,
        Subject.CRIMINAL: 20,
    }


def test_non_integer_floor_is_rejected():
    rule = PassRule(floor_fraction=Fraction(1, 3))
    with pytest.raises(ValueError, match="integer"):
        rule.floors


@pytest.mark.parametrize(
    "const,civ,crim,expected",
    [
        (50, 75, 50, True),   # perfect
        (20, 43, 30, True),   # exactly at threshold and floor
        (22, 42, 30, True),   # published passing configuration
        (8, 33, 27, False),   # below threshold and below floor
        (30, 32, 30, False),  # total 92, one short
        (8, 62, 30, False),   # total 100 but constitutional below 40% floor
    ],
)
def test_pass_rule_matrix(const, civ, crim, expected):
    score = ExamScore.from_subject_points(
        {
            Subject.CONSTITUTIONAL: const,
            Subject.CIVIL: civ,
            Subject.CRIMINAL: crim,
        },
        PassRule(),
    )
    assert score.passed is expected
    assert score.total == const + civ + crim


def test_pass_is_monotone_in_points():
    rng = random.Random(5)
    rule = PassRule()
    for _ in range(300):
        base = {
            Subject.CONSTITUTIONAL: rng.randint(0, 50),
            Subject.CIVIL: rng.randint(0, 75),
            Subject.CRIMINAL: rng.randint(0, 50),
        }
        bumped = dict(base)
        subject = rng.choice(list(Subject))
        cap = rule.subject_max[subject]
        bumped[subject] = min(cap, bumped[subject] + rng.randint(1, 10))
        before = ExamScore.from_subject_points(base, rule).passed
        after = ExamScore.from_subject_points(bumped, rule).passed
        assert not (before and not after)


def test_total_is_order_invariant(full_year):
    rule = PassRule()
    answers = {q.id: q.key.answer for q in full_year.questions}
    reversed_dataset = ExamDataset(
        questions=tuple(reversed(full_year.questions)), metadata="reversed"
    )
    assert score_exam(full_year, answers, rule).total == score_exam(
        reversed_dataset, answers, rule
    ).total


def test_exact_match_accuracy():
    results = score_all(
        ExamDataset(questions=(Q211,), metadata=""), {"q-211": DigitString((2, 1, 1))}
    )
    assert exact_match_accuracy(results) == 1.0
    results = score_all(
        ExamDataset(questions=(Q211,), metadata=""), {"q-211": DigitString((1, 1, 1))}
    )
    assert exact_match_accuracy(results) == 0.0
    with pytest.raises(ValueError):
        exact_match_accuracy([])


def test_accuracy_rounding_to_four_decimals():
    from tanto_eval.report import round_half_up

    # 38 exact of 77: documented 4-decimal half-up presentation
    questions = tuple(_digit_question(f"q-a{i:02d}", "121", 2) for i in range(77))
    dataset = ExamDataset(questions=questions, metadata="")
    answers = {
        q.id: DigitString((1, 2, 1)) if i < 38 else DigitString((2, 1, 2))
        for i, q in enumerate(questions)
    }
    accuracy = exact_match_accuracy(score_all(dataset, answers))
    assert accuracy == pytest.approx(38 / 77)
    assert round_half_up(accuracy, 4) == 0.4935
