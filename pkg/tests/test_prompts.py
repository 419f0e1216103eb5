from __future__ import annotations

import pytest

from tanto_eval.answer_format import DigitString, OptionIndex, SingleChoice
from tanto_eval.dataset import AnswerKey, Question, Subject
from tanto_eval.errors import TemplateError
from tanto_eval.prompts import (
    Message,
    PromptConfig,
    PromptTemplate,
    build_agent_prompt,
    build_answer_prompt,
    build_verification_prompt,
    build_verification_prompt_raw,
    default_registry,
    render_candidates,
    render_question_text,
)

# Snapshots of the shipped instruction texts. These are data contracts: a
# drifted asset must fail loudly, not silently change every prompt.
SYSTEM_ROLE_TEXT = "あなたは日本の司法試験を受験する受験者である。"

ANSWER_FORMAT_TEXT = """【回答形式の厳守】必ず「答えのみ」を出力せよ。理由・説明・記号は一切不要。

1) 選択肢が番号で与えられている場合
   （例：1. アO イO ウO、2. アO イO ウX …）
   → 正しい選択肢の番号のみ出力（例：2）

2) 各記述（ア・イ・ウ…）について 1 / 2 を答える問題の場合
   → 数字列のみ出力（例：112）

禁止：
- OOX
- アO イO ウX
- ア1 イ1 ウ2
- 説明文"""

VERIFICATION_TEXT = """あなたは法律試験の答案を最終確認する役割である。以下の【問題】と【あなたの解答】を照らし合わせ、選択肢番号または数値の形式として最も正しい最終解答を一つだけ出力せよ。

・問題文の条件に照らして明らかに誤っている場合のみ修正すること
・元の解答が正しい場合は、そのまま同じ解答を出力すること
・理由や説明は一切出力せず、最終的な数字のみを出力せよ"""

RETRIEVER_TEXT = """以下の問題に関連すると考えられる過去問とその回答を選択せよ。
選択の基準は、扱われている法分野、論点、条文、または判例の種類が共通しているかどうかである。最大で数問まで選んでよい。"""

VERIFIER_TEXT = "以下の問題に対して参考になる過去問と回答のみを選別してください。"

EXTRACTOR_TEXT = "以下の問題と正解から、将来の類似問題に使える一般化可能な法的知識を抽出せよ。"

REASONER_TEXT = "以下は関連する法的知識である。上記を踏まえて、次の問題に答えよ。"


@pytest.mark.parametrize(
    "template_id,expected",
    [
        ("system_role", SYSTEM_ROLE_TEXT),
        ("answer_format", ANSWER_FORMAT_TEXT),
        ("verification", VERIFICATION_TEXT),
        ("agent_retriever", RETRIEVER_TEXT),
        ("agent_verifier", VERIFIER_TEXT),
        ("agent_extractor", EXTRACTOR_TEXT),
        ("agent_reasoner", REASONER_TEXT),
    ],
)
def test_shipped_instruction_bodies_are_byte_exact(template_id, expected):
    assert default_registry().get(template_id).body == expected


def test_registry_hashes_are_stable_sha256():
    hashes = default_registry().hashes()
    assert hashes == default_registry().hashes()
    assert all(len(h) == 64 for h in hashes.values())
    assert set(hashes) == set(default_registry().ids())


def test_template_rejects_undeclared_placeholder():
    with pytest.raises(TemplateError, match="undeclared"):
        PromptTemplate(
            id="bad", role="user", language="ja", placeholders=(), body="こんにちは {name}"
        )


def test_template_rejects_missing_binding():
    template = PromptTemplate(
        id="greet", role="user", language="ja", placeholders=("name",), body="やあ {name}"
    )
    with pytest.raises(TemplateError, match="missing"):
        template.render({})
    assert template.render({"name": "太郎"}) == "やあ 太郎"


def _question(grading_examples, qid: str) -> Question:
    return grading_examples.by_id(qid)


def test_question_text_contains_statements_verbatim(grading_examples):
    q = _question(grading_examples, "fix-q1")
    text = render_question_text(q)
    assert q.preamble in text
    for statement in q.statements:
        assert f"{statement.label}．{statement.text}" in text


def test_question_text_numbers_options(grading_examples):
    q = _question(grading_examples, "fix-q2")
    text = render_question_text(q)
    assert "1. アイ" in text
    assert "5. エオ" in text


def test_zero_shot_prompt_structure(grading_examples):
    q = _question(grading_examples, "fix-q1")
    messages = build_answer_prompt(q)
    assert [m.role for m in messages] == ["system", "user"]
    assert messages[0].content == SYSTEM_ROLE_TEXT
    assert "必ず「答えのみ」を出力せよ" in messages[1].content
    assert render_question_text(q) in messages[1].content
    assert "{" not in messages[1].content.replace("【", "").replace("】", "")


def test_few_shot_prompt_embeds_demonstrations_before_target(grading_examples, corpus):
    q = _question(grading_examples, "fix-q1")
    demos = [p for p in corpus.questions if p.year == 2019][:5]
    messages = build_answer_prompt(q, [(d, d.key) for d in demos])
    user = messages[-1].content
    assert user.count("問題:") == 5
    assert user.count("解答: ") == 5
    for d in demos:
        assert d.key.as_string in user
        assert user.index(render_question_text(d)) < user.index("【問題】")


def test_empty_question_is_an_error():
    q = Question(
        id="empty-q",
        year=2024,
        subject=Subject.CIVIL,
        preamble="",
        statements=(),
        options=None,
        key=AnswerKey(shape=SingleChoice(option_count=2), answer=OptionIndex(1)),
        points=1,
    )
    with pytest.raises(TemplateError, match="empty"):
        build_answer_prompt(q)


def test_verification_prompt_embeds_answer(grading_examples):
    q = _question(grading_examples, "fix-q1")
    messages = build_verification_prompt(q, DigitString((1, 1, 2)))
    user = messages[-1].content
    assert "【あなたの解答】\n112" in user
    assert "【問題】" in user
    assert render_question_text(q) in user


def test_verification_prompt_is_deterministic(grading_examples):
    q = _question(grading_examples, "fix-q1")
    first = build_verification_prompt(q, DigitString((1, 1, 2)))
    second = build_verification_prompt(q, DigitString((1, 1, 2)))
    assert first == second


def test_verification_prompt_option_index(grading_examples):
    q = _question(grading_examples, "fix-q2")
    messages = build_verification_prompt(q, OptionIndex(2))
    assert "【あなたの解答】\n2" in messages[-1].content


def test_verification_prompt_raw_carries_violation_text(grading_examples):
    q = _question(grading_examples, "fix-q1")
    messages = build_verification_prompt_raw(q, "アO イO ウX")
    assert "【あなたの解答】\nアO イO ウX" in messages[-1].content


def test_extractor_prompt(grading_examples):
    q = _question(grading_examples, "fix-q1")
    messages = build_agent_prompt("extractor", {"question": q, "answer": q.key})
    user = messages[-1].content
    assert "一般化可能な法的知識を抽出せよ" in user
    assert "正解: 211" in user


def test_reasoner_prompt_with_empty_knowledge(grading_examples):
    q = _question(grading_examples, "fix-q1")
    messages = build_agent_prompt("reasoner", {"question": q, "knowledge": ""})
    user = messages[-1].content
    assert REASONER_TEXT in user
    assert "必ず「答えのみ」を出力せよ" in user  # format instruction appended
    assert render_question_text(q) in user


def test_retriever_requires_candidates(grading_examples):
    q = _question(grading_examples, "fix-q1")
    with pytest.raises(TemplateError, match="candidate"):
        build_agent_prompt("retriever", {"question": q, "candidates": []})


def test_agent_prompt_missing_binding(grading_examples):
    q = _question(grading_examples, "fix-q1")
    with pytest.raises(TemplateError, match="missing binding"):
        build_agent_prompt("extractor", {"question": q})
    with pytest.raises(TemplateError, match="unknown agent role"):
        build_agent_prompt("debater", {"question": q})


def test_retriever_prompt_numbers_candidates(grading_examples, corpus):
    q = _question(grading_examples, "fix-q1")
    pool = [p for p in corpus.questions if p.year == 2019][:3]
    numbered = [(i + 1, p, p.key) for i, p in enumerate(pool)]
    messages = build_agent_prompt("retriever", {"question": q, "candidates": numbered})
    user = messages[-1].content
    assert RETRIEVER_TEXT in user
    for i, p, key in numbered:
        assert f"{i}. 問題:" in user
        assert f"解答: {key.as_string}" in user
    assert render_candidates(numbered) in user


def test_rendering_is_pure(grading_examples, corpus):
    q = _question(grading_examples, "fix-q3")
    demos = [p for p in corpus.questions if p.year == 2020][:2]
    pairs = [(d, d.key) for d in demos]
    assert build_answer_prompt(q, pairs) == build_answer_prompt(q, pairs)


def test_demos_in_system_knob(grading_examples, corpus):
    q = _question(grading_examples, "fix-q1")
    demos = [(d, d.key) for d in corpus.questions[:2]]
    messages = build_answer_prompt(q, demos, PromptConfig(demos_in_system=True))
    assert [m.role for m in messages] == ["system", "system", "user"]
    assert "問題:" in messages[1].content
    assert "問題:" not in messages[2].content.split("【問題】")[0]


def test_no_system_role_knob(grading_examples):
    q = _question(grading_examples, "fix-q1")
    messages = build_answer_prompt(q, (), PromptConfig(include_system_role=False))
    assert [m.role for m in messages] == ["user"]


def test_message_is_frozen():
    message = Message("user", "こんにちは")
    with pytest.raises(AttributeError):
        message.content = "x"  # type: ignore[misc]
