from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from tanto_eval.dataset import split_by_year
from tanto_eval.service.app import create_app


@pytest.fixture(scope="module")
def client() -> TestClient:
    return TestClient(create_app())


@pytest.fixture(scope="module")
def answers_file(tmp_path_factory, corpus):
    _, test = split_by_year(corpus, ["R6"])
    path = tmp_path_factory.mktemp("svc") / "answers.tsv"
    with path.open("w", encoding="utf-8") as fh:
        for q in test.questions:
            fh.write(f"{q.id}\t{q.key.as_string}\n")
    return path


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"


def test_parse_endpoint_accepts_canonical(client):
    response = client.post(
        "/answer/parse",
        json={"raw": " 112\n", "shape": {"kind": "digit_sequence", "length": 3}},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["ok"] is True
    assert body["canonical"] == "112"


def test_parse_endpoint_reports_violation(client):
    response = client.post(
        "/answer/parse",
        json={"raw": "アO イO ウX", "shape": {"kind": "digit_sequence", "length": 3}},
    )
    body = response.json()
    assert body["ok"] is False
    assert body["violation_reason"] == "non-numeric content"


def test_parse_endpoint_rejects_bad_shape(client):
    response = client.post(
        "/answer/parse", json={"raw": "1", "shape": {"kind": "single_choice"}}
    )
    assert response.status_code == 400
    assert response.json()["detail"]["kind"] == "usage"


def test_validate_endpoint(client, corpus_file):
    response = client.post(
        "/dataset/validate",
        json={"dataset_path": str(corpus_file), "year": "R6", "strict": False},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["ok"] is True
    assert body["subject_sums"] == {"constitutional": 50, "civil": 75, "criminal": 50}


def test_validate_endpoint_missing_file(client):
    response = client.post(
        "/dataset/validate", json={"dataset_path": "/nonexistent.jsonl", "year": "R6"}
    )
    assert response.status_code == 404


def test_score_exam_endpoint(client, corpus_file, answers_file):
    response = client.post(
        "/score/exam",
        json={
            "dataset_path": str(corpus_file),
            "answers_path": str(answers_file),
            "year": "R6",
        },
    )
    assert response.status_code == 200
    body = response.json()
    assert body["score"]["total"] == 175
    assert body["score"]["passed"] is True
    assert body["accuracy"] == 1.0
    assert body["missing"] == []
    assert len(body["results"]) == 70


def test_score_exam_missing_answer_noted(client, corpus_file, answers_file, tmp_path, corpus):
    _, test = split_by_year(corpus, ["R6"])
    partial = tmp_path / "partial.tsv"
    lines = answers_file.read_text(encoding="utf-8").splitlines()[1:]
    partial.write_text("\n".join(lines) + "\n", encoding="utf-8")
    response = client.post(
        "/score/exam",
        json={
            "dataset_path": str(corpus_file),
            "answers_path": str(partial),
            "year": "R6",
        },
    )
    body = response.json()
    first = test.questions[0]
    assert body["missing"] == [first.id]
    assert body["score"]["total"] == 175 - first.points


def test_score_exam_unknown_id(client, corpus_file, tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("ghost-99\t112\n", encoding="utf-8")
    response = client.post(
        "/score/exam",
        json={"dataset_path": str(corpus_file), "answers_path": str(bad), "year": "R6"},
    )
    assert response.status_code == 400
    assert "ghost-99" in response.json()["detail"]["message"]


def test_run_endpoint_oracle(client, corpus_file, tmp_path):
    out = tmp_path / "run-out"
    response = client.post(
        "/run",
        json={
            "dataset_path": str(corpus_file),
            "test_year": "R6",
            "strategy": "self_verify",
            "backend": "oracle",
            "repeats": 3,
            "out_dir": str(out),
        },
    )
    assert response.status_code == 200
    body = response.json()
    assert [s["total"] for s in body["scores"]] == [175, 175, 175]
    assert body["summary"]["exam_scale"] == {"avg": 175.0, "min": 175, "max": 175}
    assert body["incomplete"] is False
    assert (out / "summary.json").is_file()
    assert (out / "transcript.jsonl").is_file()
    snapshot = json.loads((out / "config.json").read_text(encoding="utf-8"))
    assert snapshot["fingerprint"] == body["fingerprint"]
    assert snapshot["template_hashes"]


def test_run_endpoint_rejects_bad_backend(client, corpus_file):
    response = client.post(
        "/run",
        json={"dataset_path": str(corpus_file), "test_year": "R6", "backend": "psychic"},
    )
    assert response.status_code == 400


def test_run_endpoint_rejects_bad_year(client, corpus_file):
    response = client.post(
        "/run",
        json={"dataset_path": str(corpus_file), "test_year": "R45", "backend": "oracle"},
    )
    assert response.status_code == 400
    assert "R45" in response.json()["detail"]["message"]


def test_run_endpoint_scripted_backend(client, corpus_file, tmp_path, corpus):
    _, test = split_by_year(corpus, ["R6"])
    responses = {q.id: q.key.as_string for q in test.questions}
    script = tmp_path / "script.json"
    script.write_text(json.dumps(responses, ensure_ascii=False), encoding="utf-8")
    response = client.post(
        "/run",
        json={
            "dataset_path": str(corpus_file),
            "test_year": "R6",
            "backend": f"scripted:{script}",
            "repeats": 1,
        },
    )
    assert response.status_code == 200
    assert response.json()["scores"][0]["total"] == 175


def test_run_endpoint_separate_agent_backends(client, corpus_file, tmp_path):
    out = tmp_path / "sep-run"
    response = client.post(
        "/run",
        json={
            "dataset_path": str(corpus_file),
            "test_year": "R6",
            "strategy": "multi_agent",
            "agent_mode": "separate",
            "agent_backends": {
                "retriever": "oracle",
                "verifier": "oracle",
                "extractor": "oracle",
                "reasoner": "oracle",
            },
            "out_dir": str(out),
        },
    )
    assert response.status_code == 200
    body = response.json()
    # oracle replies parse to no candidate numbers, so nothing is retained
    # and the oracle reasoner still answers with the key: a full score
    assert body["scores"][0]["total"] == 175
    snapshot = json.loads((out / "config.json").read_text(encoding="utf-8"))
    assert snapshot["backend"] == "extractor=oracle;reasoner=oracle;retriever=oracle;verifier=oracle"


def test_run_endpoint_separate_mode_requires_all_roles(client, corpus_file):
    response = client.post(
        "/run",
        json={
            "dataset_path": str(corpus_file),
            "test_year": "R6",
            "strategy": "multi_agent",
            "agent_mode": "separate",
            "agent_backends": {"retriever": "oracle"},
        },
    )
    assert response.status_code == 400


def test_replay_endpoint_matches_original(client, corpus_file, tmp_path):
    out = tmp_path / "replay-src"
    created = client.post(
        "/run",
        json={
            "dataset_path": str(corpus_file),
            "test_year": "R6",
            "strategy": "zero_shot",
            "backend": "oracle",
            "repeats": 2,
            "out_dir": str(out),
        },
    )
    assert created.status_code == 200
    response = client.post("/replay", json={"run_dir": str(out)})
    assert response.status_code == 200
    body = response.json()
    assert body["matches_original"] is True
    assert body["summary"]["fingerprint"] == created.json()["fingerprint"]


def test_report_endpoint_comparison(client, corpus_file, tmp_path):
    dirs = []
    for i in range(2):
        out = tmp_path / f"cmp-{i}"
        client.post(
            "/run",
            json={
                "dataset_path": str(corpus_file),
                "test_year": "R6",
                "backend": "oracle",
                "out_dir": str(out),
            },
        )
        dirs.append(str(out))
    response = client.post("/report", json={"run_dirs": dirs, "format": "markdown"})
    assert response.status_code == 200
    document = response.json()["document"]
    assert document.count("zero_shot/oracle") == 2


def test_report_endpoint_missing_dir(client, tmp_path):
    response = client.post(
        "/report", json={"run_dirs": [str(tmp_path / "nope")], "format": "text"}
    )
    assert response.status_code == 404
