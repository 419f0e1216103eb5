"""Command-line client for the evaluation service.

Every command is a thin wrapper over one HTTP endpoint. With --server the
request goes to a running service; without it the app is mounted
in-process, so the CLI works standalone. Exit codes: 0 success, 1
findings or run failure, 2 usage error.

Config precedence for run options: flags > config file (--config, JSON)
> environment (TANTO_EVAL_<OPTION>) > defaults. Secrets are environment
only (TANTO_EVAL_API_KEY).
"""

from __future__ import annotations

import asyncio
import json
import os
import sys
from pathlib import Path
from typing import Any, Mapping

import click
import httpx

SERVER_ENV = "TANTO_EVAL_SERVER"
ENV_PREFIX = "TANTO_EVAL_"

_RUN_DEFAULTS: dict[str, Any] = {
    "strategy": "zero_shot",
    "inner": "zero_shot",
    "backend": "oracle",
    "agent_mode": "shared",
    "few_shot_k": 5,
    "few_shot_seed": 0,
    "candidate_batch_size": 20,
    "repeats": 1,
    "run_seed": 0,
    "parallelism": 1,
    "lenient": False,
    "temperature": 0.0,
    "max_output_tokens": 512,
    "pass_threshold": 93,
}


def _call(server: str | None, method: str, path: str, payload: dict | None = None) -> httpx.Response:
    if server:
        with httpx.Client(base_url=server, timeout=3600.0) as client:
            return client.request(method, path, json=payload)

    from .service.app import create_app

    async def go() -> httpx.Response:
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://tanto-eval.local", timeout=3600.0
        ) as client:
            return await client.request(method, path, json=payload)

    return asyncio.run(go())


def _exit_for_http_error(response: httpx.Response) -> None:
    try:
        detail = response.json().get("detail")
    except (json.JSONDecodeError, ValueError):
        detail = response.text
    if isinstance(detail, dict):
        message = detail.get("message", str(detail))
    else:
        message = str(detail)
    click.echo(f"error: {message}", err=True)
    if response.status_code in (400, 404, 422):
        sys.exit(2)
    sys.exit(1)


def _post(server: str | None, path: str, payload: dict) -> dict:
    try:
        response = _call(server, "POST", path, payload)
    except httpx.HTTPError as exc:
        click.echo(f"error: cannot reach server: {exc}", err=True)
        sys.exit(1)
    if response.status_code != 200:
        _exit_for_http_error(response)
    return response.json()


def _resolve(name: str, flag_value, config_file: Mapping | None) -> Any:
    """flags > config file > environment > defaults."""
    if flag_value is not None:
        return flag_value
    if config_file and name in config_file:
        return config_file[name]
    env_value = os.environ.get(ENV_PREFIX + name.upper())
    if env_value is not None:
        default = _RUN_DEFAULTS.get(name)
        if isinstance(default, bool):
            return env_value.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(env_value)
        if isinstance(default, float):
            return float(env_value)
        return env_value
    return _RUN_DEFAULTS.get(name)


server_option = click.option(
    "--server",
    envvar=SERVER_ENV,
    default=None,
    help="Base URL of a running service; defaults to in-process execution.",
)


@click.group()
def main() -> None:
    """Exam-faithful evaluation toolkit for the bar exam multiple-choice format."""


@main.command()
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--year", required=True, help="Exam year tag, e.g. R6 or 2024.")
@click.option("--strict", is_flag=True, help="Exit 1 if any point sum deviates.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@server_option
def validate(dataset: str, year: str, strict: bool, as_json: bool, server: str | None) -> None:
    """Check per-subject point sums for one exam year."""
    body = _post(server, "/dataset/validate", {
        "dataset_path": str(Path(dataset).resolve()),
        "year": year,
        "strict": strict,
    })
    if as_json:
        click.echo(json.dumps({k: v for k, v in body.items() if k != "text"}, ensure_ascii=False))
    else:
        click.echo(body["text"])
    if strict and not body["ok"]:
        sys.exit(1)


@main.command()
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--test-year", required=True, help="Held-out exam year, e.g. R6.")
@click.option("--pipeline", "strategy", default=None,
              type=click.Choice(["zero-shot", "few-shot", "self-verify", "multi-agent"]),
              help="Inference strategy.")
@click.option("--inner", default=None, type=click.Choice(["zero-shot", "few-shot", "multi-agent"]),
              help="Inner strategy for self-verify.")
@click.option("--backend", default=None,
              help="oracle | replay:<transcript> | scripted:<json> | http")
@click.option("--agent-backend", "agent_backends", multiple=True,
              help="role=spec, repeatable; for --agent-mode separate.")
@click.option("--agent-mode", default=None, type=click.Choice(["shared", "separate"]))
@click.option("--k", "few_shot_k", default=None, type=int, help="Demonstration count.")
@click.option("--demo-seed", "few_shot_seed", default=None, type=int)
@click.option("--batch-size", "candidate_batch_size", default=None, type=int,
              help="Retriever candidates per batch.")
@click.option("--repeats", default=None, type=int)
@click.option("--seed", "run_seed", default=None, type=int)
@click.option("--parallelism", default=None, type=int)
@click.option("--lenient", is_flag=True, default=None,
              help="Lenient answer extraction (not the official grading behavior).")
@click.option("--temperature", default=None, type=float)
@click.option("--max-output-tokens", default=None, type=int)
@click.option("--threshold", "pass_threshold", default=None, type=int, help="Pass score.")
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="Run directory to write.")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="JSON file with run option defaults.")
@server_option
def run(dataset, test_year, agent_backends, out, config_path, server, **flags) -> None:
    """Run an inference pipeline over a held-out year and write a run directory."""
    config_file = None
    if config_path:
        config_file = json.loads(Path(config_path).read_text(encoding="utf-8"))
    resolved = {name: _resolve(name, flags.get(name), config_file) for name in _RUN_DEFAULTS}
    for name in ("strategy", "inner", "agent_mode"):
        resolved[name] = str(resolved[name]).replace("-", "_")
    if resolved["repeats"] < 1:
        raise click.UsageError("--repeats must be >= 1")

    payload = {
        "dataset_path": str(Path(dataset).resolve()),
        "test_year": test_year,
        "out_dir": str(Path(out).resolve()),
        "rule": {"pass_threshold": resolved.pop("pass_threshold")},
        **resolved,
    }
    if agent_backends:
        specs = {}
        for item in agent_backends:
            if "=" not in item:
                raise click.UsageError(f"--agent-backend takes role=spec, got {item!r}")
            role, spec = item.split("=", 1)
            specs[role] = spec
        payload["agent_backends"] = specs

    body = _post(server, "/run", payload)
    click.echo(body["rendered"], nl=False)
    click.echo(f"run directory: {body['out_dir']}")
    click.echo(f"config fingerprint: {body['fingerprint']}")
    if body["incomplete"]:
        click.echo("warning: run incomplete (some questions recorded as blanks)", err=True)
        sys.exit(1)


@main.command()
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--answers", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Line-delimited id<TAB>raw_answer file.")
@click.option("--year", default=None, help="Score only this exam year.")
@click.option("--threshold", default=None, type=int, help="Pass score (default 93).")
@click.option("--lenient", is_flag=True, help="Lenient answer extraction.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@server_option
def score(dataset, answers, year, threshold, lenient, as_json, server) -> None:
    """Parse raw answers with the strict grammar and grade them."""
    payload = {
        "dataset_path": str(Path(dataset).resolve()),
        "answers_path": str(Path(answers).resolve()),
        "year": year,
        "lenient": lenient,
    }
    if threshold is not None:
        payload["rule"] = {"pass_threshold": threshold}
    body = _post(server, "/score/exam", payload)
    if as_json:
        click.echo(json.dumps(body, ensure_ascii=False))
        return
    for row in body["results"]:
        shown = row["answer"] if row["answer"] is not None else f"<{row['violation_reason']}>"
        suffix = "\texact" if row["exact_match"] else ""
        click.echo(f"{row['question_id']}\t{shown}\t{row['points_awarded']} pts{suffix}")
    for qid in body["missing"]:
        click.echo(f"note: no answer for {qid} (scored 0)", err=True)
    s = body["score"]
    per = s["per_subject"]
    click.echo(
        f"constitutional {per['constitutional']}  civil {per['civil']}  "
        f"criminal {per['criminal']}  total {s['total']}  "
        f"{'PASS' if s['passed'] else 'FAIL'} (threshold {s['pass_threshold']})"
    )
    click.echo(f"exact-match accuracy: {body['accuracy']:.4f}")


@main.command()
@click.argument("run_dirs", nargs=-1, required=True,
                type=click.Path(exists=True, file_okay=False))
@click.option("--format", "fmt", default="text",
              type=click.Choice(["text", "markdown", "json"]))
@server_option
def report(run_dirs, fmt, server) -> None:
    """Render summaries for one or more run directories (comparison table)."""
    body = _post(server, "/report", {
        "run_dirs": [str(Path(d).resolve()) for d in run_dirs],
        "format": fmt,
    })
    click.echo(body["document"], nl=False)


@main.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", default=None, type=click.Path(file_okay=False),
              help="Optionally write the replayed run to a new directory.")
@server_option
def replay(run_dir, out, server) -> None:
    """Re-execute a stored run purely from its transcript and compare summaries."""
    payload = {"run_dir": str(Path(run_dir).resolve())}
    if out:
        payload["out_dir"] = str(Path(out).resolve())
    body = _post(server, "/replay", payload)
    click.echo(body["rendered"], nl=False)
    if body["matches_original"]:
        click.echo("replay matches the stored summary byte-for-byte")
    else:
        click.echo("warning: replayed summary differs from the stored one", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
