import json

import jsonschema
import pytest
from click.testing import CliRunner

from factgenius.cli import cli
from factgenius.mockllm import MockScript, serve

FIXED_OK = "fixed:True, fine."


@pytest.fixture()
def runner():
    return CliRunner()


def _schema(fixtures_dir, name):
    return json.loads((fixtures_dir / "schemas" / name).read_text(encoding="utf-8"))


def _kg(fixtures_dir) -> str:
    return str(fixtures_dir / "mini_kg.jsonl")


# ------------------------------------------------------------------ kg group


def test_kg_validate_text(runner, fixtures_dir):
    result = runner.invoke(cli, ["kg", "validate", "--kg", _kg(fixtures_dir)])
    assert result.exit_code == 0
    assert "entities: 3" in result.output
    assert "edges: 4" in result.output
    assert "closure repairs: 2" in result.output


def test_kg_validate_json_schema(runner, fixtures_dir):
    result = runner.invoke(cli, ["kg", "validate", "--kg", _kg(fixtures_dir), "--json"])
    assert result.exit_code == 0
    payload = json.loads(result.output)
    jsonschema.validate(payload, _schema(fixtures_dir, "kg_validate.schema.json"))
    assert payload == {"entities": 3, "edges": 4, "closure_repairs": 2}


def test_kg_validate_missing_file_is_runtime_error(runner, tmp_path):
    result = runner.invoke(cli, ["kg", "validate", "--kg", str(tmp_path / "nope.jsonl")])
    assert result.exit_code == 1
    assert "error:" in result.output


def test_kg_validate_malformed_file(runner, tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("definitely not json\n", encoding="utf-8")
    result = runner.invoke(cli, ["kg", "validate", "--kg", str(bad)])
    assert result.exit_code == 1
    assert "line 1" in result.output


def test_usage_error_exit_code(runner):
    result = runner.invoke(cli, ["kg", "validate"])  # --kg missing
    assert result.exit_code == 2


# -------------------------------------------------------------------- verify


def test_verify_json_matches_golden(runner, fixtures_dir, gold_table_mini):
    with serve(MockScript.oracle(gold_table_mini)) as server:
        result = runner.invoke(
            cli,
            [
                "verify", "--kg", _kg(fixtures_dir),
                "--claim", "A r B.", "--entities", "A,B",
                "--endpoint", server.url, "--model", "mock-model", "--json",
            ],
        )
    assert result.exit_code == 0
    golden = (fixtures_dir / "cli_verify_golden.json").read_text(encoding="utf-8")
    assert result.output == golden
    payload = json.loads(result.output)
    jsonschema.validate(payload, _schema(fixtures_dir, "verify_trace.schema.json"))


def test_verify_human_output(runner, fixtures_dir, gold_table_mini):
    with serve(MockScript.oracle(gold_table_mini)) as server:
        result = runner.invoke(
            cli,
            [
                "verify", "--kg", _kg(fixtures_dir),
                "--claim", "A r B.", "--entities", "A,B",
                "--endpoint", server.url, "--model", "mock-model",
            ],
        )
    assert result.exit_code == 0
    assert "verdict: Supported" in result.output
    assert "A >- r -> B" in result.output


def test_verify_claim_only_needs_no_entities(runner, fixtures_dir):
    with serve(MockScript.fixed("False, unknown claim.")) as server:
        result = runner.invoke(
            cli,
            [
                "verify", "--kg", _kg(fixtures_dir),
                "--claim", "Anything.", "--mode", "claim-only",
                "--endpoint", server.url, "--model", "mock-model",
            ],
        )
    assert result.exit_code == 0
    assert "verdict: Refuted" in result.output


def test_verify_evidence_mode_requires_entities(runner, fixtures_dir):
    with serve(MockScript.fixed("irrelevant")) as server:
        result = runner.invoke(
            cli,
            [
                "verify", "--kg", _kg(fixtures_dir), "--claim", "A r B.",
                "--endpoint", server.url, "--model", "mock-model",
            ],
        )
    assert result.exit_code == 1
    assert "error:" in result.output


def test_verify_env_fallback(runner, fixtures_dir, gold_table_mini):
    with serve(MockScript.oracle(gold_table_mini)) as server:
        env = {
            "FACTGENIUS_KG": _kg(fixtures_dir),
            "FACTGENIUS_ENDPOINT": server.url,
            "FACTGENIUS_MODEL": "mock-model",
        }
        result = runner.invoke(
            cli, ["verify", "--claim", "A r B.", "--entities", "A,B"], env=env
        )
    assert result.exit_code == 0
    assert "verdict: Supported" in result.output


def test_flags_beat_env_beat_config(runner, fixtures_dir, tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("threshold = 10\nkg = /nonexistent/from/config\n", encoding="utf-8")

    # env overrides the config file for --kg; the claim-only mode skips mining
    with serve(MockScript.fixed("True, ok.")) as server:
        env = {"FACTGENIUS_KG": _kg(fixtures_dir)}
        result = runner.invoke(
            cli,
            [
                "--config", str(config),
                "verify", "--claim", "x.", "--mode", "claim-only",
                "--endpoint", server.url, "--model", "m",
            ],
            env=env,
        )
    assert result.exit_code == 0

    # flags override both
    with serve(MockScript.fixed("True, ok.")) as server:
        result = runner.invoke(
            cli,
            [
                "--config", str(config),
                "verify", "--kg", _kg(fixtures_dir), "--claim", "x.", "--mode", "claim-only",
                "--endpoint", server.url, "--model", "m",
            ],
            env={"FACTGENIUS_KG": "/also/nonexistent"},
        )
    assert result.exit_code == 0


def test_config_file_supplies_defaults(runner, fixtures_dir, tmp_path, gold_table_mini):
    with serve(MockScript.oracle(gold_table_mini)) as server:
        config = tmp_path / "run.cfg"
        config.write_text(
            "\n".join(
                [
                    "# run settings",
                    f"kg = {_kg(fixtures_dir)}",
                    f"endpoint = {server.url}",
                    "model = mock-model",
                ]
            )
            + "\n",
            encoding="utf-8",
        )
        result = runner.invoke(
            cli, ["--config", str(config), "verify", "--claim", "A r B.", "--entities", "A,B"]
        )
    assert result.exit_code == 0
    assert "verdict: Supported" in result.output


# ------------------------------------------------------------------ evaluate


def test_evaluate_writes_run_directory(runner, fixtures_dir, tmp_path, gold_table):
    out_dir = tmp_path / "run"
    with serve(MockScript.oracle(gold_table)) as server:
        result = runner.invoke(
            cli,
            [
                "evaluate", "--kg", str(fixtures_dir / "eval_kg.jsonl"),
                "--dataset", str(fixtures_dir / "claims10.jsonl"),
                "--endpoint", server.url, "--model", "mock-model",
                "--out", str(out_dir), "--concurrency", "4",
            ],
        )
    assert result.exit_code == 0
    assert "TOTAL" in result.output and "1.000" in result.output
    for name in ("report.txt", "report.json", "per_claim.csv", "traces.jsonl", "run_config.json"):
        assert (out_dir / name).exists()
    report = json.loads((out_dir / "report.json").read_text(encoding="utf-8"))
    jsonschema.validate(report, _schema(fixtures_dir, "report.schema.json"))
    assert report["accuracy"] == 1.0
    traces = [json.loads(line) for line in (out_dir / "traces.jsonl").read_text(encoding="utf-8").splitlines()]
    assert len(traces) == 10
    run_config = json.loads((out_dir / "run_config.json").read_text(encoding="utf-8"))
    assert run_config["threshold"] == 90.0


def test_evaluate_schema_error_exits_nonzero(runner, fixtures_dir, tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "x"}\n', encoding="utf-8")
    result = runner.invoke(
        cli,
        [
            "evaluate", "--kg", str(fixtures_dir / "eval_kg.jsonl"),
            "--dataset", str(bad),
            "--endpoint", "http://localhost:1/x", "--model", "m",
        ],
    )
    assert result.exit_code == 1
    assert "line 1" in result.output


# ---------------------------------------------------------------------- mine


def test_mine_validates_candidates(runner, fixtures_dir, tmp_path):
    candidates = tmp_path / "cands.jsonl"
    candidates.write_text(
        '{"entity": "A", "candidates": ["r", "zzz"]}\n{"entity": "B", "candidates": ["~r"]}\n',
        encoding="utf-8",
    )
    result = runner.invoke(
        cli,
        ["mine", "--kg", _kg(fixtures_dir), "--candidates", str(candidates), "--json"],
    )
    assert result.exit_code == 0
    payload = json.loads(result.output)
    jsonschema.validate(payload, _schema(fixtures_dir, "mine.schema.json"))
    assert payload == {"A": ["r"], "B": ["~r"]}


def test_mine_empty_candidates_file(runner, fixtures_dir, tmp_path):
    candidates = tmp_path / "cands.jsonl"
    candidates.write_text("", encoding="utf-8")
    result = runner.invoke(
        cli, ["mine", "--kg", _kg(fixtures_dir), "--candidates", str(candidates), "--json"]
    )
    assert result.exit_code == 0
    assert json.loads(result.output) == {}


def test_mine_stage_one_flag(runner, fixtures_dir, tmp_path):
    candidates = tmp_path / "cands.jsonl"
    candidates.write_text('{"entity": "Y", "candidates": []}\n{"entity": "X", "candidates": ["spouse"]}\n', encoding="utf-8")
    kg_path = str(fixtures_dir / "stage2_kg.jsonl")
    stage1 = runner.invoke(cli, ["mine", "--kg", kg_path, "--candidates", str(candidates), "--stage", "1", "--json"])
    stage2 = runner.invoke(cli, ["mine", "--kg", kg_path, "--candidates", str(candidates), "--json"])
    assert json.loads(stage1.output)["Y"] == []
    assert json.loads(stage2.output)["Y"] == ["~spouse"]


# -------------------------------------------------------------- export-train


def test_export_train(runner, fixtures_dir, tmp_path, gold_table):
    out = tmp_path / "train.jsonl"
    with serve(MockScript.oracle(gold_table)) as server:
        result = runner.invoke(
            cli,
            [
                "export-train", "--kg", str(fixtures_dir / "eval_kg.jsonl"),
                "--dataset", str(fixtures_dir / "claims10.jsonl"),
                "--out", str(out),
                "--endpoint", server.url, "--model", "mock-model",
            ],
        )
    assert result.exit_code == 0
    assert "wrote 10 records" in result.output
    rows = [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines()]
    assert len(rows) == 10
    assert all(set(row) == {"id", "claim", "evidence", "label"} for row in rows)


# ----------------------------------------------------------------- mock spec


def test_mock_serve_rejects_bad_spec(runner):
    result = runner.invoke(cli, ["mock-serve", "--script", "bogus:x", "--port", "0"])
    assert result.exit_code == 1
    assert "error:" in result.output
