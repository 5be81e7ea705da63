"""Command-line front end.

One executable, six subcommands: ``kg validate``, ``verify``, ``evaluate``,
``mine``, ``export-train``, and ``mock-serve``. Every flag can also be set
through a ``FACTGENIUS_*`` environment variable or a ``key=value`` config
file (flags win over environment, environment wins over file). Exit codes:
0 success, 1 runtime failure (one-line diagnostic on stderr), 2 usage error.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import evaluation, mining, mockllm, pipeline
from .gateway import GatewayError, LlmConfig
from .kg import load_kg

_RUNTIME_ERRORS = (ValueError, OSError, GatewayError, pipeline.ClaimVerificationError)


def _runtime_guard(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except _RUNTIME_ERRORS as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _parse_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise click.UsageError(f"config line {raw!r} is not key=value")
        value = value.strip().strip("\"'")
        values[key.strip().lower().replace("-", "_")] = value
    return values


@click.group()
@click.option(
    "--config",
    "config_path",
    envvar="FACTGENIUS_CONFIG",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="key=value file supplying flag defaults",
)
@click.pass_context
def cli(ctx: click.Context, config_path: str | None) -> None:
    """Fact verification over a knowledge graph."""
    if config_path:
        defaults = _parse_config_file(config_path)
        ctx.default_map = {
            "verify": defaults,
            "evaluate": defaults,
            "mine": defaults,
            "export-train": defaults,
            "mock-serve": defaults,
            "kg": {"validate": defaults},
        }


def _kg_option(func):
    return click.option(
        "--kg", required=True, envvar="FACTGENIUS_KG",
        help="knowledge graph JSONL file",
    )(func)


def _llm_options(func):
    for deco in reversed(
        [
            click.option("--endpoint", required=True, envvar="FACTGENIUS_ENDPOINT",
                         help="chat-completion endpoint URL"),
            click.option("--model", required=True, envvar="FACTGENIUS_MODEL",
                         help="model name sent with each request"),
            click.option("--temperature", type=float, default=0.0, show_default=True,
                         envvar="FACTGENIUS_TEMPERATURE"),
            click.option("--max-attempts", type=int, default=10, show_default=True,
                         envvar="FACTGENIUS_MAX_ATTEMPTS",
                         help="retry budget per conversation"),
            click.option("--timeout", type=float, default=60.0, show_default=True,
                         envvar="FACTGENIUS_TIMEOUT", help="request timeout (seconds)"),
            click.option("--max-parallel", type=int, default=8, show_default=True,
                         envvar="FACTGENIUS_MAX_PARALLEL",
                         help="cap on concurrent requests"),
        ]
    ):
        func = deco(func)
    return func


def _pipeline_options(func):
    for deco in reversed(
        [
            click.option("--mode", type=click.Choice([pipeline.MODE_CLAIM_ONLY, pipeline.MODE_EVIDENCE]),
                         default=pipeline.MODE_EVIDENCE, show_default=True, envvar="FACTGENIUS_MODE"),
            click.option("--stage", type=click.Choice(["1", "2"]), default="2", show_default=True,
                         envvar="FACTGENIUS_STAGE", help="1: per-entity validation only; 2: add pooling"),
            click.option("--threshold", type=float, default=90.0, show_default=True,
                         envvar="FACTGENIUS_THRESHOLD", help="fuzzy similarity cutoff (strict >)"),
            click.option("--per-relation-cap", type=int, default=5, show_default=True,
                         envvar="FACTGENIUS_PER_RELATION_CAP",
                         help="max evidence triples per (entity, relation)"),
            click.option("--options-cap", type=int, default=None, envvar="FACTGENIUS_OPTIONS_CAP",
                         help="truncate each entity's option list in the filter prompt"),
            click.option("--pool-reverse/--no-pool-reverse", default=True, show_default=True,
                         envvar="FACTGENIUS_POOL_REVERSE",
                         help="augment the stage-two pool with reverse labels"),
            click.option("--cache-dir", type=click.Path(file_okay=False), default=None,
                         envvar="FACTGENIUS_CACHE_DIR", help="replay cache directory"),
        ]
    ):
        func = deco(func)
    return func


def _build_config(
    mode: str,
    stage: str,
    threshold: float,
    per_relation_cap: int,
    options_cap: int | None,
    pool_reverse: bool,
    cache_dir: str | None,
    endpoint: str,
    model: str,
    temperature: float,
    max_attempts: int,
    timeout: float,
    max_parallel: int,
) -> pipeline.PipelineConfig:
    llm = LlmConfig(
        endpoint_url=endpoint,
        model_name=model,
        temperature=temperature,
        max_attempts=max_attempts,
        request_timeout=timeout,
        max_parallel_requests=max_parallel,
    )
    return pipeline.PipelineConfig(
        llm=llm,
        mode=mode,
        stage=int(stage),
        threshold=threshold,
        per_relation_cap=per_relation_cap,
        options_cap=options_cap,
        pool_reverse=pool_reverse,
        cache_dir=cache_dir,
    )


@cli.group()
def kg() -> None:
    """Knowledge graph utilities."""


@kg.command("validate")
@_kg_option
@click.option("--json", "as_json", is_flag=True, help="machine-readable output")
@_runtime_guard
def kg_validate(kg: str, as_json: bool) -> None:
    """Load a graph file, repairing and reporting reverse-closure gaps."""
    graph = load_kg(kg)
    if as_json:
        payload = {
            "entities": graph.entity_count,
            "edges": graph.edge_count,
            "closure_repairs": graph.closure_repairs,
        }
        click.echo(json.dumps(payload, indent=2))
    else:
        click.echo(f"entities: {graph.entity_count}")
        click.echo(f"edges: {graph.edge_count}")
        click.echo(f"closure repairs: {graph.closure_repairs}")


@cli.command()
@_kg_option
@click.option("--claim", required=True, envvar="FACTGENIUS_CLAIM", help="claim text to verify")
@click.option("--entities", default="", envvar="FACTGENIUS_ENTITIES",
              help="comma-separated entity ids mentioned in the claim")
@_pipeline_options
@_llm_options
@click.option("--json", "as_json", is_flag=True, help="print the full trace as JSON")
@_runtime_guard
def verify(kg: str, claim: str, entities: str, as_json: bool, **options) -> None:
    """Verify a single claim and print the verdict with its trace."""
    cfg = _build_config(**options)
    graph = load_kg(kg)
    entity_list = [item.strip() for item in entities.split(",") if item.strip()]
    record = pipeline.ClaimRecord(id="cli", claim=claim, entities=entity_list)
    with pipeline.Pipeline(cfg, graph) as runner:
        trace = runner.verify_claim(record)
    if as_json:
        click.echo(json.dumps(trace.as_dict(), indent=2, ensure_ascii=False, sort_keys=True))
        return
    verdict = trace.verdict
    click.echo(f"verdict: {verdict.label}")
    if verdict.explanation:
        click.echo(f"explanation: {verdict.explanation}")
    click.echo(f"failed: {str(trace.failed).lower()}")
    click.echo(f"attempts: filter={trace.attempts_filter} classify={trace.attempts_classify}")
    if trace.evidence_lines:
        click.echo("evidence:")
        for line in trace.evidence_lines:
            click.echo(f"  {line}")


@cli.command()
@_kg_option
@click.option("--dataset", required=True, envvar="FACTGENIUS_DATASET",
              help="claims JSONL file")
@_pipeline_options
@_llm_options
@click.option("--out", type=click.Path(file_okay=False), default=None,
              envvar="FACTGENIUS_OUT", help="directory for report files and traces")
@click.option("--concurrency", type=int, default=1, show_default=True,
              envvar="FACTGENIUS_CONCURRENCY", help="parallel claim workers")
@_runtime_guard
def evaluate(kg: str, dataset: str, out: str | None, concurrency: int, **options) -> None:
    """Run the pipeline over a labeled dataset and report accuracy."""
    cfg = _build_config(**options)
    graph = load_kg(kg)
    records = evaluation.load_dataset(dataset)
    with pipeline.Pipeline(cfg, graph) as runner:
        traces = runner.run(records, workers=max(1, concurrency))
    report = evaluation.aggregate(records, traces)
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_bytes(evaluation.render_report(report, "text"))
        (out / "report.json").write_bytes(evaluation.render_report(report, "json"))
        (out / "per_claim.csv").write_bytes(evaluation.render_report(report, "csv"))
        pipeline.write_traces(traces, out / "traces.jsonl")
        (out / "run_config.json").write_text(
            json.dumps(cfg.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    click.echo(evaluation.render_report(report, "text").decode("utf-8"), nl=False)


@cli.command()
@_kg_option
@click.option("--candidates", required=True, envvar="FACTGENIUS_CANDIDATES",
              help="JSONL of {\"entity\", \"candidates\"} rows")
@click.option("--stage", type=click.Choice(["1", "2"]), default="2", show_default=True,
              envvar="FACTGENIUS_STAGE")
@click.option("--threshold", type=float, default=90.0, show_default=True,
              envvar="FACTGENIUS_THRESHOLD")
@click.option("--pool-reverse/--no-pool-reverse", default=True, show_default=True,
              envvar="FACTGENIUS_POOL_REVERSE")
@click.option("--json", "as_json", is_flag=True, help="machine-readable output")
@_runtime_guard
def mine(kg: str, candidates: str, stage: str, threshold: float,
         pool_reverse: bool, as_json: bool) -> None:
    """Validate pre-supplied candidate relations against the graph (no model)."""
    graph = load_kg(kg)
    proposals: dict[str, list[str]] = {}
    with Path(candidates).open("r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            try:
                row = json.loads(raw)
                entity, proposed = row["entity"], row["candidates"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"candidates line {line_no}: {exc}") from exc
            proposals[entity] = list(proposed)
    validated = mining.mine(graph, proposals, stage=int(stage), threshold=threshold,
                            pool_reverse=pool_reverse)
    if as_json:
        click.echo(json.dumps(validated, indent=2, ensure_ascii=False, sort_keys=True))
    else:
        for entity, labels in validated.items():
            click.echo(f"{entity}: {', '.join(labels) if labels else '(none)'}")


@cli.command("export-train")
@_kg_option
@click.option("--dataset", required=True, envvar="FACTGENIUS_DATASET")
@click.option("--out", required=True, envvar="FACTGENIUS_OUT",
              type=click.Path(dir_okay=False), help="output JSONL file")
@_pipeline_options
@_llm_options
@_runtime_guard
def export_train(kg: str, dataset: str, out: str, **options) -> None:
    """Write (claim, evidence, label) training rows for classifier fine-tuning."""
    cfg = _build_config(**options)
    graph = load_kg(kg)
    records = evaluation.load_dataset(dataset)
    with pipeline.Pipeline(cfg, graph) as runner:
        count = runner.export_training_data(records, out)
    click.echo(f"wrote {count} records to {out}")


@cli.command("mock-serve")
@click.option("--script", required=True, envvar="FACTGENIUS_SCRIPT",
              help="behavior spec: echo | fixed:TEXT | fail:N:TEXT | status:CODE | "
                   "oracle:GOLD.json | oracle-invert:GOLD.json")
@click.option("--port", type=int, default=8080, show_default=True, envvar="FACTGENIUS_PORT")
@click.option("--host", default="127.0.0.1", show_default=True, envvar="FACTGENIUS_HOST")
@_runtime_guard
def mock_serve(script: str, port: int, host: str) -> None:
    """Serve a deterministic mock model over the chat-completion protocol."""
    script = mockllm.script_from_spec(script)
    server = mockllm.serve(script, host=host, port=port)
    click.echo(f"mock model serving at {server.url} (Ctrl-C to stop)")
    try:
        server.wait()
    except KeyboardInterrupt:
        server.close()


def main() -> None:
    cli(prog_name="factgenius")


if __name__ == "__main__":
    main()
