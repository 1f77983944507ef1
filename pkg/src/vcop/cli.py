"""Command line entry points.

    vcop ingest <paths...>
    vcop query --setting <s> --panel <file> [--display <kind>] [--instruction <text>]
    vcop evaluate --dataset <file> --settings <list> [--replay <scores-file>]
    vcop serve --config <file>

Exit codes: 0 success, 1 validation/parse findings, 2 input or I/O errors,
3 provider errors.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import bundled
from .config import AppConfig, ConfigError, build_runtime, load_app_config
from .corpus import parse_manual, validate_corpus
from .errors import VcopError
from .evaluation import (
    load_dataset,
    ablation,
    render_report_table,
    replay_reports,
    trial_records_jsonl,
)
from .pipeline import (
    GroundingViolationError,
    InputSetting,
    ProviderLabelError,
    ProviderTimeoutError,
    ProviderTransportError,
    build_query,
    respond,
)
from .situation import DisplayKind, parse_panel_text

_PROVIDER_ERRORS = (
    ProviderTimeoutError,
    ProviderTransportError,
    ProviderLabelError,
    GroundingViolationError,
)


def _fail(message: str, exit_code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(exit_code)


def _read_file(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        _fail(str(exc), 2)


def _setting(name: str) -> InputSetting:
    try:
        return InputSetting(name.upper())
    except ValueError:
        _fail(
            f"unknown setting {name!r} "
            f"(choose from {', '.join(s.value for s in InputSetting)})",
            2,
        )


def _runtime(config_path: str | None):
    try:
        config = load_app_config(config_path) if config_path else AppConfig()
        return build_runtime(config)
    except (ConfigError, VcopError, OSError) as exc:
        _fail(str(exc), 2)


@click.group()
def main():
    """Quick-access flight procedures from panel state and pilot calls."""


@main.command()
@click.argument("paths", nargs=-1, required=True, type=click.Path())
def ingest(paths):
    """Parse and validate manual files; exit 0 only when clean."""
    manuals = []
    for path in paths:
        text = _read_file(path)
        try:
            manuals.append(parse_manual(text))
        except VcopError as exc:
            _fail(f"{path}: {exc}", 1)
    report = validate_corpus(manuals)
    procedures = sum(1 for m in manuals for _ in m.procedures())
    click.echo(f"{len(manuals)} manuals, {procedures} procedures")
    if not report.ok:
        for finding in report.findings:
            click.echo(f"finding: {finding.code} {finding.subject}: {finding.detail}")
        sys.exit(1)
    click.echo("corpus clean")


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--setting", "setting_name", default="SNAPSHOT_PLUS_INSTRUCTION")
@click.option("--panel", "panel_path", type=click.Path(), required=True)
@click.option(
    "--display",
    "display_name",
    default="ENGINE_WARNING",
    help="Display kind the panel dump came from.",
)
@click.option("--instruction", default=None)
def query(config_path, setting_name, panel_path, display_name, instruction):
    """Interpret one panel dump and print the applicable checklist."""
    setting = _setting(setting_name)
    try:
        display = DisplayKind(display_name.upper())
    except ValueError:
        _fail(f"unknown display kind {display_name!r}", 2)
    panel = _read_file(panel_path)
    runtime = _runtime(config_path)
    try:
        if setting is InputSetting.OCR_PLUS_INSTRUCTION:
            ctx = build_query(
                setting, ocr_text=panel, display=display, instruction=instruction
            )
        else:
            snapshot = parse_panel_text(panel, display)
            ctx = build_query(setting, snapshot=snapshot, instruction=instruction)
    except VcopError as exc:
        _fail(str(exc), 2)
    try:
        response = respond(ctx, runtime.provider, runtime.index, runtime.corpus)
    except _PROVIDER_ERRORS as exc:
        _fail(str(exc), 3)

    condition = response.condition
    if condition.is_normal:
        click.echo("No anomaly detected")
        return
    labels = " ".join(condition.labels)
    click.echo(f"condition: {condition.condition_class.value} [{labels}]")
    if not response.hits:
        click.echo("no matching procedure in corpus")
        return
    citation = response.citation
    click.echo(
        f"citation: manual {citation.manual_id}, section "
        f"{citation.section_number}, page {citation.page}"
    )
    click.echo(response.excerpt)
    if len(response.hits) > 1:
        alternates = ", ".join(h.procedure_id for h in response.hits[1:])
        click.echo(f"alternatives: {alternates}")


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--dataset", "dataset_path", type=click.Path(), default=None)
@click.option(
    "--settings",
    "settings_csv",
    default=None,
    help="Comma-separated setting names; default: all three.",
)
@click.option(
    "--replay",
    "replay_path",
    type=click.Path(),
    default=None,
    help="Aggregate a per-trial score stream instead of running the pipeline.",
)
@click.option(
    "--records",
    "records_path",
    type=click.Path(),
    default=None,
    help="Where to write the per-trial record stream (JSONL).",
)
def evaluate(config_path, dataset_path, settings_csv, replay_path, records_path):
    """Score a dataset across input settings and print the accuracy table."""
    if replay_path is not None:
        try:
            reports = replay_reports(_read_file(replay_path))
        except VcopError as exc:
            _fail(str(exc), 2)
        click.echo(render_report_table(reports))
        return

    if dataset_path is None:
        samples = bundled.load_bundled_samples()
    else:
        try:
            samples = load_dataset(_read_file(dataset_path))
        except VcopError as exc:
            _fail(str(exc), 2)
    settings = (
        [_setting(s.strip()) for s in settings_csv.split(",") if s.strip()]
        if settings_csv
        else list(InputSetting)
    )
    runtime = _runtime(config_path)
    try:
        reports = ablation(
            samples, settings, runtime.provider, runtime.index, runtime.corpus
        )
    except _PROVIDER_ERRORS as exc:
        _fail(str(exc), 3)
    click.echo(render_report_table(reports))
    if records_path is not None:
        Path(records_path).write_text(trial_records_jsonl(reports), encoding="utf-8")
        click.echo(f"wrote per-trial records to {records_path}")


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--host", default="127.0.0.1")
def serve(config_path, host):
    """Run the HTTP service (endpoints under /api)."""
    import uvicorn

    from .service import create_app

    runtime = _runtime(config_path)
    app = create_app(runtime)
    uvicorn.run(app, host=host, port=runtime.config.port)


if __name__ == "__main__":
    main()
