"""Command line front door: serve the API, run batches, analyze logs.

Analysis commands emit line-oriented JSON so they compose with jq and
friends. A LOG argument accepts either an events.jsonl file or a save
directory containing one.
"""

from __future__ import annotations

import asyncio
import json
import logging
import sys
import time
from pathlib import Path

import click

from .batch import batch_run, read_tasks
from .config import load_server_config
from .errors import ColonyError
from .events import EventLog
from .replay import build_graph, classify_log, count_tokens
from .saves import SORT_KEYS, index_saves, search_saves, sort_saves


def _echo_json(obj) -> None:
    click.echo(json.dumps(obj, ensure_ascii=False))


def _load_log(path: Path) -> EventLog:
    try:
        return EventLog.load(path)
    except (ColonyError, OSError) as exc:
        raise click.ClickException(str(exc)) from exc


@click.group()
@click.version_option(package_name="colony")
def main():
    """Recursive multi-agent sessions: serve, batch-run, and analyze."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path), help="Server config file (YAML).")
@click.option("--host", default=None, help="Bind address (overrides config).")
@click.option("--port", default=None, type=int, help="Bind port (overrides config).")
@click.option("--static", "static_dir", default=None, type=click.Path(path_type=Path), help="Directory with a built frontend to serve at /.")
def serve(config_path: Path, host: str | None, port: int | None, static_dir: Path | None):
    """Start the HTTP + WebSocket server."""
    import uvicorn

    from .server import create_app

    logging.basicConfig(level=logging.INFO)
    try:
        config = load_server_config(config_path)
    except ColonyError as exc:
        raise click.ClickException(str(exc)) from exc
    app = create_app(config, static_dir=static_dir)
    uvicorn.run(app, host=host or config.host, port=port or config.port)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path), help="Server config file (YAML).")
@click.option("--tasks", "tasks_path", required=True, type=click.Path(exists=True, path_type=Path), help="Task list: plain lines, JSON array, or JSONL.")
@click.option("--concurrency", default=1, show_default=True, help="Sessions run at once.")
@click.option("--definition", default=None, help="System definition name (default: config's default).")
def run(config_path: Path, tasks_path: Path, concurrency: int, definition: str | None):
    """Run every task in its own session, saving each log."""
    logging.basicConfig(level=logging.INFO)
    try:
        config = load_server_config(config_path)
        system = config.definition(definition)
        tasks = read_tasks(tasks_path)
    except (ColonyError, KeyError) as exc:
        message = exc.args[0] if exc.args else str(exc)
        raise click.ClickException(str(message)) from exc
    batch_dir = config.save_root / time.strftime("batch-%Y%m%d-%H%M%S")
    report = asyncio.run(
        batch_run(tasks, system, batch_dir, concurrency=concurrency)
    )
    for result in report.results:
        _echo_json(result.to_payload())
    _echo_json(
        {
            "tasks": len(report.results),
            "succeeded": report.succeeded,
            "failed": report.failed,
            "save_root": str(batch_dir),
        }
    )


@main.command()
@click.argument("log", type=click.Path(exists=True, path_type=Path))
def tokens(log: Path):
    """Per-agent prompt/completion token totals for one log."""
    usage = count_tokens(_load_log(log).events)
    for agent_id, count in usage.per_agent.items():
        _echo_json({"agent": agent_id, **count.to_payload()})
    _echo_json({"agent": None, **usage.grand_total().to_payload()})


@main.command()
@click.argument("log", type=click.Path(exists=True, path_type=Path))
@click.option("--dot", is_flag=True, help="Emit Graphviz DOT text instead of JSON.")
def graph(log: Path, dot: bool):
    """The delegation graph of one log."""
    delegation_graph = build_graph(_load_log(log).events)
    if dot:
        click.echo(delegation_graph.to_dot())
    else:
        _echo_json(delegation_graph.to_payload())


def _iter_save_paths(path: Path):
    """One save per line: a log file, a single save dir, or a tree of saves."""
    if path.is_file() or (path / "events.jsonl").is_file():
        yield path
        return
    for entry in index_saves([path]):
        yield entry.path


@main.command()
@click.argument("path", type=click.Path(exists=True, path_type=Path))
@click.option("--root-anchored", is_flag=True, help="Only count chains that start at the root.")
def classify(path: Path, root_anchored: bool):
    """Commitment class (over/under/normal) per session log."""
    from .replay import build_graph as _build, classify_commitment

    for save_path in _iter_save_paths(path):
        try:
            graph_ = _build(_load_log(save_path).events)
            label = classify_commitment(graph_, root_anchored=root_anchored)
            _echo_json({"path": str(save_path), "class": label.value})
        except (ColonyError, ValueError, click.ClickException) as exc:
            _echo_json({"path": str(save_path), "error": str(exc)})


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False, path_type=Path))
def rates(directory: Path):
    """Aggregate over/undercommitment rates over a directory of saves."""
    counts = {"overcommitted": 0, "undercommitted": 0, "normal": 0}
    excluded = 0
    for entry in index_saves([directory]):
        try:
            counts[classify_log(entry.path).value] += 1
        except Exception:
            excluded += 1
    total = sum(counts.values())
    _echo_json(
        {
            "sessions": total,
            "excluded": excluded,
            "overcommitted": round(100.0 * counts["overcommitted"] / total, 1) if total else 0.0,
            "undercommitted": round(100.0 * counts["undercommitted"] / total, 1) if total else 0.0,
        }
    )


@main.command()
@click.argument("directories", nargs=-1, required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--sort", "sort_key", type=click.Choice(sorted(SORT_KEYS)), default=None, help="Sort by name, edit time, or event count.")
@click.option("--ascending", is_flag=True, help="Reverse the default descending order.")
@click.option("-q", "--query", default=None, help="Keep only titles containing this text.")
def index(directories: tuple[Path, ...], sort_key: str | None, ascending: bool, query: str | None):
    """List every save found under the given directories."""
    entries = index_saves(directories)
    if query:
        entries = search_saves(entries, query)
    if sort_key:
        entries = sort_saves(entries, sort_key, descending=not ascending)
    for entry in entries:
        _echo_json(entry.to_payload())


if __name__ == "__main__":
    sys.exit(main())
