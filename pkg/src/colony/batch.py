"""Run a list of tasks unattended, one session and save directory each.

Failures are data: a task whose engine errors or times out is recorded as
failed in the report and the remaining tasks keep running. Every session is
closed (and its log sealed) no matter how its round ended.
"""

from __future__ import annotations

import asyncio
import json
import re
import secrets
import time
from dataclasses import dataclass
from pathlib import Path

from .agents import AgentConfig
from .config import SystemDefinition
from .errors import ConfigError
from .session import Session

_SLUG_RE = re.compile(r"[^a-z0-9]+")


def _slug(text: str, limit: int = 24) -> str:
    slug = _SLUG_RE.sub("-", text.lower()).strip("-")
    return slug[:limit].rstrip("-") or "task"


def read_tasks(path: Path | str) -> list[str]:
    """Load the task list: a JSON array, JSONL records, or plain lines.

    JSONL records may be bare strings or objects with a ``task`` key. Blank
    lines are skipped everywhere.
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read task file {path}: {exc}") from exc
    try:
        if path.suffix == ".json":
            data = json.loads(raw)
            if not isinstance(data, list):
                raise ConfigError(f"task file {path} must contain a JSON array")
            return [str(item) for item in data if str(item).strip()]
        if path.suffix == ".jsonl":
            tasks = []
            for line in raw.splitlines():
                if not line.strip():
                    continue
                record = json.loads(line)
                text = record.get("task") if isinstance(record, dict) else record
                if text is None:
                    raise ConfigError(f"task file {path}: record without a 'task' key")
                if str(text).strip():
                    tasks.append(str(text))
            return tasks
    except json.JSONDecodeError as exc:
        raise ConfigError(f"task file {path} is not valid JSON: {exc}") from exc
    return [line.strip() for line in raw.splitlines() if line.strip()]


@dataclass
class TaskResult:
    """Outcome of one batch task."""

    task: str
    save_dir: str
    completed: bool
    error: str | None
    wall_time: float

    def to_payload(self) -> dict:
        return {
            "task": self.task,
            "save_dir": self.save_dir,
            "completed": self.completed,
            "error": self.error,
            "wall_time": round(self.wall_time, 3),
        }


@dataclass
class BatchReport:
    results: list[TaskResult]

    @property
    def succeeded(self) -> int:
        return sum(1 for r in self.results if r.completed)

    @property
    def failed(self) -> int:
        return len(self.results) - self.succeeded

    def to_payload(self) -> dict:
        return {
            "tasks": len(self.results),
            "succeeded": self.succeeded,
            "failed": self.failed,
            "results": [r.to_payload() for r in self.results],
        }


async def batch_run(
    tasks: list[str],
    definition: SystemDefinition | AgentConfig,
    save_root: Path | str,
    *,
    concurrency: int = 1,
) -> BatchReport:
    """Run every task to completion with at most ``concurrency`` in flight.

    Results come back in task order. ``definition`` may be a config-file
    definition or a raw AgentConfig (handy in tests).
    """
    if concurrency < 1:
        raise ValueError("concurrency must be >= 1")
    save_root = Path(save_root)
    limiter = asyncio.Semaphore(concurrency)

    async def run_one(index: int, text: str) -> TaskResult:
        async with limiter:
            # random suffix keeps re-runs and duplicate tasks from colliding
            save_dir = save_root / f"{index:03d}-{_slug(text)}-{secrets.token_hex(3)}"
            config = (
                definition.agent_config()
                if isinstance(definition, SystemDefinition)
                else definition
            )
            session = Session(config, save_dir=save_dir, title=text)
            started = time.perf_counter()
            error = None
            try:
                await session.run_round(text)
            except Exception as exc:
                error = f"{type(exc).__name__}: {exc}"
            finally:
                await session.close()
            return TaskResult(
                task=text,
                save_dir=str(save_dir),
                completed=error is None,
                error=error,
                wall_time=time.perf_counter() - started,
            )

    results = await asyncio.gather(*(run_one(i, t) for i, t in enumerate(tasks)))
    return BatchReport(results=list(results))
