"""Session save directories: the header file and the save-browser index.

A save is one directory holding ``events.jsonl`` (the source of truth) and a
small ``session.json`` header carrying the session id, title, and creation
time so the browser does not have to scan logs for metadata.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

from .events import EVENTS_FILE_NAME

logger = logging.getLogger(__name__)

HEADER_FILE_NAME = "session.json"


def write_header(
    directory: Path,
    *,
    session_id: str,
    title: str,
    created: float,
    replayable: bool = True,
) -> None:
    payload = {
        "id": session_id,
        "title": title,
        "created": created,
        "replayable": replayable,
    }
    (directory / HEADER_FILE_NAME).write_text(
        json.dumps(payload, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def read_header(directory: Path) -> dict[str, Any]:
    raw = (directory / HEADER_FILE_NAME).read_text(encoding="utf-8")
    header = json.loads(raw)
    if not isinstance(header, dict) or "id" not in header:
        raise ValueError(f"not a session header: {directory / HEADER_FILE_NAME}")
    return header


def count_event_lines(path: Path) -> int:
    with path.open("r", encoding="utf-8") as fh:
        return sum(1 for line in fh if line.strip())


@dataclass
class SaveIndexEntry:
    """Metadata for one logged session, as shown in the save browser."""

    session_id: str
    title: str
    event_count: int
    last_edit_time: float
    path: Path
    corrupt: bool = False
    replayable: bool = True

    def to_payload(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "title": self.title,
            "event_count": self.event_count,
            "last_edit_time": self.last_edit_time,
            "path": str(self.path),
            "corrupt": self.corrupt,
            "replayable": self.replayable,
        }


def index_saves(directories: Iterable[Path | str]) -> list[SaveIndexEntry]:
    """Recursively find session saves under the given directories.

    A directory is a save iff it contains ``events.jsonl``. Unreadable
    directories are skipped with a warning; saves with corrupt headers are
    still listed, flagged, with the directory name standing in for missing
    metadata. Entries reflect a point-in-time line count and may trail a
    live, still-appending session.
    """
    entries: list[SaveIndexEntry] = []
    for root in directories:
        root = Path(root)
        if not root.is_dir():
            logger.warning("save directory %s is unreadable or missing; skipping", root)
            continue
        try:
            candidates = sorted(root.rglob(EVENTS_FILE_NAME))
        except OSError as exc:
            logger.warning("cannot scan %s: %s; skipping", root, exc)
            continue
        for events_path in candidates:
            directory = events_path.parent
            try:
                event_count = count_event_lines(events_path)
                last_edit = events_path.stat().st_mtime
            except OSError as exc:
                logger.warning("cannot read %s: %s; skipping", events_path, exc)
                continue
            corrupt = False
            session_id = directory.name
            title = directory.name
            replayable = True
            try:
                header = read_header(directory)
                session_id = str(header["id"])
                title = str(header.get("title") or directory.name)
                replayable = bool(header.get("replayable", True))
            except (OSError, ValueError) as exc:
                logger.warning("corrupt header in %s: %s", directory, exc)
                corrupt = True
            entries.append(
                SaveIndexEntry(
                    session_id=session_id,
                    title=title,
                    event_count=event_count,
                    last_edit_time=last_edit,
                    path=directory,
                    corrupt=corrupt,
                    replayable=replayable,
                )
            )
    return entries


SORT_KEYS = {
    "name": lambda e: e.title.casefold(),
    "edit": lambda e: e.last_edit_time,
    "events": lambda e: e.event_count,
}


def sort_saves(
    entries: list[SaveIndexEntry], key: str = "edit", *, descending: bool = True
) -> list[SaveIndexEntry]:
    """Order entries by name, edit time, or number of events."""
    try:
        key_fn = SORT_KEYS[key]
    except KeyError:
        raise ValueError(f"unknown sort key {key!r}; expected one of {sorted(SORT_KEYS)}") from None
    return sorted(entries, key=key_fn, reverse=descending)


def search_saves(entries: list[SaveIndexEntry], query: str) -> list[SaveIndexEntry]:
    """Case-insensitive substring search over save titles."""
    needle = query.casefold()
    return [e for e in entries if needle in e.title.casefold()]
