"""Event envelope, built-in event kinds, and the append-only JSONL log.

Every state change in a session is captured as an :class:`Event` and written
as one JSON object per line. The JSONL file is the sole record of system
history: replay rebuilds full state from it, and its key names are a
compatibility surface for external analysis scripts.

Each serialized event always carries a ``type`` key and a ``timestamp`` key;
all payload fields are flattened into the same object. Ordering authority is
file position, not timestamp (timestamps can tie under concurrency).
"""

from __future__ import annotations

import asyncio
import enum
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator

from .errors import LifecycleError, LogParseError, UnknownEventTypeError
from .messages import ChatMessage

logger = logging.getLogger(__name__)


class BuiltinEventKind(enum.Enum):
    """The six reserved event type discriminators."""

    SPAWN = "kani_spawn"
    STATE_CHANGE = "kani_state_change"
    TOKENS_USED = "tokens_used"
    MESSAGE = "kani_message"
    ROOT_MESSAGE = "root_message"
    ROUND_COMPLETE = "round_complete"


SPAWN = BuiltinEventKind.SPAWN.value
STATE_CHANGE = BuiltinEventKind.STATE_CHANGE.value
TOKENS_USED = BuiltinEventKind.TOKENS_USED.value
MESSAGE = BuiltinEventKind.MESSAGE.value
ROOT_MESSAGE = BuiltinEventKind.ROOT_MESSAGE.value
ROUND_COMPLETE = BuiltinEventKind.ROUND_COMPLETE.value

BUILTIN_EVENT_TYPES = frozenset(k.value for k in BuiltinEventKind)

#: Delivered on subscription streams (never logged) when a slow subscriber
#: overran its buffer; payload carries the number of dropped events.
GAP_MARKER = "subscription_gap"

#: Delivered (and logged if possible) when the log writer fails; the session
#: is degraded and the run is no longer replayable.
LOG_FAILURE = "log_failure"

#: Payload keys per built-in type, in serialization order. ``type`` and
#: ``timestamp`` always come first on the wire. This mapping is pinned by the
#: schema-conformance tests; changing it is a format break.
BUILTIN_PAYLOAD_KEYS: dict[str, tuple[str, ...]] = {
    SPAWN: (
        "id",
        "parent",
        "children",
        "depth",
        "state",
        "history",
        "engine_desc",
        "tool_names",
        "system_prompt",
    ),
    STATE_CHANGE: ("id", "state"),
    TOKENS_USED: ("id", "prompt_tokens", "completion_tokens"),
    MESSAGE: ("id", "role", "content", "tool_calls", "tool_call_id"),
    ROOT_MESSAGE: ("id", "role", "content", "tool_calls", "tool_call_id"),
    ROUND_COMPLETE: ("id",),
}

_custom_event_types: set[str] = set()
_RESERVED = BUILTIN_EVENT_TYPES | {GAP_MARKER}


def register_custom_event(name: str) -> None:
    """Register a custom event type name so it may be dispatched.

    Custom payloads are free-form JSON; only the name is declared. Names must
    not collide with the built-in discriminators.
    """
    if not name:
        raise ValueError("event type name must be non-empty")
    if name in _RESERVED:
        raise ValueError(f"event type {name!r} collides with a built-in type")
    _custom_event_types.add(name)


def registered_custom_events() -> frozenset[str]:
    return frozenset(_custom_event_types)


register_custom_event(LOG_FAILURE)


@dataclass
class Event:
    """A typed, timestamped record of one system occurrence.

    ``data`` holds the type-specific payload; on the wire its fields are
    flattened next to ``type`` and ``timestamp``. ``index`` is the event's
    position in its session's log, assigned at dispatch time; it is implicit
    in file order and never serialized.
    """

    type: str
    timestamp: float = 0.0
    data: dict[str, Any] = field(default_factory=dict)
    index: int | None = field(default=None, compare=False)

    def serialize(self) -> str:
        """Render as a single JSON line (no trailing newline)."""
        obj: dict[str, Any] = {"type": self.type, "timestamp": self.timestamp}
        for key, value in self.data.items():
            if key in ("type", "timestamp"):
                raise ValueError(f"payload field {key!r} collides with envelope key")
            obj[key] = value
        return json.dumps(obj, ensure_ascii=False)

    @classmethod
    def parse(cls, line: str, *, line_number: int = 0, path: str | None = None) -> "Event":
        """Parse one log line.

        Unknown types parse into a generic event with all fields preserved,
        so logs written by newer code remain readable.
        """
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogParseError(
                f"malformed JSON: {exc.msg}", line_number=line_number, path=path
            ) from exc
        if not isinstance(obj, dict):
            raise LogParseError(
                "line is not a JSON object", line_number=line_number, path=path
            )
        if "type" not in obj or not obj["type"]:
            raise LogParseError(
                "event is missing its type key", line_number=line_number, path=path
            )
        if "timestamp" not in obj:
            raise LogParseError(
                "event is missing its timestamp key", line_number=line_number, path=path
            )
        type_ = str(obj.pop("type"))
        timestamp = float(obj.pop("timestamp"))
        return cls(type=type_, timestamp=timestamp, data=obj)


# ---------------------------------------------------------------------------
# Built-in event constructors
# ---------------------------------------------------------------------------


def spawn_event(node_payload: dict[str, Any]) -> Event:
    """Full state of a freshly spawned agent (see AgentNode.to_payload)."""
    return Event(SPAWN, data=node_payload)


def state_change_event(agent_id: str, state: str) -> Event:
    return Event(STATE_CHANGE, data={"id": agent_id, "state": state})


def tokens_used_event(agent_id: str, prompt_tokens: int, completion_tokens: int) -> Event:
    return Event(
        TOKENS_USED,
        data={
            "id": agent_id,
            "prompt_tokens": prompt_tokens,
            "completion_tokens": completion_tokens,
        },
    )


def message_event(agent_id: str, message: ChatMessage, *, root: bool = False) -> Event:
    return Event(
        ROOT_MESSAGE if root else MESSAGE,
        data={"id": agent_id, **message.to_dict()},
    )


def round_complete_event(root_id: str) -> Event:
    return Event(ROUND_COMPLETE, data={"id": root_id})


# ---------------------------------------------------------------------------
# Log files
# ---------------------------------------------------------------------------

EVENTS_FILE_NAME = "events.jsonl"


def iter_events(path: Path | str) -> Iterator[Event]:
    """Yield parsed events from a JSONL file in line order."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            yield Event.parse(line, line_number=line_number, path=str(path))


@dataclass
class EventLog:
    """An in-memory, ordered view of one session's JSONL log."""

    events: list[Event]
    path: Path | None = None

    @classmethod
    def load(cls, path: Path | str) -> "EventLog":
        """Read a log file, resolving session directories to their JSONL."""
        path = Path(path)
        if path.is_dir():
            path = path / EVENTS_FILE_NAME
        events = list(iter_events(path))
        for i, event in enumerate(events):
            event.index = i
        return cls(events=events, path=path)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __getitem__(self, index):
        return self.events[index]


class JsonlWriter:
    """Append-only, line-buffered JSONL writer. One line per event, flushed."""

    def __init__(self, path: Path):
        self.path = path
        self._fh = path.open("a", encoding="utf-8")

    def write_line(self, line: str) -> None:
        self._fh.write(line + "\n")
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()


# ---------------------------------------------------------------------------
# Dispatch and subscriptions
# ---------------------------------------------------------------------------

_CLOSE = object()  # subscription stream terminator


class Subscription:
    """A live, ordered stream of events with a bounded buffer.

    Iterate with ``async for``. If the consumer falls behind by more than the
    buffer size, intervening events are dropped and a single gap-marker event
    (type ``subscription_gap``, payload ``{"dropped": n}``) is delivered in
    their place.
    """

    def __init__(self, types: frozenset[str] | None, buffer_size: int):
        self.types = types
        self.queue: asyncio.Queue = asyncio.Queue(maxsize=buffer_size)
        self.dropped = 0
        self.closed = False

    def matches(self, event: Event) -> bool:
        return self.types is None or event.type in self.types

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        try:
            self.queue.put_nowait(_CLOSE)
        except asyncio.QueueFull:
            self.queue.get_nowait()  # sacrifice the oldest buffered event
            self.queue.put_nowait(_CLOSE)

    def __aiter__(self):
        return self

    async def __anext__(self) -> Event:
        item = await self.queue.get()
        if item is _CLOSE:
            raise StopAsyncIteration
        return item


class EventBus:
    """Serializes event dispatch: stamp, append to the log, fan out.

    Append order defines the session's total order. Delivery to subscribers
    never blocks the appender; slow subscribers get gap markers instead.
    """

    def __init__(
        self,
        writer: JsonlWriter | None,
        *,
        clock: Callable[[], float] = time.time,
        buffer_size: int = 1024,
    ):
        self._writer = writer
        self._clock = clock
        self._buffer_size = buffer_size
        self._subscriptions: list[Subscription] = []
        self._last_timestamp = 0.0
        self.event_count = 0
        self.replayable = True
        self.closed = False

    def dispatch(self, event: Event) -> Event:
        """Stamp, persist, and deliver one event. Returns the stamped event."""
        if self.closed:
            raise LifecycleError("cannot dispatch: session log is closed")
        if event.type not in BUILTIN_EVENT_TYPES and event.type not in _custom_event_types:
            raise UnknownEventTypeError(
                f"event type {event.type!r} is neither built-in nor registered"
            )
        # Wall clocks can step backwards; log order is authoritative, but keep
        # timestamps non-decreasing so they are sane to read.
        now = self._clock()
        if now < self._last_timestamp:
            now = self._last_timestamp
        self._last_timestamp = now
        event.timestamp = now
        event.index = self.event_count
        self.event_count += 1

        if self._writer is not None and self.replayable:
            try:
                self._writer.write_line(event.serialize())
            except OSError as exc:
                self._degrade(exc)
        self._fan_out(event)
        return event

    def _degrade(self, exc: OSError) -> None:
        logger.error("event log write failed, session is no longer replayable: %s", exc)
        self.replayable = False
        alarm = Event(LOG_FAILURE, timestamp=self._clock(), data={"error": str(exc)})
        self._fan_out(alarm)

    def _fan_out(self, event: Event) -> None:
        for sub in list(self._subscriptions):
            if sub.closed or not sub.matches(event):
                continue
            if sub.dropped:
                # Deliver the gap marker only once there is room for it plus
                # the current event; otherwise keep counting drops.
                if self._buffer_size - sub.queue.qsize() >= 2:
                    sub.queue.put_nowait(
                        Event(GAP_MARKER, timestamp=event.timestamp, data={"dropped": sub.dropped})
                    )
                    sub.dropped = 0
                else:
                    sub.dropped += 1
                    continue
            try:
                sub.queue.put_nowait(event)
            except asyncio.QueueFull:
                sub.dropped += 1

    def subscribe(self, types: Iterable[str] | None = None) -> Subscription:
        """Open a live stream of every matching event dispatched from now on."""
        if self.closed:
            raise LifecycleError("cannot subscribe: session log is closed")
        sub = Subscription(
            frozenset(types) if types is not None else None, self._buffer_size
        )
        self._subscriptions.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        if sub in self._subscriptions:
            self._subscriptions.remove(sub)
        sub.close()

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        for sub in list(self._subscriptions):
            self.unsubscribe(sub)
        if self._writer is not None:
            self._writer.close()
