"""HTTP and WebSocket API hosting live sessions and saved replays.

REST handles lifecycle and queries; one WebSocket per session view carries
the live stream. Wire frames:

- ``{"frame": "sync", "index": n, "session": ..., "state": ...}`` sent once
  on connect; the fold of the first n log events equals ``state``.
- ``{"frame": "event", "index": n, "event": ...}`` one per dispatched event,
  in dispatch order, starting at the sync index.
- ``{"frame": "delta", "id": ..., "seq": n, "text": ...}`` transient
  streaming chunks; cosmetic, never logged.
- ``{"frame": "control", "kind": ...}`` lifecycle and errors
  (``session_closed``, ``pong``).
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import secrets
from collections import OrderedDict
from pathlib import Path

import anyio
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .config import ServerConfig
from .errors import CapacityError, ColonyError, LogParseError
from .events import EventLog
from .messages import ChatRole
from .replay import (
    END_OF_LOG,
    Replayer,
    seek_next_for_agent,
    seek_next_root_message,
    seek_prev_for_agent,
    seek_prev_root_message,
)
from .saves import SaveIndexEntry, SORT_KEYS, index_saves, search_saves, sort_saves
from .session import Session

#: replayers kept warm; least recently used is evicted first
_REPLAYER_CACHE = 8


class ServerState:
    """Mutable server-side state: live sessions plus a replayer cache."""

    def __init__(self, config: ServerConfig):
        self.config = config
        self.sessions: dict[str, Session] = {}
        self._rounds: dict[str, asyncio.Task] = {}
        self._replayers: OrderedDict[str, tuple[tuple, Replayer]] = OrderedDict()

    # -- sessions --

    @property
    def active_count(self) -> int:
        return sum(1 for s in self.sessions.values() if not s.closed)

    def create_session(self, definition_name: str | None, title: str = "") -> Session:
        definition = self.config.definition(definition_name)  # KeyError on unknown
        if self.active_count >= self.config.max_sessions:
            raise CapacityError(
                f"server is at its session cap ({self.config.max_sessions}); "
                "close a session first"
            )
        session_id = secrets.token_hex(8)
        session = Session(
            definition.agent_config(),
            save_dir=self.config.save_root / session_id,
            session_id=session_id,
            title=title,
        )
        session.start()
        self.sessions[session_id] = session
        return session

    def session(self, session_id: str) -> Session:
        return self.sessions[session_id]  # KeyError on unknown

    def round_busy(self, session_id: str) -> bool:
        task = self._rounds.get(session_id)
        if task is not None and not task.done():
            return True
        session = self.sessions.get(session_id)
        return session is not None and session.round_in_progress

    def start_round(self, session: Session, text: str) -> asyncio.Task:
        task = asyncio.create_task(session.run_round(text))
        self._rounds[session.id] = task
        task.add_done_callback(lambda t: self._finish_round(session.id, t))
        return task

    def _finish_round(self, session_id: str, task: asyncio.Task) -> None:
        if self._rounds.get(session_id) is task:
            del self._rounds[session_id]
        if not task.cancelled():
            task.exception()  # background failures are already logged as events

    async def close_session(self, session_id: str) -> Session:
        session = self.session(session_id)
        await session.close()
        return session

    async def close_all(self) -> None:
        for session in list(self.sessions.values()):
            await session.close()

    # -- saves and replays --

    def save_entries(
        self,
        *,
        sort: str | None = None,
        descending: bool = True,
        query: str | None = None,
    ) -> list[SaveIndexEntry]:
        entries = index_saves(self.config.save_dirs)
        if query:
            entries = search_saves(entries, query)
        if sort:
            entries = sort_saves(entries, sort, descending=descending)
        return entries

    def find_save(self, save_id: str) -> SaveIndexEntry | None:
        for entry in index_saves(self.config.save_dirs):
            if entry.session_id == save_id:
                return entry
        return None

    def replayer(self, save_id: str) -> Replayer:
        """Checkpointed replayer for one save, reloaded when the file changes."""
        entry = self.find_save(save_id)
        if entry is None:
            raise KeyError(save_id)
        events_path = entry.path / "events.jsonl"
        stat = events_path.stat()
        fingerprint = (stat.st_size, stat.st_mtime_ns)
        cached = self._replayers.get(save_id)
        if cached is not None and cached[0] == fingerprint:
            self._replayers.move_to_end(save_id)
            return cached[1]
        replayer = Replayer(EventLog.load(entry.path))  # LogParseError on corrupt
        self._replayers[save_id] = (fingerprint, replayer)
        self._replayers.move_to_end(save_id)
        while len(self._replayers) > _REPLAYER_CACHE:
            self._replayers.popitem(last=False)
        return replayer


class CreateSessionRequest(BaseModel):
    definition: str | None = None
    title: str = ""


class MessageRequest(BaseModel):
    text: str
    wait: bool = False


def _session_state_payload(session: Session) -> dict:
    return {
        "root_id": session.root.id if session.root is not None else None,
        "agents": {
            agent_id: node.to_payload() for agent_id, node in session.live_state().items()
        },
    }


def _event_payload(event) -> dict:
    return {"index": event.index, "event": json.loads(event.serialize())}


def _is_disconnect(exc: BaseException) -> bool:
    """True when the exception (or every leaf of an exception group) is a
    client disconnect."""
    if isinstance(exc, WebSocketDisconnect):
        return True
    nested = getattr(exc, "exceptions", None)
    return nested is not None and bool(nested) and all(_is_disconnect(e) for e in nested)


def create_app(config: ServerConfig, *, static_dir: Path | str | None = None) -> FastAPI:
    """Build the application around one server config.

    ``static_dir`` optionally mounts a built frontend at ``/``. The server
    only ever writes under ``config.save_root``.
    """
    state = ServerState(config)

    @contextlib.asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        await state.close_all()

    app = FastAPI(title="colony", lifespan=lifespan)
    app.state.colony = state

    # -- definitions and sessions --

    @app.get("/api/definitions")
    def list_definitions():
        return {
            "default": config.default_definition,
            "definitions": [d.summary() for d in config.definitions.values()],
        }

    @app.get("/api/sessions")
    def list_sessions():
        return {"sessions": [s.handle() for s in state.sessions.values()]}

    @app.post("/api/sessions", status_code=201)
    def create_session(body: CreateSessionRequest):
        try:
            session = state.create_session(body.definition, title=body.title)
        except KeyError as exc:
            raise HTTPException(404, detail=str(exc.args[0])) from None
        except CapacityError as exc:
            raise HTTPException(429, detail=str(exc)) from None
        return session.handle()

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        try:
            return state.session(session_id).handle()
        except KeyError:
            raise HTTPException(404, detail=f"no session {session_id}") from None

    @app.post("/api/sessions/{session_id}/message")
    async def send_message(session_id: str, body: MessageRequest):
        try:
            session = state.session(session_id)
        except KeyError:
            raise HTTPException(404, detail=f"no session {session_id}") from None
        if session.closed:
            raise HTTPException(409, detail="session is closed")
        if not body.text.strip():
            raise HTTPException(422, detail="message text must be non-empty")
        if state.round_busy(session_id):
            raise HTTPException(409, detail="a round is already in progress")
        if body.wait:
            try:
                messages = await session.run_round(body.text)
            except ColonyError as exc:
                return {
                    "status": "error",
                    "error": f"{type(exc).__name__}: {exc}",
                    "session": session.handle(),
                }
            reply = "\n".join(
                m.content for m in messages if m.role is ChatRole.ASSISTANT and m.content
            )
            return {"status": "complete", "reply": reply, "session": session.handle()}
        state.start_round(session, body.text)
        return {"status": "started", "session": session.handle()}

    @app.post("/api/sessions/{session_id}/close")
    async def close_session(session_id: str):
        try:
            session = await state.close_session(session_id)
        except KeyError:
            raise HTTPException(404, detail=f"no session {session_id}") from None
        return session.handle()

    # -- saves --

    @app.get("/api/saves")
    def list_saves(sort: str | None = None, descending: bool = True, q: str | None = None):
        if sort is not None and sort not in SORT_KEYS:
            raise HTTPException(422, detail=f"sort must be one of {sorted(SORT_KEYS)}")
        entries = state.save_entries(sort=sort, descending=descending, query=q)
        return {"saves": [e.to_payload() for e in entries]}

    # -- replays --

    def _replayer_or_error(save_id: str) -> Replayer:
        try:
            return state.replayer(save_id)
        except KeyError:
            raise HTTPException(404, detail=f"no save {save_id}") from None
        except LogParseError as exc:
            raise HTTPException(422, detail=f"save is corrupt: {exc}") from None

    @app.get("/api/replays/{save_id}")
    def replay_info(save_id: str):
        replayer = _replayer_or_error(save_id)
        entry = state.find_save(save_id)
        return {
            "save": entry.to_payload() if entry is not None else None,
            "event_count": replayer.event_count,
        }

    @app.get("/api/replays/{save_id}/events")
    def replay_events(save_id: str, start: int = 0, end: int | None = None):
        replayer = _replayer_or_error(save_id)
        if end is None:
            end = replayer.event_count
        events = replayer.events_between(start, end)
        first = events[0].index if events else max(0, min(start, replayer.event_count))
        return {
            "start": first,
            "end": first + len(events),
            "count": replayer.event_count,
            "at_end": first + len(events) >= replayer.event_count,
            "events": [_event_payload(e) for e in events],
        }

    @app.get("/api/replays/{save_id}/snapshot")
    def replay_snapshot(save_id: str, index: int):
        replayer = _replayer_or_error(save_id)
        snapshot = replayer.seek(index)
        return {"index": replayer.position, "state": snapshot.to_payload()}

    @app.get("/api/replays/{save_id}/seek")
    def replay_seek(
        save_id: str,
        from_index: int,
        direction: str = "next",
        agent: str | None = None,
    ):
        replayer = _replayer_or_error(save_id)
        events = replayer.log.events
        if direction not in ("next", "prev"):
            raise HTTPException(422, detail="direction must be 'next' or 'prev'")
        if agent is None:
            position = (
                seek_next_root_message(events, from_index)
                if direction == "next"
                else seek_prev_root_message(events, from_index)
            )
        else:
            position = (
                seek_next_for_agent(events, agent, from_index)
                if direction == "next"
                else seek_prev_for_agent(events, agent, from_index)
            )
        return {"index": position, "found": position != END_OF_LOG}

    # -- live websocket --

    @app.websocket("/api/ws/sessions/{session_id}")
    async def session_ws(websocket: WebSocket, session_id: str):
        try:
            session = state.session(session_id)
        except KeyError:
            # accept first so real clients see the 4404 close code rather
            # than a failed HTTP upgrade
            await websocket.accept()
            await websocket.close(code=4404)
            return
        await websocket.accept()
        if session.closed:
            await websocket.send_json(
                {
                    "frame": "sync",
                    "index": session.bus.event_count,
                    "session": session.handle(),
                    "state": _session_state_payload(session),
                }
            )
            await websocket.send_json({"frame": "control", "kind": "session_closed"})
            await websocket.close()
            return
        sub = session.subscribe()
        delta_queue = session.subscribe_deltas()
        # no awaits between subscribe and snapshot: the sync frame and the
        # event stream tile the log exactly at sync_index
        sync_index = session.bus.event_count
        outbound: asyncio.Queue = asyncio.Queue()
        outbound.put_nowait(
            {
                "frame": "sync",
                "index": sync_index,
                "session": session.handle(),
                "state": _session_state_payload(session),
            }
        )
        stop = object()

        async def pump_events():
            async for event in sub:
                if event.index is not None and event.index < sync_index:
                    continue
                await outbound.put(
                    {"frame": "event", "index": event.index, "event": json.loads(event.serialize())}
                )
            await outbound.put({"frame": "control", "kind": "session_closed"})
            await outbound.put(stop)

        async def pump_deltas():
            while True:
                frame = await delta_queue.get()
                if frame is None:
                    return
                agent_id, seq, text = frame
                await outbound.put(
                    {"frame": "delta", "id": agent_id, "seq": seq, "text": text}
                )

        async def pump_outbound(group):
            while True:
                item = await outbound.get()
                if item is stop:
                    group.cancel_scope.cancel()
                    return
                await websocket.send_json(item)

        async def pump_inbound():
            while True:
                message = await websocket.receive_json()  # raises on disconnect
                if isinstance(message, dict) and message.get("frame") == "ping":
                    await outbound.put({"frame": "control", "kind": "pong"})

        # a task group (not bare tasks) so teardown cooperates with the
        # server's own cancellation when the client goes away mid-stream
        try:
            async with anyio.create_task_group() as group:
                group.start_soon(pump_events)
                group.start_soon(pump_deltas)
                group.start_soon(pump_outbound, group)
                group.start_soon(pump_inbound)
        except BaseException as exc:
            if not _is_disconnect(exc):
                raise
        finally:
            session.unsubscribe(sub)
            session.unsubscribe_deltas(delta_queue)
        with contextlib.suppress(Exception):
            await websocket.close()

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="static")

    return app
