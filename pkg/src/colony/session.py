"""One live multi-agent session: agents, delegation, and the event stream.

The session is the single serialization point. Every spawn, state change,
message, and token count flows through :meth:`Session.dispatch`, which
appends to the JSONL log and fans out to subscribers; replay later rebuilds
the whole run from that file alone.
"""

from __future__ import annotations

import asyncio
import logging
import secrets
import time
from pathlib import Path
from typing import Callable, Iterable

from .agents import Agent, AgentConfig, AgentNode, RunState, new_agent_id
from .delegation import make_scheme
from .engines import Completion
from .errors import (
    ColonyError,
    LifecycleError,
    RoundBusyError,
    RoundTimeoutError,
    SpawnRefused,
    StateTransitionError,
)
from .events import (
    EVENTS_FILE_NAME,
    Event,
    EventBus,
    JsonlWriter,
    Subscription,
    message_event,
    round_complete_event,
    spawn_event,
    state_change_event,
    tokens_used_event,
)
from .messages import ChatMessage
from .saves import write_header
from .tools import ToolRegistry, ToolSpec

logger = logging.getLogger(__name__)

_TITLE_LIMIT = 80

#: bound on buffered stream deltas per consumer; deltas are lossy by design
_DELTA_BUFFER = 4096

DeltaFrame = tuple[str, int, str]  # (agent id, per-agent sequence number, text)


class Session:
    """A root agent, its delegation tree, and their append-only event log.

    ``save_dir`` is created if needed and receives ``events.jsonl`` plus the
    ``session.json`` header; pass ``None`` for an ephemeral session that
    dispatches events without persisting them (used by some tests).
    """

    def __init__(
        self,
        config: AgentConfig,
        *,
        save_dir: Path | str | None,
        session_id: str | None = None,
        title: str = "",
        clock: Callable[[], float] = time.time,
        subscriber_buffer: int = 1024,
    ):
        self.config = config
        self.id = session_id or secrets.token_hex(8)
        self.title = title
        self.clock = clock
        self.created = clock()
        self.save_dir = Path(save_dir) if save_dir is not None else None
        writer = None
        if self.save_dir is not None:
            self.save_dir.mkdir(parents=True, exist_ok=True)
            writer = JsonlWriter(self.save_dir / EVENTS_FILE_NAME)
            self._write_header()
        self.bus = EventBus(writer, clock=clock, buffer_size=subscriber_buffer)
        self.agents: dict[str, Agent] = {}
        self.schemes = {}  # agent id -> DelegationScheme
        self.root: Agent | None = None
        self.status = "active"
        self._round_task: asyncio.Task | None = None
        self._delta_queues: list[asyncio.Queue] = []
        self._delta_seq: dict[str, int] = {}

    # -- lifecycle ----------------------------------------------------------

    @property
    def closed(self) -> bool:
        return self.status == "closed"

    @property
    def round_in_progress(self) -> bool:
        return self._round_task is not None

    def _write_header(self) -> None:
        if self.save_dir is None:
            return
        try:
            write_header(
                self.save_dir,
                session_id=self.id,
                title=self.title,
                created=self.created,
                replayable=getattr(self, "bus", None) is None or self.bus.replayable,
            )
        except OSError as exc:
            logger.warning("could not write session header: %s", exc)

    def set_title(self, title: str) -> None:
        self.title = title[:_TITLE_LIMIT]
        self._write_header()

    def start(self) -> Agent:
        """Spawn the root agent if it does not exist yet."""
        if self.root is None:
            self.spawn_agent()
        assert self.root is not None
        return self.root

    async def close(self) -> None:
        """Cancel any in-flight round, clean up every agent, seal the log."""
        if self.closed:
            return
        self.status = "closing"
        task = self._round_task
        if task is not None and task is not asyncio.current_task():
            task.cancel()
            try:
                await task
            except (asyncio.CancelledError, ColonyError):
                pass
        # children before parents so cascades never revisit a sealed agent
        for agent_id in reversed(list(self.agents)):
            await self.cleanup(agent_id, _closing=True)
        self._write_header()
        self.bus.close()
        for queue in self._delta_queues:
            queue.put_nowait(None)
        self._delta_queues.clear()
        self.status = "closed"

    # -- agent management ---------------------------------------------------

    def _agent(self, agent_id: str) -> Agent:
        try:
            return self.agents[agent_id]
        except KeyError:
            raise ColonyError(f"unknown agent {agent_id!r}") from None

    def spawn_agent(
        self,
        config: AgentConfig | None = None,
        parent: str | None = None,
        instructions_context: str | None = None,
    ) -> Agent:
        """Create and register a new agent, dispatching its spawn event.

        Children inherit the session's config unless ``config`` overrides
        it. Raises :class:`SpawnRefused` (a structured, model-safe refusal)
        when the depth limit would be exceeded.
        """
        if self.status != "active":
            raise LifecycleError("session is closed; no new agents")
        conf = config or self.config
        if parent is None:
            if self.root is not None:
                raise ColonyError("session already has a root agent")
            parent_agent = None
            depth = 0
        else:
            parent_agent = self._agent(parent)
            if parent_agent.node.state.terminal:
                raise ColonyError(f"parent agent {parent} is {parent_agent.node.state.value}")
            depth = parent_agent.node.depth + 1
            if depth > conf.max_depth:
                raise SpawnRefused(
                    f"Delegation refused: the depth limit of {conf.max_depth} has "
                    "been reached. Complete the task yourself with the "
                    "information you have.",
                    reason="depth",
                )

        agent_id = new_agent_id()
        engine = conf.engine(None if parent_agent is None else (instructions_context or ""))
        registry = ToolRegistry(output_limit=conf.tool_output_limit)
        node = AgentNode(
            id=agent_id,
            parent=parent,
            depth=depth,
            state=RunState.RUNNING,
            engine_desc=engine.description,
            system_prompt=conf.system_prompt,
        )
        agent = Agent(self, node, engine, registry, conf)
        agent.received_instructions = instructions_context

        if conf.tools is not None and (parent_agent is not None or conf.root_has_tools):
            specs = conf.tools
            if callable(specs):
                specs = specs(self, agent_id)
            registry.register_all(list(specs))
        if conf.allow_delegation:
            scheme = make_scheme(conf.scheme, self, agent)
            registry.register_all(scheme.tool_specs())
            self.schemes[agent_id] = scheme
        node.tool_names = registry.names()

        self.agents[agent_id] = agent
        if parent_agent is not None:
            parent_agent.node.children.append(agent_id)
        else:
            self.root = agent
        self.dispatch(spawn_event(node.to_payload()))
        return agent

    def set_state(self, agent_id: str, new_state: RunState) -> None:
        """Transition an agent, dispatching the state-change event.

        Identity transitions are silent no-ops; illegal ones raise and leave
        the state unchanged.
        """
        agent = self._agent(agent_id)
        old = agent.node.state
        if old is new_state:
            return
        from .agents import can_transition

        if not can_transition(old, new_state):
            raise StateTransitionError(
                f"agent {agent_id}: illegal transition {old.value} -> {new_state.value}"
            )
        agent.node.state = new_state
        self.dispatch(state_change_event(agent_id, new_state.value))

    async def cleanup(self, agent_id: str, *, _closing: bool = False) -> None:
        """Finish an agent: cancel its unretrieved delegates, mark it DONE,
        release its engine. Idempotent on already-terminal agents.

        The root agent is cleaned up only as part of closing the session.
        """
        agent = self._agent(agent_id)
        if agent.is_root and not _closing:
            raise LifecycleError("the root agent is cleaned up only at session close")
        scheme = self.schemes.get(agent_id)
        if scheme is not None:
            await scheme.cancel_unretrieved()
        if not agent.node.state.terminal:
            if agent.node.state is RunState.WAITING:
                self.set_state(agent_id, RunState.RUNNING)
            self.set_state(agent_id, RunState.DONE)
        await agent.engine.close()

    # -- event plumbing -----------------------------------------------------

    def dispatch(self, event: Event) -> Event:
        """Append an event to the session log and deliver it to subscribers."""
        return self.bus.dispatch(event)

    def subscribe(self, types: Iterable[str] | None = None) -> Subscription:
        return self.bus.subscribe(types)

    def unsubscribe(self, sub: Subscription) -> None:
        self.bus.unsubscribe(sub)

    def log_message(self, agent: Agent, message: ChatMessage) -> None:
        """Record one appended history entry; root messages fire twice."""
        self.dispatch(message_event(agent.id, message))
        if agent.is_root:
            self.dispatch(message_event(agent.id, message, root=True))

    def log_tokens(self, agent: Agent, completion: Completion) -> None:
        self.dispatch(
            tokens_used_event(
                agent.id, completion.prompt_tokens, completion.completion_tokens
            )
        )

    def push_delta(self, agent_id: str, text: str) -> None:
        """Forward a transient streaming chunk to live viewers (never logged)."""
        seq = self._delta_seq.get(agent_id, 0)
        self._delta_seq[agent_id] = seq + 1
        frame: DeltaFrame = (agent_id, seq, text)
        for queue in self._delta_queues:
            try:
                queue.put_nowait(frame)
            except asyncio.QueueFull:
                pass  # deltas are cosmetic; the full message event follows

    def subscribe_deltas(self) -> asyncio.Queue:
        queue: asyncio.Queue = asyncio.Queue(maxsize=_DELTA_BUFFER)
        self._delta_queues.append(queue)
        return queue

    def unsubscribe_deltas(self, queue: asyncio.Queue) -> None:
        if queue in self._delta_queues:
            self._delta_queues.remove(queue)

    # -- rounds -------------------------------------------------------------

    async def run_round(self, text: str) -> list[ChatMessage]:
        """Send a user message to the root and run the round to completion.

        Dispatches ``round_complete`` once the root has answered and no
        children are still running; unretrieved delegate children are
        cancelled at that point rather than left as zombies.
        """
        if self.status != "active":
            raise LifecycleError("session is closed")
        if not text or not text.strip():
            raise ValueError("user message must be non-empty")
        if self._round_task is not None:
            raise RoundBusyError("a round is already in progress")
        root = self.start()
        if not self.title:
            self.set_title(text.strip())
        root.received_instructions = text
        self._round_task = asyncio.current_task()
        try:
            try:
                messages = await asyncio.wait_for(
                    root.full_round(text), timeout=self.config.round_timeout
                )
            except asyncio.TimeoutError:
                await self._cancel_unretrieved_children()
                if not root.node.state.terminal:
                    self.set_state(root.id, RunState.ERRORED)
                raise RoundTimeoutError(root.id, self.config.round_timeout) from None
            except ColonyError:
                await self._cancel_unretrieved_children()
                raise
            await self._cancel_unretrieved_children()
            self._check_children_settled()
            self.dispatch(round_complete_event(root.id))
            return messages
        finally:
            self._round_task = None

    async def _cancel_unretrieved_children(self) -> None:
        for scheme in list(self.schemes.values()):
            await scheme.cancel_unretrieved()

    def _check_children_settled(self) -> None:
        stragglers = [
            a.id for a in self.agents.values() if not a.is_root and not a.node.state.terminal
        ]
        if stragglers:  # indicates a scheme lifecycle bug, not a user error
            raise ColonyError(f"round ended with non-terminal children: {stragglers}")

    # -- snapshots ----------------------------------------------------------

    def live_state(self) -> dict[str, AgentNode]:
        """Immutable deep copies of every agent node, keyed by id."""
        return {agent_id: agent.snapshot() for agent_id, agent in self.agents.items()}

    def handle(self) -> dict:
        """Serializable descriptor of this session for the API."""
        return {
            "id": self.id,
            "title": self.title,
            "status": "active" if self.status == "active" else "closed",
            "root_id": self.root.id if self.root is not None else None,
            "save_dir": str(self.save_dir) if self.save_dir is not None else None,
            "event_count": self.bus.event_count,
            "round_in_progress": self.round_in_progress,
        }
