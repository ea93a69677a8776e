"""Agent identity, run states, and the per-agent chat round loop.

An agent is one worker with its own history, engine, and tool set. The run
loop interleaves engine calls with tool execution until the engine replies
without requesting tools. Every appended message and state change flows
through the session's event dispatch, which is what makes runs replayable.
"""

from __future__ import annotations

import asyncio
import contextlib
import enum
import secrets
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, AsyncIterator, Callable, Sequence

from .engines import BaseEngine, Completion
from .errors import AgentRunError, EngineError, LifecycleError, StateTransitionError
from .messages import ChatMessage, ChatRole
from .tools import DEFAULT_OUTPUT_LIMIT, ToolRegistry, ToolSpec

if TYPE_CHECKING:
    from .session import Session

#: retry policy for retriable engine failures: 2 retries, exponential backoff
MAX_ENGINE_RETRIES = 2


def new_agent_id() -> str:
    """Random 128-bit identifier as lowercase hex; unique without coordination."""
    return secrets.token_hex(16)


class RunState(enum.Enum):
    """Lifecycle state of an agent.

    Legal transitions: RUNNING <-> WAITING, RUNNING -> DONE,
    RUNNING -> ERRORED. DONE and ERRORED are terminal.
    """

    RUNNING = "RUNNING"
    WAITING = "WAITING"
    DONE = "DONE"
    ERRORED = "ERRORED"

    @property
    def terminal(self) -> bool:
        return self in (RunState.DONE, RunState.ERRORED)


_LEGAL_TRANSITIONS: dict[RunState, frozenset[RunState]] = {
    RunState.RUNNING: frozenset({RunState.WAITING, RunState.DONE, RunState.ERRORED}),
    RunState.WAITING: frozenset({RunState.RUNNING}),
    RunState.DONE: frozenset(),
    RunState.ERRORED: frozenset(),
}


def can_transition(old: RunState, new: RunState) -> bool:
    return new in _LEGAL_TRANSITIONS[old]


@dataclass
class AgentNode:
    """The full externally visible state of one agent.

    This is what a spawn event carries and what replay reconstructs; live
    sessions hand out deep copies so later mutation cannot leak across
    component boundaries.
    """

    id: str
    parent: str | None = None
    children: list[str] = field(default_factory=list)
    depth: int = 0
    state: RunState = RunState.RUNNING
    history: list[ChatMessage] = field(default_factory=list)
    engine_desc: str = ""
    tool_names: list[str] = field(default_factory=list)
    system_prompt: str | None = None

    def copy(self) -> "AgentNode":
        return AgentNode.from_payload(self.to_payload())

    def to_payload(self) -> dict[str, Any]:
        """Serialize for spawn events and snapshot wire frames."""
        return {
            "id": self.id,
            "parent": self.parent,
            "children": list(self.children),
            "depth": self.depth,
            "state": self.state.value,
            "history": [m.to_dict() for m in self.history],
            "engine_desc": self.engine_desc,
            "tool_names": list(self.tool_names),
            "system_prompt": self.system_prompt,
        }

    @classmethod
    def from_payload(cls, data: dict[str, Any]) -> "AgentNode":
        return cls(
            id=data["id"],
            parent=data.get("parent"),
            children=list(data.get("children") or []),
            depth=int(data.get("depth") or 0),
            state=RunState(data["state"]),
            history=[ChatMessage.from_dict(m) for m in data.get("history") or []],
            engine_desc=data.get("engine_desc") or "",
            tool_names=list(data.get("tool_names") or []),
            system_prompt=data.get("system_prompt"),
        )


EngineFactory = Callable[[str | None], BaseEngine]
ToolsFactory = Callable[["Session", str], list[ToolSpec]]


@dataclass
class AgentConfig:
    """How a session builds its agents.

    ``engine`` is called once per spawn with the new agent's instructions
    (``None`` for the root) and must return a fresh engine. ``tools`` may be
    a plain list of specs or a factory receiving the session and agent id,
    which is how tools gain the ability to dispatch custom events. The root
    gets tools only when ``root_has_tools`` is set; delegation is installed
    independently of that switch.
    """

    engine: EngineFactory
    system_prompt: str | None = None
    tools: ToolsFactory | list[ToolSpec] | None = None
    allow_delegation: bool = True
    scheme: str = "one"  # "one" | "wait"
    max_depth: int = 8
    root_has_tools: bool = False
    round_timeout: float = 300.0
    tool_output_limit: int = DEFAULT_OUTPUT_LIMIT
    retry_base_delay: float = 0.5

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.scheme not in ("one", "wait"):
            raise ValueError(f"unknown delegation scheme {self.scheme!r}")


class Agent:
    """Runtime wrapper around one :class:`AgentNode`.

    Owns the node's mutable state. All mutation happens from the agent's own
    run loop; other components only ever see snapshots.
    """

    def __init__(
        self,
        session: "Session",
        node: AgentNode,
        engine: BaseEngine,
        registry: ToolRegistry,
        config: AgentConfig,
    ):
        self.session = session
        self.node = node
        self.engine = engine
        self.registry = registry
        self.config = config
        #: the instructions this agent was given (delegation guard input);
        #: for the root this is the current round's user message
        self.received_instructions: str | None = None
        self._waiting_depth = 0
        self._round_active = False

    @property
    def id(self) -> str:
        return self.node.id

    @property
    def state(self) -> RunState:
        return self.node.state

    @property
    def is_root(self) -> bool:
        return self.node.parent is None

    def snapshot(self) -> AgentNode:
        return self.node.copy()

    # -- state management ---------------------------------------------------

    @contextlib.asynccontextmanager
    async def run_state(self, state: RunState):
        """Temporarily hold a state, restoring RUNNING on exit.

        Nested holds (several parallel delegations) stack: the agent stays
        WAITING until the last one releases.
        """
        if state is not RunState.WAITING:
            raise ValueError("only WAITING may be held temporarily")
        self._waiting_depth += 1
        if self._waiting_depth == 1:
            self.session.set_state(self.id, RunState.WAITING)
        try:
            yield
        finally:
            self._waiting_depth -= 1
            if self._waiting_depth == 0 and self.node.state is RunState.WAITING:
                self.session.set_state(self.id, RunState.RUNNING)

    # -- the round loop -----------------------------------------------------

    def _prompt(self) -> list[ChatMessage]:
        prefix = (
            [ChatMessage.system(self.node.system_prompt)]
            if self.node.system_prompt
            else []
        )
        return prefix + list(self.node.history)

    def _push_delta(self, text: str) -> None:
        self.session.push_delta(self.id, text)

    async def _complete_with_retries(self) -> Completion:
        delay = self.config.retry_base_delay
        attempt = 0
        while True:
            try:
                return await self.engine.complete(
                    self._prompt(), self.registry.schemas(), on_delta=self._push_delta
                )
            except EngineError as exc:
                if not exc.retriable or attempt >= MAX_ENGINE_RETRIES:
                    raise
                attempt += 1
                await asyncio.sleep(delay)
                delay *= 2

    def _append(self, message: ChatMessage) -> None:
        self.node.history.append(message)
        self.session.log_message(self, message)

    async def full_round_stream(self, text: str) -> AsyncIterator[ChatMessage]:
        """Run one chat round, yielding each message as it is appended.

        The user message itself is appended (and logged) but not yielded;
        the stream carries the assistant and function messages the round
        produces. On engine failure the agent moves to ERRORED and the
        stream raises :class:`AgentRunError`.
        """
        if self.node.state is not RunState.RUNNING:
            raise LifecycleError(
                f"agent {self.id} is {self.node.state.value}; rounds need RUNNING"
            )
        if self._round_active:
            raise LifecycleError(f"agent {self.id} already has a round in flight")
        self._round_active = True
        try:
            self._append(ChatMessage.user(text))
            while True:
                try:
                    completion = await self._complete_with_retries()
                except EngineError as exc:
                    self.session.set_state(self.id, RunState.ERRORED)
                    raise AgentRunError(self.id, exc) from exc
                self.session.log_tokens(self, completion)
                message = completion.message
                self._append(message)
                yield message
                if not message.tool_calls:
                    return
                results = await asyncio.gather(
                    *(self.registry.invoke(call) for call in message.tool_calls)
                )
                # results come back in issue order regardless of finish order
                for call, result in zip(message.tool_calls, results):
                    reply = ChatMessage.function(call.id, result.content)
                    self._append(reply)
                    yield reply
        finally:
            self._round_active = False

    async def full_round(self, text: str) -> list[ChatMessage]:
        """Run one chat round to completion; returns the produced messages."""
        return [message async for message in self.full_round_stream(text)]

    def assistant_reply(self, messages: Sequence[ChatMessage]) -> str:
        """Join the non-empty ASSISTANT contents of a round's messages."""
        return "\n".join(
            m.content
            for m in messages
            if m.role is ChatRole.ASSISTANT and m.content
        )
