"""State reconstruction and analysis over saved event logs.

Everything here is a pure function of an event sequence. Folding the first
``n`` events of a log yields the system state at that point; the live
session produces the same state because every mutation it makes is dispatched
as an event first-class. Analysis helpers (token totals, delegation graphs,
commitment classification) are folds over single event types.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .agents import AgentNode, RunState
from .errors import StructuralLogError
from .events import (
    MESSAGE,
    ROOT_MESSAGE,
    ROUND_COMPLETE,
    SPAWN,
    STATE_CHANGE,
    TOKENS_USED,
    Event,
    EventLog,
)
from .messages import ChatMessage

logger = logging.getLogger(__name__)

#: how often the replayer caches a full snapshot while folding forward
CHECKPOINT_INTERVAL = 500

#: sentinel returned by seek helpers when no matching event lies ahead
END_OF_LOG = -1


# -- token accounting -------------------------------------------------------


@dataclass
class TokenCount:
    prompt: int = 0
    completion: int = 0

    @property
    def total(self) -> int:
        return self.prompt + self.completion

    def add(self, prompt: int, completion: int) -> None:
        self.prompt += prompt
        self.completion += completion

    def to_payload(self) -> dict:
        return {
            "prompt_tokens": self.prompt,
            "completion_tokens": self.completion,
            "total": self.total,
        }


@dataclass
class TokenUsage:
    """Per-agent prompt/completion token totals summed from tokens_used events."""

    per_agent: dict[str, TokenCount] = field(default_factory=dict)

    def for_agent(self, agent_id: str) -> TokenCount:
        return self.per_agent.setdefault(agent_id, TokenCount())

    def record(self, event: Event) -> None:
        agent_id = event.data.get("id")
        if agent_id is None:
            logger.warning("tokens_used event without an agent id; skipped")
            return
        prompt = event.data.get("prompt_tokens")
        completion = event.data.get("completion_tokens")
        if prompt is None or completion is None:
            logger.warning(
                "tokens_used event for %s missing a count field; treating as 0",
                agent_id,
            )
        self.for_agent(agent_id).add(int(prompt or 0), int(completion or 0))

    def grand_total(self) -> TokenCount:
        total = TokenCount()
        for count in self.per_agent.values():
            total.add(count.prompt, count.completion)
        return total

    def to_payload(self) -> dict:
        return {agent_id: count.to_payload() for agent_id, count in self.per_agent.items()}


def count_tokens(events: Iterable[Event]) -> TokenUsage:
    """Sum token counts per agent; every non-tokens_used event is ignored."""
    usage = TokenUsage()
    for event in events:
        if event.type == TOKENS_USED:
            usage.record(event)
    return usage


# -- snapshot fold ----------------------------------------------------------


@dataclass
class SystemSnapshot:
    """Full system state after folding some prefix of an event log.

    ``event_index`` is the number of events applied; the snapshot after the
    first ``n`` events has ``event_index == n``.
    """

    agents: dict[str, AgentNode] = field(default_factory=dict)
    tokens: TokenUsage = field(default_factory=TokenUsage)
    root_id: str | None = None
    rounds_completed: int = 0
    event_index: int = 0

    def copy(self) -> "SystemSnapshot":
        return SystemSnapshot(
            agents={agent_id: node.copy() for agent_id, node in self.agents.items()},
            tokens=TokenUsage(
                {
                    agent_id: TokenCount(count.prompt, count.completion)
                    for agent_id, count in self.tokens.per_agent.items()
                }
            ),
            root_id=self.root_id,
            rounds_completed=self.rounds_completed,
            event_index=self.event_index,
        )

    def _require(self, agent_id, event: Event) -> AgentNode:
        if agent_id is None or agent_id not in self.agents:
            raise StructuralLogError(
                f"{event.type} event references unknown agent {agent_id!r}"
                + (f" at index {event.index}" if event.index is not None else "")
            )
        return self.agents[agent_id]

    def apply(self, event: Event) -> "SystemSnapshot":
        """Fold one event into the snapshot. Mutates and returns self.

        Custom and unknown event types advance the index but change no
        agent state, so third-party events never break replay.
        """
        if event.type == SPAWN:
            node = AgentNode.from_payload(event.data)
            if node.parent is not None:
                parent = self._require(node.parent, event)
                if node.id not in parent.children:
                    parent.children.append(node.id)
            elif self.root_id is None:
                self.root_id = node.id
            self.agents[node.id] = node
        elif event.type == STATE_CHANGE:
            node = self._require(event.data.get("id"), event)
            node.state = RunState(event.data.get("state"))
        elif event.type == MESSAGE:
            node = self._require(event.data.get("id"), event)
            node.history.append(ChatMessage.from_dict(event.data))
        elif event.type == TOKENS_USED:
            self._require(event.data.get("id"), event)
            self.tokens.record(event)
        elif event.type == ROUND_COMPLETE:
            self._require(event.data.get("id"), event)
            self.rounds_completed += 1
        elif event.type == ROOT_MESSAGE:
            # duplicate of the kani_message already applied; view-stream only
            pass
        self.event_index += 1
        return self

    def to_payload(self) -> dict:
        return {
            "index": self.event_index,
            "root_id": self.root_id,
            "rounds_completed": self.rounds_completed,
            "agents": {agent_id: node.to_payload() for agent_id, node in self.agents.items()},
            "tokens": self.tokens.to_payload(),
        }


def reconstruct(events: Sequence[Event], index: int | None = None) -> SystemSnapshot:
    """Left-fold the first ``index`` events into a fresh snapshot.

    ``index`` is a count: 0 gives the empty snapshot, ``len(events)`` (the
    default) gives the final state.
    """
    if index is None:
        index = len(events)
    if not 0 <= index <= len(events):
        raise IndexError(f"index {index} outside [0, {len(events)}]")
    snapshot = SystemSnapshot()
    for event in events[:index]:
        snapshot.apply(event)
    return snapshot


# -- seek helpers -----------------------------------------------------------


def _seek_next(events: Sequence[Event], from_index: int, match) -> int:
    for position in range(max(from_index + 1, 0), len(events)):
        if match(events[position]):
            return position
    return END_OF_LOG


def _seek_prev(events: Sequence[Event], from_index: int, match) -> int:
    for position in range(min(from_index, len(events)) - 1, -1, -1):
        if match(events[position]):
            return position
    return END_OF_LOG


def seek_next_root_message(events: Sequence[Event], from_index: int) -> int:
    """Position of the next root_message strictly after ``from_index``.

    Returns END_OF_LOG when none remains.
    """
    return _seek_next(events, from_index, lambda e: e.type == ROOT_MESSAGE)


def seek_prev_root_message(events: Sequence[Event], from_index: int) -> int:
    return _seek_prev(events, from_index, lambda e: e.type == ROOT_MESSAGE)


def seek_next_for_agent(events: Sequence[Event], agent_id: str, from_index: int) -> int:
    """Position of the next kani_message for one agent, or END_OF_LOG."""
    return _seek_next(
        events,
        from_index,
        lambda e: e.type == MESSAGE and e.data.get("id") == agent_id,
    )


def seek_prev_for_agent(events: Sequence[Event], agent_id: str, from_index: int) -> int:
    return _seek_prev(
        events,
        from_index,
        lambda e: e.type == MESSAGE and e.data.get("id") == agent_id,
    )


# -- delegation graph and commitment heuristics -----------------------------


@dataclass
class DelegationGraph:
    """The spawn tree of one session with each node's last known status."""

    root: str | None = None
    status: dict[str, str] = field(default_factory=dict)
    children: dict[str, list[str]] = field(default_factory=dict)

    @property
    def node_count(self) -> int:
        return len(self.status)

    @property
    def nodes(self) -> list[str]:
        return list(self.status)

    def out_degree(self, agent_id: str) -> int:
        return len(self.children.get(agent_id, ()))

    def to_payload(self) -> dict:
        return {
            "root": self.root,
            "nodes": [
                {"id": agent_id, "status": status} for agent_id, status in self.status.items()
            ],
            "edges": [
                {"parent": parent, "child": child}
                for parent, kids in self.children.items()
                for child in kids
            ],
        }

    def to_dot(self) -> str:
        """Graphviz rendering of the tree, one node per agent."""
        lines = ["digraph delegation {"]
        for agent_id, status in self.status.items():
            label = f"{agent_id[:8]}\\n{status.lower()}"
            lines.append(f'  "{agent_id}" [label="{label}"];')
        for parent, kids in self.children.items():
            for child in kids:
                lines.append(f'  "{parent}" -> "{child}";')
        lines.append("}")
        return "\n".join(lines)


def build_graph(events: Iterable[Event]) -> DelegationGraph:
    """Spawn edges plus last seen status per agent, from the log alone."""
    graph = DelegationGraph()
    for event in events:
        if event.type == SPAWN:
            agent_id = event.data.get("id")
            parent = event.data.get("parent")
            if agent_id is None:
                raise StructuralLogError("kani_spawn event without an agent id")
            if parent is None:
                if graph.root is None:
                    graph.root = agent_id
            elif parent not in graph.status:
                raise StructuralLogError(
                    f"spawn of {agent_id} references unknown parent {parent!r}"
                )
            else:
                graph.children.setdefault(parent, []).append(agent_id)
            graph.status[agent_id] = event.data.get("state") or RunState.RUNNING.value
            graph.children.setdefault(agent_id, [])
        elif event.type == STATE_CHANGE:
            agent_id = event.data.get("id")
            if agent_id in graph.status:
                graph.status[agent_id] = event.data.get("state") or graph.status[agent_id]
    return graph


class CommitmentClass(str, enum.Enum):
    OVERCOMMITTED = "overcommitted"
    UNDERCOMMITTED = "undercommitted"
    NORMAL = "normal"

    def __str__(self) -> str:  # json.dumps and CLI output both want the value
        return self.value


def _longest_thin_chain(graph: DelegationGraph, start: str) -> int:
    """Length of the longest downward path from ``start`` through nodes
    that each have at most one child. Returns 0 if start itself has more.
    """
    length = 0
    node: str | None = start
    while node is not None:
        kids = graph.children.get(node, [])
        if len(kids) > 1:
            break
        length += 1
        node = kids[0] if kids else None
    return length


def classify_commitment(
    graph: DelegationGraph, *, root_anchored: bool = False
) -> CommitmentClass:
    """Bucket one session's delegation shape.

    Two or fewer agents means the root hoarded the work (overcommitted).
    Otherwise a chain of three or more agents, each with zero or one
    children, means work was passed along instead of done (undercommitted).
    Everything else is normal. ``root_anchored`` restricts the chain test
    to chains starting at the root.
    """
    if graph.node_count == 0:
        raise ValueError("cannot classify an empty graph")
    if graph.node_count <= 2:
        return CommitmentClass.OVERCOMMITTED
    starts = [graph.root] if root_anchored and graph.root is not None else graph.nodes
    for start in starts:
        if _longest_thin_chain(graph, start) >= 3:
            return CommitmentClass.UNDERCOMMITTED
    return CommitmentClass.NORMAL


def classify_log(source) -> CommitmentClass:
    """Classify a saved session by path (file or save directory) or EventLog."""
    log = source if isinstance(source, EventLog) else EventLog.load(Path(source))
    return classify_commitment(build_graph(log.events))


def commitment_rates(sources: Iterable) -> tuple[float, float]:
    """Percentage of sessions classified over/undercommitted, to one decimal.

    Unparseable logs are excluded from the denominator and logged as
    warnings rather than failing the whole scan.
    """
    counts = {
        CommitmentClass.OVERCOMMITTED: 0,
        CommitmentClass.UNDERCOMMITTED: 0,
        CommitmentClass.NORMAL: 0,
    }
    total = 0
    for source in sources:
        try:
            label = classify_log(source)
        except Exception as exc:
            logger.warning("excluding unparseable log %s: %s", source, exc)
            continue
        counts[label] += 1
        total += 1
    if total == 0:
        return (0.0, 0.0)
    return (
        round(100.0 * counts[CommitmentClass.OVERCOMMITTED] / total, 1),
        round(100.0 * counts[CommitmentClass.UNDERCOMMITTED] / total, 1),
    )


# -- checkpointed replayer --------------------------------------------------


class Replayer:
    """Random access into a log's snapshot timeline.

    Positions are fold counts in [0, event count]. A full snapshot is cached
    every CHECKPOINT_INTERVAL events so seeking stays cheap on long logs.
    """

    def __init__(self, log: EventLog, checkpoint_interval: int = CHECKPOINT_INTERVAL):
        if checkpoint_interval < 1:
            raise ValueError("checkpoint_interval must be positive")
        self.log = log
        self.interval = checkpoint_interval
        self._checkpoints: dict[int, SystemSnapshot] = {0: SystemSnapshot()}
        self._current = SystemSnapshot()
        self.position = 0

    @property
    def event_count(self) -> int:
        return len(self.log.events)

    @property
    def snapshot(self) -> SystemSnapshot:
        """State at the current position; treat as read-only."""
        return self._current

    def _nearest_checkpoint(self, index: int) -> int:
        best = 0
        for mark in self._checkpoints:
            if best < mark <= index:
                best = mark
        return best

    def seek(self, index: int) -> SystemSnapshot:
        """Move to ``index`` (clamped to the valid range) and return the state."""
        index = max(0, min(index, self.event_count))
        if index < self.position:
            mark = self._nearest_checkpoint(index)
            self._current = self._checkpoints[mark].copy()
            self.position = mark
        while self.position < index:
            self._current.apply(self.log.events[self.position])
            self.position += 1
            if self.position % self.interval == 0 and self.position not in self._checkpoints:
                self._checkpoints[self.position] = self._current.copy()
        return self._current

    def forward(self) -> SystemSnapshot:
        return self.seek(self.position + 1)

    def back(self) -> SystemSnapshot:
        return self.seek(self.position - 1)

    def events_between(self, start: int, end: int) -> list[Event]:
        """Events in [start, end), both ends clamped to the log."""
        start = max(0, min(start, self.event_count))
        end = max(start, min(end, self.event_count))
        return list(self.log.events[start:end])
