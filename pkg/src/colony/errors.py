"""Exception hierarchy shared across the framework."""

from __future__ import annotations


class ColonyError(Exception):
    """Base class for all framework errors."""


class EngineError(ColonyError):
    """A completion engine failed to produce a completion.

    ``retriable`` distinguishes transient failures (network blips, rate
    limits) from permanent ones (malformed responses, exhausted scripts).
    """

    def __init__(self, message: str, *, retriable: bool = False):
        super().__init__(message)
        self.retriable = retriable


class SpawnRefused(ColonyError):
    """Agent creation was refused; the message is safe to show to a model.

    Raised for depth-limit violations and for spawns against unknown or
    terminal parents. Delegation tools catch this and return the message
    as an ordinary tool result so the model can adjust.
    """

    def __init__(self, message: str, *, reason: str):
        super().__init__(message)
        self.reason = reason  # "depth" | "parent" | "closed"


class StateTransitionError(ColonyError):
    """An illegal run-state transition was requested."""


class LifecycleError(ColonyError):
    """An operation was attempted against a closed session or log."""


class RoundBusyError(ColonyError):
    """A user message arrived while the root agent's round is in flight."""


class AgentRunError(ColonyError):
    """An agent's round failed; the agent has been moved to ERRORED."""

    def __init__(self, agent_id: str, cause: BaseException):
        super().__init__(f"agent {agent_id} errored: {cause}")
        self.agent_id = agent_id
        self.cause = cause


class RoundTimeoutError(AgentRunError):
    """The root round exceeded the configured wall-clock timeout."""

    def __init__(self, agent_id: str, timeout: float):
        AgentRunError.__init__(
            self, agent_id, TimeoutError(f"round exceeded {timeout:g}s")
        )
        self.timeout = timeout


class LogParseError(ColonyError):
    """A JSONL log line failed to parse."""

    def __init__(self, message: str, *, line_number: int, path: str | None = None):
        where = f"{path or '<log>'}:{line_number}"
        super().__init__(f"{where}: {message}")
        self.line_number = line_number
        self.path = path


class StructuralLogError(ColonyError):
    """An event log violates structural rules (e.g. message before spawn)."""


class UnknownEventTypeError(ColonyError):
    """Dispatch of an event type that is neither built-in nor registered."""


class UnknownDefinitionError(ColonyError):
    """A session referenced a system definition that is not registered."""


class CapacityError(ColonyError):
    """The server is at its concurrent-session cap."""


class ConfigError(ColonyError):
    """A configuration or script file is invalid."""
