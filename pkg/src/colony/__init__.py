"""Recursive multi-agent sessions with an append-only, replayable event log.

A root agent takes the user's task and may delegate pieces of it to child
agents it spawns through delegation tools; children can delegate further.
Every mutation is dispatched as a typed event, so any past system state can
be reconstructed from the log alone, and live views are just subscribers to
the same stream.
"""

from importlib import metadata as _metadata

from .agents import Agent, AgentConfig, AgentNode, RunState, can_transition, new_agent_id
from .batch import BatchReport, TaskResult, batch_run, read_tasks
from .config import (
    STANDARD_TOOLS,
    ServerConfig,
    SystemDefinition,
    load_script_book,
    load_server_config,
)
from .delegation import (
    IDENTICAL_INSTRUCTIONS_REFUSAL,
    DelegateOne,
    DelegateWait,
    GuardVerdict,
    guard_check,
    make_scheme,
    normalize_instructions,
    zombie_report,
)
from .engines import (
    BaseEngine,
    Completion,
    HTTPEngine,
    ScriptBook,
    ScriptStep,
    ScriptedEngine,
)
from .errors import (
    AgentRunError,
    CapacityError,
    ColonyError,
    ConfigError,
    EngineError,
    LifecycleError,
    LogParseError,
    RoundBusyError,
    RoundTimeoutError,
    SpawnRefused,
    StateTransitionError,
    StructuralLogError,
    UnknownEventTypeError,
)
from .events import (
    MESSAGE,
    ROOT_MESSAGE,
    ROUND_COMPLETE,
    SPAWN,
    STATE_CHANGE,
    TOKENS_USED,
    Event,
    EventBus,
    EventLog,
    JsonlWriter,
    Subscription,
    register_custom_event,
)
from .messages import ChatMessage, ChatRole, ToolCall
from .replay import (
    CommitmentClass,
    DelegationGraph,
    Replayer,
    SystemSnapshot,
    TokenCount,
    TokenUsage,
    build_graph,
    classify_commitment,
    classify_log,
    commitment_rates,
    count_tokens,
    reconstruct,
    seek_next_for_agent,
    seek_next_root_message,
    seek_prev_for_agent,
    seek_prev_root_message,
)
from .saves import SaveIndexEntry, index_saves, read_header, search_saves, sort_saves
from .session import Session
from .tools import (
    ToolParam,
    ToolRegistry,
    ToolResult,
    ToolSpec,
    http_get_tool,
    mock_search_tool,
    standard_tools,
)

try:
    __version__ = _metadata.version("colony")
except _metadata.PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

__all__ = [
    "Agent",
    "AgentConfig",
    "AgentNode",
    "AgentRunError",
    "BaseEngine",
    "BatchReport",
    "CapacityError",
    "ChatMessage",
    "ChatRole",
    "ColonyError",
    "CommitmentClass",
    "Completion",
    "ConfigError",
    "DelegateOne",
    "DelegateWait",
    "DelegationGraph",
    "EngineError",
    "Event",
    "EventBus",
    "EventLog",
    "JsonlWriter",
    "GuardVerdict",
    "HTTPEngine",
    "IDENTICAL_INSTRUCTIONS_REFUSAL",
    "LifecycleError",
    "LogParseError",
    "MESSAGE",
    "ROOT_MESSAGE",
    "ROUND_COMPLETE",
    "Replayer",
    "RoundBusyError",
    "RoundTimeoutError",
    "RunState",
    "SPAWN",
    "STANDARD_TOOLS",
    "STATE_CHANGE",
    "SaveIndexEntry",
    "ScriptBook",
    "ScriptStep",
    "ScriptedEngine",
    "ServerConfig",
    "Session",
    "SpawnRefused",
    "StateTransitionError",
    "StructuralLogError",
    "Subscription",
    "SystemDefinition",
    "SystemSnapshot",
    "TOKENS_USED",
    "TaskResult",
    "TokenCount",
    "TokenUsage",
    "ToolCall",
    "ToolParam",
    "ToolRegistry",
    "ToolResult",
    "ToolSpec",
    "UnknownEventTypeError",
    "batch_run",
    "build_graph",
    "can_transition",
    "classify_commitment",
    "classify_log",
    "commitment_rates",
    "count_tokens",
    "guard_check",
    "http_get_tool",
    "index_saves",
    "load_script_book",
    "load_server_config",
    "make_scheme",
    "mock_search_tool",
    "new_agent_id",
    "normalize_instructions",
    "read_header",
    "read_tasks",
    "reconstruct",
    "register_custom_event",
    "search_saves",
    "seek_next_for_agent",
    "seek_next_root_message",
    "seek_prev_for_agent",
    "seek_prev_root_message",
    "sort_saves",
    "standard_tools",
    "zombie_report",
]
