"""Chat messages, roles, and model-issued tool calls.

These are the units that agent histories are made of. Messages are plain
dataclasses so that live history entries and entries rebuilt from an event
log compare equal with ``==``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any


class ChatRole(enum.Enum):
    """Role of a chat message. Serialized as the uppercase name."""

    SYSTEM = "SYSTEM"
    USER = "USER"
    ASSISTANT = "ASSISTANT"
    FUNCTION = "FUNCTION"


@dataclass
class ToolCall:
    """One function invocation requested by the model.

    ``arguments`` is the already-decoded JSON object; engines are
    responsible for parsing the wire form.
    """

    id: str
    name: str
    arguments: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "name": self.name, "arguments": self.arguments}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ToolCall":
        return cls(
            id=str(data["id"]),
            name=str(data["name"]),
            arguments=dict(data.get("arguments") or {}),
        )


@dataclass
class ChatMessage:
    """One entry in an agent's chat history.

    ``content`` may be empty for assistant messages that only carry tool
    calls. ``tool_calls`` is set only on ASSISTANT messages; ``tool_call_id``
    only on FUNCTION messages, and references a call from a prior ASSISTANT
    message in the same history.
    """

    role: ChatRole
    content: str = ""
    tool_calls: list[ToolCall] | None = None
    tool_call_id: str | None = None

    def __post_init__(self):
        if self.tool_calls and self.role is not ChatRole.ASSISTANT:
            raise ValueError("tool_calls are only valid on ASSISTANT messages")
        if self.tool_call_id is not None and self.role is not ChatRole.FUNCTION:
            raise ValueError("tool_call_id is only valid on FUNCTION messages")

    @classmethod
    def system(cls, content: str) -> "ChatMessage":
        return cls(role=ChatRole.SYSTEM, content=content)

    @classmethod
    def user(cls, content: str) -> "ChatMessage":
        return cls(role=ChatRole.USER, content=content)

    @classmethod
    def assistant(
        cls, content: str = "", tool_calls: list[ToolCall] | None = None
    ) -> "ChatMessage":
        return cls(role=ChatRole.ASSISTANT, content=content, tool_calls=tool_calls)

    @classmethod
    def function(cls, tool_call_id: str, content: str) -> "ChatMessage":
        return cls(role=ChatRole.FUNCTION, content=content, tool_call_id=tool_call_id)

    def to_dict(self) -> dict[str, Any]:
        """Serialize to the shape used in event payloads."""
        return {
            "role": self.role.value,
            "content": self.content,
            "tool_calls": (
                [c.to_dict() for c in self.tool_calls] if self.tool_calls else None
            ),
            "tool_call_id": self.tool_call_id,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ChatMessage":
        calls = data.get("tool_calls")
        return cls(
            role=ChatRole(data["role"]),
            content=data.get("content") or "",
            tool_calls=[ToolCall.from_dict(c) for c in calls] if calls else None,
            tool_call_id=data.get("tool_call_id"),
        )
