"""Completion engines: the contract, a deterministic scripted engine, and a
generic chat-completions HTTP client.

Engines are the only place a model (real or simulated) is consulted. The
scripted engine makes whole scenarios reproducible: its output is a pure
function of its step list and the call ordinal, so two runs of the same
scenario produce the same transcript.
"""

from __future__ import annotations

import asyncio
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import httpx

from .errors import ConfigError, EngineError
from .messages import ChatMessage, ChatRole, ToolCall

logger = logging.getLogger(__name__)

DeltaCallback = Callable[[str], None]

#: stream chunk size for the scripted engine's simulated token streaming
_DELTA_CHUNK = 24


@dataclass
class Completion:
    """One engine reply: an ASSISTANT message plus its token accounting."""

    message: ChatMessage
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __post_init__(self):
        if self.message.role is not ChatRole.ASSISTANT:
            raise ValueError("completions must carry an ASSISTANT message")
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")


class BaseEngine:
    """Contract every engine implements.

    ``description`` identifies the backing model in spawn events and the UI.
    ``complete`` returns exactly one completion for the given history;
    transient failures raise :class:`EngineError` with ``retriable=True`` so
    the agent loop can back off and retry.
    """

    description: str = "engine"

    async def complete(
        self,
        history: Sequence[ChatMessage],
        tools: list[dict[str, Any]] | None = None,
        *,
        on_delta: DeltaCallback | None = None,
    ) -> Completion:
        raise NotImplementedError

    async def close(self) -> None:
        """Release any engine-owned resources (sockets, clients)."""


# ---------------------------------------------------------------------------
# Scripted engine
# ---------------------------------------------------------------------------


@dataclass
class ScriptStep:
    """One pre-authored engine turn.

    Either a reply (optionally with tool calls) or an injected failure.
    ``latency`` simulates model thinking time with a real async sleep, which
    is what the parallelism tests measure. Call arguments may be a callable
    taking the history, for scripts that must reference ids only known at
    run time (a real model would read them out of its function results).
    """

    reply: str = ""
    calls: list[tuple[str, dict[str, Any] | Callable[..., dict[str, Any]]]] = field(
        default_factory=list
    )
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency: float = 0.0
    error: str | None = None
    error_retriable: bool = False

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScriptStep":
        """Build a step from its config-file form."""
        known = {
            "reply",
            "calls",
            "prompt_tokens",
            "completion_tokens",
            "latency",
            "error",
            "error_retriable",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown script step keys: {sorted(unknown)}")
        calls = []
        for entry in data.get("calls") or []:
            if "name" not in entry:
                raise ConfigError("script tool call needs a 'name'")
            calls.append((entry["name"], dict(entry.get("arguments") or {})))
        return cls(
            reply=data.get("reply") or "",
            calls=calls,
            prompt_tokens=int(data.get("prompt_tokens") or 0),
            completion_tokens=int(data.get("completion_tokens") or 0),
            latency=float(data.get("latency") or 0.0),
            error=data.get("error"),
            error_retriable=bool(data.get("error_retriable", False)),
        )


class ScriptedEngine(BaseEngine):
    """Deterministic engine that replays a fixed list of steps.

    The n-th ``complete`` call returns the n-th step regardless of history
    content. Exhausting the script is a non-retriable error: a scenario that
    asks for more turns than it scripted is a broken scenario.
    """

    def __init__(self, steps: Sequence[ScriptStep], *, name: str = "script"):
        self.steps = list(steps)
        self.name = name
        self.description = f"scripted:{name}"
        self._calls = 0

    @property
    def calls_made(self) -> int:
        return self._calls

    async def complete(self, history, tools=None, *, on_delta=None) -> Completion:
        ordinal = self._calls
        self._calls += 1
        if ordinal >= len(self.steps):
            raise EngineError(
                f"script {self.name!r} exhausted after {len(self.steps)} steps",
                retriable=False,
            )
        step = self.steps[ordinal]
        if step.latency > 0:
            await asyncio.sleep(step.latency)
        if step.error is not None:
            raise EngineError(step.error, retriable=step.error_retriable)
        if on_delta is not None and step.reply:
            for i in range(0, len(step.reply), _DELTA_CHUNK):
                on_delta(step.reply[i : i + _DELTA_CHUNK])
                await asyncio.sleep(0)
        tool_calls = [
            ToolCall(
                id=f"call_{ordinal}_{i}",
                name=name,
                arguments=dict(args(history) if callable(args) else args),
            )
            for i, (name, args) in enumerate(step.calls)
        ] or None
        return Completion(
            message=ChatMessage.assistant(step.reply, tool_calls),
            prompt_tokens=step.prompt_tokens,
            completion_tokens=step.completion_tokens,
        )


class ScriptBook:
    """A system-wide collection of scripts: one for the root, one per child.

    Child scripts are selected by their spawn instructions (case- and
    whitespace-insensitive exact match), falling back to ``default_child``.
    Each spawned agent gets a fresh engine so call ordinals never interleave.
    """

    def __init__(
        self,
        root: Sequence[ScriptStep],
        children: dict[str, Sequence[ScriptStep]] | None = None,
        default_child: Sequence[ScriptStep] | None = None,
        *,
        name: str = "script",
    ):
        self.root = list(root)
        self.children = {
            _normalize(key): list(steps) for key, steps in (children or {}).items()
        }
        self.default_child = list(default_child) if default_child is not None else None
        self.name = name

    def engine_for(self, instructions: str | None) -> ScriptedEngine:
        """Engine for a spawn; ``None`` instructions select the root script."""
        if instructions is None:
            return ScriptedEngine(self.root, name=f"{self.name}:root")
        steps = self.children.get(_normalize(instructions), self.default_child)
        if steps is None:
            # An empty script fails on first call, surfacing the mismatch to
            # the parent as a delegate error instead of crashing the session.
            steps = []
        return ScriptedEngine(steps, name=f"{self.name}:child")

    @classmethod
    def from_dict(cls, data: dict[str, Any], *, name: str = "script") -> "ScriptBook":
        if "root" not in data:
            raise ConfigError("script file needs a 'root' step list")
        parse = lambda steps: [ScriptStep.from_dict(s) for s in steps]  # noqa: E731
        return cls(
            root=parse(data["root"]),
            children={k: parse(v) for k, v in (data.get("children") or {}).items()},
            default_child=(
                parse(data["default_child"]) if data.get("default_child") else None
            ),
            name=name,
        )


def _normalize(text: str) -> str:
    return " ".join(text.split()).casefold()


# ---------------------------------------------------------------------------
# HTTP chat-completions engine
# ---------------------------------------------------------------------------

_WIRE_ROLES = {
    ChatRole.SYSTEM: "system",
    ChatRole.USER: "user",
    ChatRole.ASSISTANT: "assistant",
    ChatRole.FUNCTION: "tool",
}

_RETRIABLE_STATUS = {408, 429}


class HTTPEngine(BaseEngine):
    """Client for any chat-completions compatible HTTP endpoint.

    Sends ``POST {base_url}/chat/completions`` with ``{model, messages,
    tools?, stream: false}`` and reads ``choices[0].message`` plus token
    ``usage`` from the response. The API key is read from an environment
    variable; vendor-specific behavior beyond this wire shape is out of
    scope.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        *,
        api_key_env: str = "LLM_API_KEY",
        timeout: float = 60.0,
        transport: httpx.AsyncBaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.description = f"http:{model}@{self.base_url}"
        headers = {}
        api_key = os.environ.get(api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.AsyncClient(
            timeout=timeout, headers=headers, transport=transport
        )

    def _wire_messages(self, history: Sequence[ChatMessage]) -> list[dict[str, Any]]:
        wire = []
        for msg in history:
            entry: dict[str, Any] = {
                "role": _WIRE_ROLES[msg.role],
                "content": msg.content,
            }
            if msg.tool_calls:
                entry["tool_calls"] = [
                    {
                        "id": call.id,
                        "type": "function",
                        "function": {
                            "name": call.name,
                            "arguments": json.dumps(call.arguments, ensure_ascii=False),
                        },
                    }
                    for call in msg.tool_calls
                ]
            if msg.tool_call_id is not None:
                entry["tool_call_id"] = msg.tool_call_id
            wire.append(entry)
        return wire

    async def complete(self, history, tools=None, *, on_delta=None) -> Completion:
        body: dict[str, Any] = {
            "model": self.model,
            "messages": self._wire_messages(history),
            "stream": False,
        }
        if tools:
            body["tools"] = tools
        try:
            resp = await self._client.post(f"{self.base_url}/chat/completions", json=body)
        except httpx.TransportError as exc:
            raise EngineError(f"transport failure: {exc}", retriable=True) from exc
        if resp.status_code != 200:
            retriable = resp.status_code in _RETRIABLE_STATUS or resp.status_code >= 500
            raise EngineError(
                f"completion endpoint returned HTTP {resp.status_code}",
                retriable=retriable,
            )
        try:
            payload = resp.json()
            message = payload["choices"][0]["message"]
        except (ValueError, LookupError, TypeError) as exc:
            raise EngineError(f"malformed completion response: {exc}", retriable=False) from exc

        tool_calls = []
        for i, call in enumerate(message.get("tool_calls") or []):
            fn = call.get("function") or {}
            raw_args = fn.get("arguments") or "{}"
            try:
                args = json.loads(raw_args) if isinstance(raw_args, str) else dict(raw_args)
                if not isinstance(args, dict):
                    args = {}
            except ValueError:
                logger.warning("model emitted unparseable tool arguments: %r", raw_args)
                args = {}
            tool_calls.append(
                ToolCall(id=str(call.get("id") or f"call_{i}"), name=str(fn.get("name")), arguments=args)
            )

        usage = payload.get("usage") or {}
        if not usage:
            logger.warning("completion response carried no usage; token counts default to 0")
        return Completion(
            message=ChatMessage.assistant(message.get("content") or "", tool_calls or None),
            prompt_tokens=int(usage.get("prompt_tokens") or 0),
            completion_tokens=int(usage.get("completion_tokens") or 0),
        )

    async def close(self) -> None:
        await self._client.aclose()
