"""Callable tool declarations, schema export, and tool-call execution.

A tool is a named host function with typed parameters. Its schema (name,
description, parameter types) is what the model sees; the body never is.
Execution never raises past the registry boundary: every failure comes back
as a :class:`ToolResult` with ``is_error`` set, stringified for the model.
"""

from __future__ import annotations

import inspect
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Callable

import httpx

from .messages import ToolCall

logger = logging.getLogger(__name__)

#: Cap on tool output entering an agent's history, in UTF-8 bytes.
DEFAULT_OUTPUT_LIMIT = 32 * 1024

TRUNCATION_SUFFIX = "... [output truncated]"

_JSON_TYPES: dict[str, type | tuple[type, ...]] = {
    "string": str,
    "integer": int,
    "number": (int, float),
    "boolean": bool,
    "array": list,
    "object": dict,
}


@dataclass
class ToolParam:
    """One declared parameter of a tool function."""

    name: str
    type: str = "string"
    required: bool = True
    description: str = ""

    def __post_init__(self):
        if self.type not in _JSON_TYPES:
            raise ValueError(
                f"parameter {self.name!r} has unknown type {self.type!r}; "
                f"expected one of {sorted(_JSON_TYPES)}"
            )


@dataclass
class ToolSpec:
    """A callable function exposed to models.

    ``executor`` may be sync or async; it receives the validated arguments
    as keyword arguments and returns the result (stringified if needed).
    """

    name: str
    description: str
    params: list[ToolParam] = field(default_factory=list)
    executor: Callable[..., Any] | None = None

    def __post_init__(self):
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError(f"tool {self.name!r} declares duplicate parameter names")

    def schema(self) -> dict[str, Any]:
        """Chat-completions style function schema entry."""
        properties = {}
        required = []
        for p in self.params:
            prop: dict[str, Any] = {"type": p.type}
            if p.description:
                prop["description"] = p.description
            properties[p.name] = prop
            if p.required:
                required.append(p.name)
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": {
                    "type": "object",
                    "properties": properties,
                    "required": required,
                },
            },
        }


@dataclass
class ToolResult:
    """Outcome of one tool call; ``content`` is never null."""

    call_id: str
    content: str
    is_error: bool = False


def truncate_output(text: str, limit: int) -> str:
    """Cap text at a UTF-8 byte budget, marking the cut."""
    encoded = text.encode("utf-8")
    if len(encoded) <= limit:
        return text
    keep = max(0, limit - len(TRUNCATION_SUFFIX.encode("utf-8")))
    clipped = encoded[:keep].decode("utf-8", errors="ignore")
    return clipped + TRUNCATION_SUFFIX


class ToolRegistry:
    """Holds the tools one agent may call and executes calls against them.

    Registries are frozen once their agent starts running; concurrent
    ``invoke`` calls on distinct tool calls are safe.
    """

    def __init__(self, *, output_limit: int = DEFAULT_OUTPUT_LIMIT):
        self._tools: dict[str, ToolSpec] = {}
        self.output_limit = output_limit

    def register(self, spec: ToolSpec) -> None:
        if spec.name in self._tools:
            raise ValueError(f"tool {spec.name!r} is already registered")
        self._tools[spec.name] = spec

    def register_all(self, specs: list[ToolSpec]) -> None:
        for spec in specs:
            self.register(spec)

    def names(self) -> list[str]:
        return list(self._tools)

    def __contains__(self, name: str) -> bool:
        return name in self._tools

    def __len__(self) -> int:
        return len(self._tools)

    def schemas(self) -> list[dict[str, Any]]:
        """JSON-serializable function schemas, in registration order."""
        return [spec.schema() for spec in self._tools.values()]

    def _validate(self, spec: ToolSpec, arguments: dict[str, Any]) -> dict[str, Any] | str:
        """Return cleaned arguments, or an error string naming the bad parameter."""
        declared = {p.name: p for p in spec.params}
        for name in arguments:
            if name not in declared:
                return f"unexpected parameter {name!r}"
        cleaned = {}
        for name, param in declared.items():
            if name not in arguments or arguments[name] is None:
                if param.required:
                    return f"missing required parameter {name!r}"
                continue
            value = arguments[name]
            expected = _JSON_TYPES[param.type]
            # bool is an int subclass; don't let True satisfy an integer param
            if isinstance(value, bool) and param.type in ("integer", "number"):
                return f"parameter {name!r} must be a {param.type}, got a boolean"
            if not isinstance(value, expected):
                return (
                    f"parameter {name!r} must be a {param.type}, "
                    f"got {type(value).__name__}"
                )
            cleaned[name] = value
        return cleaned

    async def invoke(self, call: ToolCall) -> ToolResult:
        """Execute one model-issued call; failures become error results."""
        spec = self._tools.get(call.name)
        if spec is None or spec.executor is None:
            return ToolResult(call.id, f"no such function: {call.name!r}", is_error=True)
        cleaned = self._validate(spec, call.arguments)
        if isinstance(cleaned, str):
            return ToolResult(call.id, f"invalid arguments: {cleaned}", is_error=True)
        try:
            result = spec.executor(**cleaned)
            if inspect.isawaitable(result):
                result = await result
        except Exception as exc:  # noqa: BLE001 - errors go back to the model
            logger.debug("tool %s raised", call.name, exc_info=True)
            return ToolResult(
                call.id, f"error in {call.name}: {exc}", is_error=True
            )
        content = result if isinstance(result, str) else json.dumps(result, ensure_ascii=False)
        return ToolResult(call.id, truncate_output(content, self.output_limit))


# ---------------------------------------------------------------------------
# Bundled example tools
# ---------------------------------------------------------------------------


def http_get_tool(*, timeout: float = 20.0, output_limit: int = DEFAULT_OUTPUT_LIMIT) -> ToolSpec:
    """A minimal HTTP-GET example tool: fetch a URL, return its body as text.

    No JS rendering, no retries; bodies are capped at the output budget.
    """

    async def get(url: str) -> str:
        async with httpx.AsyncClient(follow_redirects=True, timeout=timeout) as client:
            resp = await client.get(url)
            return truncate_output(resp.text, output_limit)

    return ToolSpec(
        name="get",
        description="Get the contents of a webpage and return the raw text.",
        params=[ToolParam("url", "string", description="The URL to fetch.")],
        executor=get,
    )


def _load_search_fixtures() -> dict[str, str]:
    raw = resources.files("colony").joinpath("fixtures/mock_search.json").read_text("utf-8")
    return json.loads(raw)


def mock_search_tool() -> ToolSpec:
    """Deterministic stand-in for a search tool, backed by a fixture file.

    Lookups are case- and whitespace-insensitive; unknown queries get a fixed
    no-results message. Useful for reproducible tests and demos.
    """
    fixtures = {" ".join(k.split()).casefold(): v for k, v in _load_search_fixtures().items()}

    def search(query: str) -> str:
        key = " ".join(query.split()).casefold()
        if key in fixtures:
            return fixtures[key]
        return f"No results found for: {query}"

    return ToolSpec(
        name="search",
        description="Search for information and return the best matching snippet.",
        params=[ToolParam("query", "string", description="The search query.")],
        executor=search,
    )


def standard_tools() -> list[ToolSpec]:
    """The bundled example tool set: HTTP GET plus the mock search tool."""
    return [http_get_tool(), mock_search_tool()]
