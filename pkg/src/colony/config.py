"""YAML configuration for the server, batch runner, and system definitions.

A config file names one or more system definitions (engine, prompt, tools,
delegation settings) plus server-level settings: where saves are written,
which extra directories to index, the session cap, and bind address. Example:

    save_root: ./saves
    max_sessions: 16
    definitions:
      default:
        engine:
          type: http
          base_url: https://api.openai.com/v1
          model: gpt-4o
        system_prompt: "You are a helpful assistant."
        tools: [search, get]
        scheme: one
        max_depth: 8

Scripted engines point at a script file instead:

    engine:
      type: scripted
      script: ./scripts/demo.yaml
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import yaml

from .agents import AgentConfig, EngineFactory
from .engines import HTTPEngine, ScriptBook
from .errors import ConfigError
from .tools import DEFAULT_OUTPUT_LIMIT, ToolSpec, http_get_tool, mock_search_tool

#: tool names usable in a definition's ``tools`` list
STANDARD_TOOLS: dict[str, Callable[[], ToolSpec]] = {
    "search": mock_search_tool,
    "get": http_get_tool,
}

_SCHEMES = ("one", "wait")


def load_script_book(path: Path, *, name: str | None = None) -> ScriptBook:
    """Read a script file (YAML or JSON) into a ScriptBook."""
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read script file {path}: {exc}") from exc
    try:
        data = json.loads(raw) if path.suffix == ".json" else yaml.safe_load(raw)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"script file {path} is not valid: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"script file {path} must contain a mapping")
    return ScriptBook.from_dict(data, name=name or path.stem)


def _engine_factory(spec: Any, *, base_dir: Path, context: str) -> tuple[EngineFactory, str]:
    """Build the per-agent engine factory for one definition.

    Returns the factory plus a short human-readable description of the
    engine for listings.
    """
    if not isinstance(spec, dict):
        raise ConfigError(f"{context}: 'engine' must be a mapping")
    kind = spec.get("type")
    if kind == "scripted":
        if "script" in spec:
            book = load_script_book((base_dir / spec["script"]).resolve())
        elif "book" in spec:
            if not isinstance(spec["book"], dict):
                raise ConfigError(f"{context}: inline 'book' must be a mapping")
            book = ScriptBook.from_dict(spec["book"], name=context)
        else:
            raise ConfigError(f"{context}: scripted engine needs 'script' or 'book'")
        return book.engine_for, f"scripted:{book.name}"
    if kind == "http":
        missing = [key for key in ("base_url", "model") if not spec.get(key)]
        if missing:
            raise ConfigError(f"{context}: http engine missing {', '.join(missing)}")
        base_url = str(spec["base_url"])
        model = str(spec["model"])
        api_key_env = str(spec.get("api_key_env", "LLM_API_KEY"))
        timeout = float(spec.get("timeout", 60.0))

        def factory(_instructions: str | None) -> HTTPEngine:
            return HTTPEngine(base_url, model, api_key_env=api_key_env, timeout=timeout)

        return factory, f"http:{model}"
    raise ConfigError(f"{context}: engine type must be 'http' or 'scripted', got {kind!r}")


@dataclass
class SystemDefinition:
    """One named, ready-to-instantiate agent system."""

    name: str
    engine_factory: EngineFactory
    engine_desc: str
    system_prompt: str | None = None
    scheme: str = "one"
    max_depth: int = 8
    round_timeout: float = 300.0
    root_has_tools: bool = False
    allow_delegation: bool = True
    tool_names: list[str] = field(default_factory=list)
    tool_output_limit: int = DEFAULT_OUTPUT_LIMIT

    @classmethod
    def from_dict(cls, name: str, data: Any, *, base_dir: Path) -> "SystemDefinition":
        context = f"definition {name!r}"
        if not isinstance(data, dict):
            raise ConfigError(f"{context} must be a mapping")
        known = {
            "engine",
            "system_prompt",
            "scheme",
            "max_depth",
            "round_timeout",
            "root_has_tools",
            "allow_delegation",
            "tools",
            "tool_output_limit",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"{context}: unknown keys {sorted(unknown)}")
        if "engine" not in data:
            raise ConfigError(f"{context}: 'engine' is required")
        factory, desc = _engine_factory(data["engine"], base_dir=base_dir, context=context)
        scheme = data.get("scheme", "one")
        if scheme not in _SCHEMES:
            raise ConfigError(f"{context}: scheme must be one of {_SCHEMES}, got {scheme!r}")
        tool_names = list(data.get("tools") or [])
        for tool_name in tool_names:
            if tool_name not in STANDARD_TOOLS:
                raise ConfigError(
                    f"{context}: unknown tool {tool_name!r} "
                    f"(available: {sorted(STANDARD_TOOLS)})"
                )
        try:
            return cls(
                name=name,
                engine_factory=factory,
                engine_desc=desc,
                system_prompt=data.get("system_prompt"),
                scheme=scheme,
                max_depth=int(data.get("max_depth", 8)),
                round_timeout=float(data.get("round_timeout", 300.0)),
                root_has_tools=bool(data.get("root_has_tools", False)),
                allow_delegation=bool(data.get("allow_delegation", True)),
                tool_names=tool_names,
                tool_output_limit=int(data.get("tool_output_limit", DEFAULT_OUTPUT_LIMIT)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{context}: {exc}") from exc

    def agent_config(self) -> AgentConfig:
        tools = [STANDARD_TOOLS[tool_name]() for tool_name in self.tool_names]
        try:
            return AgentConfig(
                engine=self.engine_factory,
                system_prompt=self.system_prompt,
                tools=tools or None,
                allow_delegation=self.allow_delegation,
                scheme=self.scheme,
                max_depth=self.max_depth,
                root_has_tools=self.root_has_tools,
                round_timeout=self.round_timeout,
                tool_output_limit=self.tool_output_limit,
            )
        except ValueError as exc:
            raise ConfigError(f"definition {self.name!r}: {exc}") from exc

    def summary(self) -> dict:
        return {
            "name": self.name,
            "engine": self.engine_desc,
            "scheme": self.scheme,
            "max_depth": self.max_depth,
            "tools": list(self.tool_names),
            "root_has_tools": self.root_has_tools,
        }


@dataclass
class ServerConfig:
    """Whole-server settings: definitions plus filesystem and bind options."""

    save_root: Path
    definitions: dict[str, SystemDefinition]
    default_definition: str
    extra_save_dirs: list[Path] = field(default_factory=list)
    host: str = "127.0.0.1"
    port: int = 8000
    max_sessions: int = 16

    @property
    def save_dirs(self) -> list[Path]:
        """Every directory the save index scans; the first is the write target."""
        return [self.save_root, *self.extra_save_dirs]

    def definition(self, name: str | None) -> SystemDefinition:
        chosen = name or self.default_definition
        try:
            return self.definitions[chosen]
        except KeyError:
            raise KeyError(f"no system definition named {chosen!r}") from None


def load_server_config(path: Path | str) -> ServerConfig:
    """Parse and validate a server config file. Raises ConfigError on any
    problem so startup fails loudly instead of at first use.
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a mapping")
    known = {
        "save_root",
        "save_dirs",
        "host",
        "port",
        "max_sessions",
        "default_definition",
        "definitions",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"config file {path}: unknown keys {sorted(unknown)}")

    base_dir = path.parent.resolve()
    save_root = (base_dir / data.get("save_root", "saves")).resolve()
    extra = [(base_dir / d).resolve() for d in (data.get("save_dirs") or [])]

    raw_defs = data.get("definitions")
    if not isinstance(raw_defs, dict) or not raw_defs:
        raise ConfigError(f"config file {path}: at least one entry under 'definitions' needed")
    definitions = {
        str(name): SystemDefinition.from_dict(str(name), body, base_dir=base_dir)
        for name, body in raw_defs.items()
    }

    default = data.get("default_definition")
    if default is None:
        default = "default" if "default" in definitions else next(iter(definitions))
    if default not in definitions:
        raise ConfigError(f"config file {path}: default_definition {default!r} not defined")

    try:
        max_sessions = int(data.get("max_sessions", 16))
        port = int(data.get("port", 8000))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config file {path}: {exc}") from exc
    if max_sessions < 1:
        raise ConfigError(f"config file {path}: max_sessions must be >= 1")

    return ServerConfig(
        save_root=save_root,
        definitions=definitions,
        default_definition=str(default),
        extra_save_dirs=extra,
        host=str(data.get("host", "127.0.0.1")),
        port=port,
        max_sessions=max_sessions,
    )
