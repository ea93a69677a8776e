"""Scripted and HTTP completion engines."""

import json

import httpx
import pytest

from colony import ChatMessage, ChatRole, Completion, ScriptBook, ScriptStep, ToolCall
from colony.engines import HTTPEngine, ScriptedEngine, _DELTA_CHUNK
from colony.errors import ConfigError, EngineError

pytestmark = pytest.mark.anyio


class TestCompletion:
    def test_requires_assistant_message(self):
        with pytest.raises(ValueError):
            Completion(message=ChatMessage.user("nope"))

    def test_rejects_negative_token_counts(self):
        with pytest.raises(ValueError):
            Completion(message=ChatMessage.assistant("ok"), prompt_tokens=-1)


class TestScriptedEngine:
    async def test_steps_play_in_order_regardless_of_history(self):
        engine = ScriptedEngine([ScriptStep(reply="one"), ScriptStep(reply="two")])
        first = await engine.complete([ChatMessage.user("a")])
        second = await engine.complete([])  # different history, same script
        assert (first.message.content, second.message.content) == ("one", "two")
        assert engine.calls_made == 2

    async def test_exhausted_script_is_a_permanent_error(self):
        engine = ScriptedEngine([])
        with pytest.raises(EngineError) as exc_info:
            await engine.complete([])
        assert exc_info.value.retriable is False

    async def test_error_step_carries_retriability(self):
        engine = ScriptedEngine(
            [ScriptStep(error="blip", error_retriable=True), ScriptStep(error="fatal")]
        )
        with pytest.raises(EngineError) as first:
            await engine.complete([])
        with pytest.raises(EngineError) as second:
            await engine.complete([])
        assert first.value.retriable is True
        assert second.value.retriable is False

    async def test_token_counts_come_from_the_step(self):
        engine = ScriptedEngine([ScriptStep(reply="x", prompt_tokens=7, completion_tokens=3)])
        completion = await engine.complete([])
        assert (completion.prompt_tokens, completion.completion_tokens) == (7, 3)

    async def test_deltas_stream_the_reply_in_chunks(self):
        reply = "s" * (_DELTA_CHUNK * 2 + 5)
        engine = ScriptedEngine([ScriptStep(reply=reply)])
        chunks = []
        await engine.complete([], on_delta=chunks.append)
        assert "".join(chunks) == reply
        assert all(len(c) <= _DELTA_CHUNK for c in chunks)
        assert len(chunks) == 3

    async def test_tool_call_ids_encode_ordinal_and_position(self):
        engine = ScriptedEngine(
            [ScriptStep(calls=[("a", {}), ("b", {"k": 1})]), ScriptStep(calls=[("c", {})])]
        )
        first = await engine.complete([])
        second = await engine.complete([])
        assert [c.id for c in first.message.tool_calls] == ["call_0_0", "call_0_1"]
        assert second.message.tool_calls[0].id == "call_1_0"
        assert first.message.tool_calls[1].arguments == {"k": 1}

    async def test_callable_arguments_receive_the_history(self):
        def from_last_function(history):
            return {"ref": history[-1].content}

        engine = ScriptedEngine([ScriptStep(calls=[("use", from_last_function)])])
        history = [ChatMessage.function("c0", "the-id")]
        completion = await engine.complete(history)
        assert completion.message.tool_calls[0].arguments == {"ref": "the-id"}

    def test_step_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ConfigError):
            ScriptStep.from_dict({"reply": "x", "surprise": 1})
        with pytest.raises(ConfigError):
            ScriptStep.from_dict({"calls": [{"arguments": {}}]})  # no name

    def test_step_from_dict_parses_calls(self):
        step = ScriptStep.from_dict(
            {"calls": [{"name": "search", "arguments": {"query": "x"}}], "latency": "0.5"}
        )
        assert step.calls == [("search", {"query": "x"})]
        assert step.latency == 0.5


class TestScriptBook:
    def make_book(self):
        return ScriptBook(
            root=[ScriptStep(reply="root says hi")],
            children={"Find  The THING": [ScriptStep(reply="found it")]},
            default_child=[ScriptStep(reply="generic child")],
            name="demo",
        )

    async def test_none_selects_the_root_script(self):
        engine = self.make_book().engine_for(None)
        assert (await engine.complete([])).message.content == "root says hi"
        assert engine.description == "scripted:demo:root"

    async def test_child_match_ignores_case_and_whitespace(self):
        engine = self.make_book().engine_for("  find the\tthing ")
        assert (await engine.complete([])).message.content == "found it"

    async def test_unmatched_child_falls_back_to_default(self):
        engine = self.make_book().engine_for("anything else")
        assert (await engine.complete([])).message.content == "generic child"

    async def test_no_default_yields_an_empty_failing_script(self):
        book = ScriptBook(root=[ScriptStep(reply="r")], name="bare")
        engine = book.engine_for("mystery task")
        with pytest.raises(EngineError):
            await engine.complete([])

    async def test_each_spawn_gets_a_fresh_ordinal_counter(self):
        book = self.make_book()
        a = book.engine_for("find the thing")
        b = book.engine_for("find the thing")
        await a.complete([])
        assert (await b.complete([])).message.content == "found it"

    def test_from_dict_requires_root(self):
        with pytest.raises(ConfigError):
            ScriptBook.from_dict({"children": {}})


def respond_with(payload, status_code=200):
    def handler(request: httpx.Request) -> httpx.Response:
        handler.last_request = request
        return httpx.Response(status_code, json=payload)

    handler.last_request = None
    return handler


def engine_with(handler, **kwargs) -> HTTPEngine:
    return HTTPEngine(
        "https://llm.example/v1",
        "test-model",
        transport=httpx.MockTransport(handler),
        **kwargs,
    )


COMPLETION_PAYLOAD = {
    "choices": [
        {
            "message": {
                "role": "assistant",
                "content": "hello",
                "tool_calls": [
                    {
                        "id": "tc1",
                        "type": "function",
                        "function": {"name": "search", "arguments": '{"query": "x"}'},
                    }
                ],
            }
        }
    ],
    "usage": {"prompt_tokens": 11, "completion_tokens": 4},
}


class TestHTTPEngine:
    async def test_parses_reply_tool_calls_and_usage(self):
        handler = respond_with(COMPLETION_PAYLOAD)
        engine = engine_with(handler)
        completion = await engine.complete([ChatMessage.user("hi")])
        await engine.close()
        message = completion.message
        assert message.content == "hello"
        assert message.tool_calls == [ToolCall("tc1", "search", {"query": "x"})]
        assert (completion.prompt_tokens, completion.completion_tokens) == (11, 4)
        body = json.loads(handler.last_request.content)
        assert body["model"] == "test-model"
        assert body["stream"] is False
        assert handler.last_request.url.path.endswith("/chat/completions")

    async def test_history_maps_to_wire_roles(self):
        handler = respond_with(COMPLETION_PAYLOAD)
        engine = engine_with(handler)
        history = [
            ChatMessage.system("be brief"),
            ChatMessage.user("hi"),
            ChatMessage.assistant("", [ToolCall("tc0", "search", {"query": "q"})]),
            ChatMessage.function("tc0", "result"),
        ]
        await engine.complete(history)
        await engine.close()
        wire = json.loads(handler.last_request.content)["messages"]
        assert [m["role"] for m in wire] == ["system", "user", "assistant", "tool"]
        assert wire[2]["tool_calls"][0]["function"]["arguments"] == '{"query": "q"}'
        assert wire[3]["tool_call_id"] == "tc0"

    @pytest.mark.parametrize(
        "status, retriable", [(429, True), (503, True), (400, False), (404, False)]
    )
    async def test_http_status_maps_to_retriability(self, status, retriable):
        engine = engine_with(respond_with({}, status_code=status))
        with pytest.raises(EngineError) as exc_info:
            await engine.complete([])
        await engine.close()
        assert exc_info.value.retriable is retriable

    async def test_transport_failures_are_retriable(self):
        def handler(request):
            raise httpx.ConnectError("refused")

        engine = engine_with(handler)
        with pytest.raises(EngineError) as exc_info:
            await engine.complete([])
        await engine.close()
        assert exc_info.value.retriable is True

    async def test_malformed_body_is_permanent(self):
        engine = engine_with(respond_with({"choices": []}))
        with pytest.raises(EngineError) as exc_info:
            await engine.complete([])
        await engine.close()
        assert exc_info.value.retriable is False

    async def test_api_key_header_comes_from_environment(self, monkeypatch):
        monkeypatch.setenv("MY_KEY", "sk-test-123")
        handler = respond_with(COMPLETION_PAYLOAD)
        engine = engine_with(handler, api_key_env="MY_KEY")
        await engine.complete([])
        await engine.close()
        assert handler.last_request.headers["Authorization"] == "Bearer sk-test-123"

    def test_description_names_the_model(self):
        engine = engine_with(respond_with({}))
        assert engine.description.startswith("http:test-model")
