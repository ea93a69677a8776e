"""Tool declaration, schema export, validation, and execution."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from colony import ToolParam, ToolRegistry, ToolSpec
from colony.messages import ToolCall
from colony.tools import (
    TRUNCATION_SUFFIX,
    http_get_tool,
    mock_search_tool,
    standard_tools,
    truncate_output,
)

pytestmark = pytest.mark.anyio


def spec_with(executor, params=None, name="widget"):
    return ToolSpec(
        name=name,
        description="test widget",
        params=params if params is not None else [ToolParam("x", "integer")],
        executor=executor,
    )


class TestDeclarations:
    def test_unknown_param_type_rejected(self):
        with pytest.raises(ValueError):
            ToolParam("x", "float64")

    def test_duplicate_param_names_rejected(self):
        with pytest.raises(ValueError):
            ToolSpec("t", "d", params=[ToolParam("x"), ToolParam("x", "integer")])

    def test_schema_shape(self):
        spec = ToolSpec(
            "lookup",
            "Look something up.",
            params=[
                ToolParam("query", "string", description="what to find"),
                ToolParam("limit", "integer", required=False),
            ],
        )
        schema = spec.schema()
        assert schema["type"] == "function"
        fn = schema["function"]
        assert fn["name"] == "lookup"
        assert fn["parameters"]["properties"]["query"] == {
            "type": "string",
            "description": "what to find",
        }
        assert fn["parameters"]["required"] == ["query"]

    def test_registry_rejects_duplicates_and_reports_names(self):
        registry = ToolRegistry()
        registry.register(spec_with(None, name="a"))
        registry.register(spec_with(None, name="b"))
        with pytest.raises(ValueError):
            registry.register(spec_with(None, name="a"))
        assert registry.names() == ["a", "b"]
        assert "a" in registry and "zzz" not in registry
        assert len(registry) == 2
        assert [s["function"]["name"] for s in registry.schemas()] == ["a", "b"]


class TestInvocation:
    async def test_sync_and_async_executors(self):
        async def double_async(x):
            return x * 2

        registry = ToolRegistry()
        registry.register(spec_with(lambda x: x + 1, name="inc"))
        registry.register(spec_with(double_async, name="dbl"))
        inc = await registry.invoke(ToolCall("c1", "inc", {"x": 4}))
        dbl = await registry.invoke(ToolCall("c2", "dbl", {"x": 4}))
        assert (inc.content, inc.is_error) == ("5", False)
        assert dbl.content == "8"
        assert inc.call_id == "c1"

    async def test_non_string_results_become_json(self):
        registry = ToolRegistry()
        registry.register(spec_with(lambda x: {"value": x, "ok": True}))
        result = await registry.invoke(ToolCall("c", "widget", {"x": 3}))
        assert result.content == '{"value": 3, "ok": true}'

    async def test_unknown_function_is_an_error_result(self):
        registry = ToolRegistry()
        result = await registry.invoke(ToolCall("c", "ghost", {}))
        assert result.is_error
        assert "ghost" in result.content

    @pytest.mark.parametrize(
        "arguments, fragment",
        [
            ({}, "missing required"),
            ({"x": 1, "y": 2}, "unexpected parameter"),
            ({"x": "three"}, "must be a integer"),
            ({"x": True}, "got a boolean"),
            ({"x": None}, "missing required"),
        ],
    )
    async def test_argument_validation(self, arguments, fragment):
        registry = ToolRegistry()
        registry.register(spec_with(lambda x: x))
        result = await registry.invoke(ToolCall("c", "widget", arguments))
        assert result.is_error
        assert fragment in result.content

    async def test_optional_params_may_be_omitted(self):
        registry = ToolRegistry()
        registry.register(
            spec_with(
                lambda x=0: f"got {x}",
                params=[ToolParam("x", "integer", required=False)],
            )
        )
        result = await registry.invoke(ToolCall("c", "widget", {}))
        assert (result.content, result.is_error) == ("got 0", False)

    async def test_raising_executor_never_propagates(self):
        def boom(x):
            raise RuntimeError("kaboom")

        registry = ToolRegistry()
        registry.register(spec_with(boom))
        result = await registry.invoke(ToolCall("c", "widget", {"x": 1}))
        assert result.is_error
        assert "kaboom" in result.content

    async def test_output_is_truncated_at_byte_budget(self):
        registry = ToolRegistry(output_limit=64)
        registry.register(spec_with(lambda x: "a" * 500))
        result = await registry.invoke(ToolCall("c", "widget", {"x": 1}))
        assert result.content.endswith(TRUNCATION_SUFFIX)
        assert len(result.content.encode()) <= 64


class TestTruncation:
    @given(st.text(max_size=300), st.integers(min_value=30, max_value=200))
    def test_budget_is_respected(self, text, limit):
        out = truncate_output(text, limit)
        assert len(out.encode("utf-8")) <= limit
        if len(text.encode("utf-8")) <= limit:
            assert out == text
        else:
            assert out.endswith(TRUNCATION_SUFFIX)

    def test_multibyte_cut_never_splits_a_character(self):
        out = truncate_output("é" * 200, 40)
        out.encode("utf-8")  # must be valid UTF-8
        assert out.endswith(TRUNCATION_SUFFIX)


class TestBundledTools:
    async def test_search_hits_fixture_case_insensitively(self):
        search = mock_search_tool()
        direct = search.executor(query="capital of France")
        shouted = search.executor(query="  CAPITAL   OF   FRANCE ")
        assert direct == shouted
        assert "Paris" in direct

    async def test_search_miss_is_deterministic(self):
        search = mock_search_tool()
        assert search.executor(query="zzz unknown") == "No results found for: zzz unknown"

    def test_standard_set(self):
        names = [spec.name for spec in standard_tools()]
        assert names == ["get", "search"]
        assert http_get_tool().schema()["function"]["name"] == "get"
