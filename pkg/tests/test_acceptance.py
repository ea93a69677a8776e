"""Acceptance gate: one test per release criterion, one printed verdict each.

Each test re-derives its inputs from scratch (fresh scenario runs, seeded
randomness, independent oracles) rather than reusing other fixtures, so a
verdict here stands on its own. Verdict lines are written to the real
stdout so they appear even under pytest's capture.
"""

import asyncio
import contextlib
import json
import random
import string
import time

import pytest

from colony import (
    AgentConfig,
    CommitmentClass,
    Event,
    EventLog,
    ScriptBook,
    ScriptStep,
    Session,
    build_graph,
    classify_commitment,
    count_tokens,
    reconstruct,
)
from colony.batch import batch_run
from colony.delegation import IDENTICAL_INSTRUCTIONS_REFUSAL, guard_check

from oracles import (
    all_parent_vectors,
    brute_force_classify,
    random_parent_vector,
    sum_tokens,
)
from scenarios import SCENARIOS, run_all, run_scenario, SCENARIOS_BY_NAME
from test_delegation import GUARD_TABLE


@pytest.fixture
def criterion(capsys):
    """Context manager that prints a verdict line past pytest's capture."""

    @contextlib.contextmanager
    def verdict(name: str):
        try:
            yield
        except BaseException:
            with capsys.disabled():
                print(f"\n[acceptance] {name}: FAIL", flush=True)
            raise
        else:
            with capsys.disabled():
                print(f"\n[acceptance] {name}: PASS", flush=True)

    return verdict


def test_replay_equals_live(tmp_path, criterion):
    """Folding each scenario's log reproduces the live final state exactly."""
    with criterion("replay-equals-live"):
        started = time.perf_counter()
        runs = asyncio.run(run_all(tmp_path))
        elapsed = time.perf_counter() - started
        assert len(runs) >= 10
        covered = set(SCENARIOS_BY_NAME)
        assert {
            "one_fanout",
            "wait_retrieved",
            "wait_zombie",
            "guard_refusal",
            "depth_limit",
            "engine_error",
        } <= covered
        for run in runs.values():
            snapshot = reconstruct(run.log.events)
            live = run.live_final
            assert set(snapshot.agents) == set(live), run.name
            for agent_id, node in snapshot.agents.items():
                assert node.to_payload() == live[agent_id].to_payload(), (
                    run.name,
                    agent_id,
                )
            root_id = run.log.events[0].data["id"]
            assert snapshot.root_id == root_id, run.name
        assert elapsed < 30.0, f"scenario suite took {elapsed:.1f}s"


# pinned wire format: payload keys per built-in type, stated independently
# of the package's own table
EXPECTED_PAYLOAD_KEYS = {
    "kani_spawn": {
        "id",
        "parent",
        "children",
        "depth",
        "state",
        "history",
        "engine_desc",
        "tool_names",
        "system_prompt",
    },
    "kani_state_change": {"id", "state"},
    "tokens_used": {"id", "prompt_tokens", "completion_tokens"},
    "kani_message": {"id", "role", "content", "tool_calls", "tool_call_id"},
    "root_message": {"id", "role", "content", "tool_calls", "tool_call_id"},
    "round_complete": {"id"},
}


def test_event_schema_conformance(tmp_path, criterion):
    """Logged lines parse, built-ins carry exactly the pinned payload keys,
    and parse(serialize(e)) is the identity on randomized events."""
    with criterion("event-schema"):
        runs = asyncio.run(run_all(tmp_path))
        builtin_seen = set()
        for run in runs.values():
            raw_lines = (run.save_dir / "events.jsonl").read_text().splitlines()
            for line in raw_lines:
                event = Event.parse(line)  # every line must parse
                obj = json.loads(line)
                assert "type" in obj and "timestamp" in obj
                if event.type in EXPECTED_PAYLOAD_KEYS:
                    builtin_seen.add(event.type)
                    assert (
                        set(event.data) == EXPECTED_PAYLOAD_KEYS[event.type]
                    ), (run.name, event.type)
        assert builtin_seen == set(EXPECTED_PAYLOAD_KEYS), "suite must hit all six"

        rng = random.Random(0xACCE97)
        alphabet = string.ascii_letters + string.digits + " _-é中"

        def rand_value(depth=0):
            kind = rng.randrange(6 if depth < 2 else 4)
            if kind == 0:
                return rng.randint(-(10**9), 10**9)
            if kind == 1:
                return rng.random() * 10**6
            if kind == 2:
                return "".join(rng.choice(alphabet) for _ in range(rng.randrange(12)))
            if kind == 3:
                return rng.choice([True, False, None])
            if kind == 4:
                return [rand_value(depth + 1) for _ in range(rng.randrange(3))]
            return {
                f"k{i}": rand_value(depth + 1) for i in range(rng.randrange(3))
            }

        for _ in range(1000):
            event = Event(
                type=rng.choice(list(EXPECTED_PAYLOAD_KEYS) + ["custom_thing"]),
                timestamp=rng.random() * 2**31,
                data={f"f{i}": rand_value() for i in range(rng.randrange(6))},
            )
            assert Event.parse(event.serialize()) == event


def test_commitment_classifier_oracle(criterion):
    """The classifier agrees with a brute-force evaluator exhaustively to 6
    nodes and on 1,000 random trees up to 50 nodes."""
    with criterion("classifier-oracle"):

        def graph_of(parents):
            events = []
            for i, parent in enumerate(parents):
                events.append(
                    Event(
                        "kani_spawn",
                        1.0,
                        {
                            "id": f"n{i}",
                            "parent": None if parent is None else f"n{parent}",
                            "children": [],
                            "depth": 0,
                            "state": "RUNNING",
                            "history": [],
                            "engine_desc": "",
                            "tool_names": [],
                            "system_prompt": None,
                        },
                    )
                )
            return build_graph(events)

        for size in range(1, 7):
            for parents in all_parent_vectors(size):
                got = classify_commitment(graph_of(parents)).value
                assert got == brute_force_classify(parents), parents

        rng = random.Random(0x5EED)
        for _ in range(1000):
            parents = random_parent_vector(rng, rng.randint(1, 50))
            got = classify_commitment(graph_of(parents)).value
            assert got == brute_force_classify(parents), parents

        assert classify_commitment(graph_of([None, 0])) is CommitmentClass.OVERCOMMITTED
        assert (
            classify_commitment(graph_of([None, 0, 1])) is CommitmentClass.UNDERCOMMITTED
        )
        assert (
            classify_commitment(graph_of([None, 0, 0, 0])) is CommitmentClass.NORMAL
        )


def test_token_accounting(criterion):
    """Per-agent sums match plain arithmetic, and the grand total equals the
    sum over raw events (conservation) on 100 random logs."""
    with criterion("token-accounting"):
        known = [("root", 10, 5), ("kid_a", 3, 2), ("root", 7, 1), ("kid_b", 0, 4)]
        events = [
            Event(
                "tokens_used",
                1.0,
                {"id": agent, "prompt_tokens": p, "completion_tokens": c},
            )
            for agent, p, c in known
        ]
        usage = count_tokens(events)
        assert {
            a: (c.prompt, c.completion) for a, c in usage.per_agent.items()
        } == {"root": (17, 6), "kid_a": (3, 2), "kid_b": (0, 4)}

        rng = random.Random(0x70CEA5)
        for _ in range(100):
            records = [
                (
                    f"agent{rng.randrange(6)}",
                    rng.randrange(10**4),
                    rng.randrange(10**4),
                )
                for _ in range(rng.randrange(60))
            ]
            events = [
                Event(
                    "tokens_used",
                    1.0,
                    {"id": a, "prompt_tokens": p, "completion_tokens": c},
                )
                for a, p, c in records
            ]
            usage = count_tokens(events)
            per_agent = {
                a: (c.prompt, c.completion) for a, c in usage.per_agent.items()
            }
            assert per_agent == sum_tokens(records)
            # conservation: agent-wise totals add up to the event-wise total
            assert usage.grand_total().total == sum(p + c for _, p, c in records)


def _latency_config(parallel: bool) -> AgentConfig:
    both = [
        ("delegate", {"instructions": "probe the east tunnel"}),
        ("delegate", {"instructions": "probe the west tunnel"}),
    ]
    if parallel:
        root = [ScriptStep(calls=both), ScriptStep(reply="both probed")]
    else:
        root = [
            ScriptStep(calls=both[:1]),
            ScriptStep(calls=both[1:]),
            ScriptStep(reply="both probed"),
        ]
    book = ScriptBook(
        root=root,
        default_child=[ScriptStep(reply="probed", latency=0.1)],
    )
    return AgentConfig(engine=book.engine_for)


def test_parallel_delegation(tmp_path, criterion):
    """Two 100 ms children issued together finish the round in under 180 ms;
    issued one per turn they need over 190 ms."""
    with criterion("parallelism"):

        async def timed_round(parallel: bool) -> float:
            session = Session(
                _latency_config(parallel), save_dir=tmp_path / f"par-{parallel}"
            )
            started = time.perf_counter()
            await session.run_round("probe both tunnels")
            elapsed = time.perf_counter() - started
            await session.close()
            return elapsed

        together = asyncio.run(timed_round(True))
        one_by_one = asyncio.run(timed_round(False))
        assert together < 0.180, f"parallel round took {together * 1000:.0f}ms"
        assert one_by_one > 0.190, f"serialized round took {one_by_one * 1000:.0f}ms"


def test_guard_behavior(tmp_path, criterion):
    """The normalization truth table holds, and an in-flight identical
    delegation returns the refusal text without spawning anything."""
    with criterion("guard"):
        assert len(GUARD_TABLE) >= 12
        for received, proposed, allowed in GUARD_TABLE:
            verdict = guard_check(received, proposed)
            assert verdict.allowed is allowed, (received, proposed)
            if not allowed:
                assert verdict.refusal_message == IDENTICAL_INSTRUCTIONS_REFUSAL

        run = asyncio.run(run_scenario(SCENARIOS_BY_NAME["guard_refusal"], tmp_path))
        spawns = [e for e in run.log.events if e.type == "kani_spawn"]
        assert len(spawns) == 2  # root and first child only; the retry spawned nothing
        child = next(n for n in run.live_final.values() if n.parent is not None)
        refusals = [
            m for m in child.history if m.content == IDENTICAL_INSTRUCTIONS_REFUSAL
        ]
        assert len(refusals) == 1


def test_depth_bound(tmp_path, criterion):
    """An always-delegate script stops at the depth limit: max_depth + 1
    spawns, and exactly one refusal, held by the frontier agent."""
    with criterion("depth-bound"):
        scenario = SCENARIOS_BY_NAME["depth_limit"]
        max_depth = scenario.expect["max_depth"]
        run = asyncio.run(run_scenario(scenario, tmp_path))
        spawns = [e for e in run.log.events if e.type == "kani_spawn"]
        assert len(spawns) == max_depth + 1
        assert sorted(e.data["depth"] for e in spawns) == list(range(max_depth + 1))
        refusal_counts = {
            node.depth: sum(
                1 for m in node.history if f"depth limit of {max_depth}" in m.content
            )
            for node in run.live_final.values()
        }
        assert refusal_counts == {d: (1 if d == max_depth else 0) for d in range(max_depth + 1)}


def test_batch_isolation(tmp_path, criterion):
    """Three tasks produce three saves with one round_complete each; an
    injected failure leaves the other tasks untouched."""
    with criterion("batch"):
        good = ScriptBook(
            root=[
                ScriptStep(calls=[("delegate", {"instructions": "the detail work"})]),
                ScriptStep(reply="task done"),
            ],
            children={"the detail work": [ScriptStep(reply="details handled")]},
        )
        config = AgentConfig(engine=good.engine_for)
        tasks = ["survey the pond", "map the orchard", "count the hives"]
        report = asyncio.run(batch_run(tasks, config, tmp_path / "clean", concurrency=2))
        assert report.succeeded == 3
        save_dirs = {r.save_dir for r in report.results}
        assert len(save_dirs) == 3
        for result in report.results:
            events = EventLog.load(result.save_dir).events
            assert sum(1 for e in events if e.type == "round_complete") == 1

        # same batch, but the second task's engine fails; root-only scripts
        # keep the engine factory call count at one per task
        plain = ScriptBook(root=[ScriptStep(reply="task done")])
        books = iter([plain, ScriptBook(root=[ScriptStep(error="injected failure")]), plain])
        flaky = AgentConfig(engine=lambda _i: next(books).engine_for(None))
        report = asyncio.run(batch_run(tasks, flaky, tmp_path / "flaky", concurrency=1))
        assert [r.completed for r in report.results] == [True, False, True]
        for result in (report.results[0], report.results[2]):
            events = EventLog.load(result.save_dir).events
            assert sum(1 for e in events if e.type == "round_complete") == 1
        failed_events = EventLog.load(report.results[1].save_dir).events
        assert sum(1 for e in failed_events if e.type == "round_complete") == 0
        assert "injected failure" in report.results[1].error
