"""Log folding, seeks, token accounting, and commitment classification."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colony import (
    CommitmentClass,
    Event,
    Replayer,
    SystemSnapshot,
    build_graph,
    classify_commitment,
    count_tokens,
    reconstruct,
)
from colony.errors import StructuralLogError
from colony.replay import (
    END_OF_LOG,
    DelegationGraph,
    classify_log,
    commitment_rates,
    seek_next_for_agent,
    seek_next_root_message,
    seek_prev_for_agent,
    seek_prev_root_message,
)

from oracles import (
    all_parent_vectors,
    brute_force_classify,
    children_of,
    random_parent_vector,
    sum_tokens,
)


def spawn(agent_id: str, parent: str | None, depth: int = 0) -> Event:
    return Event(
        "kani_spawn",
         1.0,
        {
            "id": agent_id,
            "parent": parent,
            "children": [],
            "depth": depth,
            "state": "RUNNING",
            "history": [],
            "engine_desc": "scripted:test",
            "tool_names": [],
            "system_prompt": None,
        },
    )


def log_from_parents(parents: list) -> list[Event]:
    """Synthetic spawn-only log for a parent-vector tree (node i = 'a{i}')."""
    events = []
    for i, parent in enumerate(parents):
        parent_id = None if parent is None else f"a{parent}"
        events.append(spawn(f"a{i}", parent_id))
    return events


def snapshot_key(snapshot: SystemSnapshot) -> tuple:
    return (
        snapshot.root_id,
        snapshot.rounds_completed,
        snapshot.event_index,
        {k: v.to_payload() for k, v in snapshot.agents.items()},
        snapshot.tokens.to_payload(),
    )


class TestFold:
    def test_zero_events_is_the_empty_state(self):
        snap = reconstruct([], 0)
        assert snap.agents == {} and snap.root_id is None and snap.event_index == 0

    @pytest.mark.parametrize("bad", [-1, 1])
    def test_index_outside_the_log_raises(self, bad):
        with pytest.raises(IndexError):
            reconstruct([], bad)

    def test_index_counts_events_applied(self, corpus):
        events = corpus["one_fanout"].log.events
        for i in (0, 1, len(events) // 2, len(events)):
            assert reconstruct(events, i).event_index == i

    def test_fold_is_prefix_consistent(self, corpus):
        # folding to i then applying the rest equals folding everything
        events = corpus["deep_wide"].log.events
        full = snapshot_key(reconstruct(events))
        for i in range(0, len(events) + 1, max(1, len(events) // 7)):
            partial = reconstruct(events, i)
            for event in events[i:]:
                partial.apply(event)
            assert snapshot_key(partial) == full

    def test_fold_is_deterministic(self, corpus):
        for run in corpus.values():
            a = snapshot_key(reconstruct(run.log.events))
            b = snapshot_key(reconstruct(run.log.events))
            assert a == b, run.name

    def test_root_message_changes_nothing_but_the_index(self, corpus):
        events = corpus["solo"].log.events
        root_positions = [i for i, e in enumerate(events) if e.type == "root_message"]
        assert root_positions, "corpus must exercise root_message"
        for position in root_positions:
            before = reconstruct(events, position)
            after = reconstruct(events, position + 1)
            assert snapshot_key(before)[:2] == snapshot_key(after)[:2]
            assert snapshot_key(before)[3:] == snapshot_key(after)[3:]
            assert after.event_index == before.event_index + 1

    def test_custom_events_advance_the_index_only(self, corpus):
        events = corpus["wait_zombie"].log.events
        position = next(
            i for i, e in enumerate(events) if e.type == "delegation_cancelled"
        )
        before = reconstruct(events, position)
        after = reconstruct(events, position + 1)
        assert snapshot_key(before)[3:] == snapshot_key(after)[3:]

    def test_unknown_future_event_types_are_tolerated(self):
        events = log_from_parents([None]) + [
            Event("totally_new_thing", 2.0, {"weird": True})
        ]
        snap = reconstruct(events)
        assert snap.event_index == 2
        assert list(snap.agents) == ["a0"]

    @pytest.mark.parametrize(
        "event",
        [
            Event("kani_state_change", 1.0, {"id": "ghost", "state": "DONE"}),
            Event("kani_message", 1.0, {"id": "ghost", "role": "USER", "content": "x"}),
            Event("tokens_used", 1.0, {"id": "ghost", "prompt_tokens": 1, "completion_tokens": 1}),
            spawn("child", "ghost", 1),
        ],
    )
    def test_references_to_unknown_agents_fail_structurally(self, event):
        events = log_from_parents([None]) + [event]
        with pytest.raises(StructuralLogError):
            reconstruct(events)

    def test_spawn_links_child_into_parent(self):
        snap = reconstruct(log_from_parents([None, 0, 0]))
        assert snap.root_id == "a0"
        assert snap.agents["a0"].children == ["a1", "a2"]
        assert snap.agents["a1"].parent == "a0"


class TestSeeks:
    def test_root_message_seek_walks_forward(self, corpus):
        events = corpus["multi_round"].log.events
        hits = []
        position = -1
        while (position := seek_next_root_message(events, position)) != END_OF_LOG:
            hits.append(position)
        expected = [i for i, e in enumerate(events) if e.type == "root_message"]
        assert hits == expected
        assert seek_next_root_message(events, hits[-1]) == END_OF_LOG

    def test_root_message_seek_walks_backward(self, corpus):
        events = corpus["multi_round"].log.events
        expected = [i for i, e in enumerate(events) if e.type == "root_message"]
        assert seek_prev_root_message(events, len(events)) == expected[-1]
        assert seek_prev_root_message(events, expected[0]) == END_OF_LOG

    def test_agent_seek_filters_by_id(self, corpus):
        run = corpus["one_fanout"]
        events = run.log.events
        child_id = next(
            e.data["id"] for e in events if e.type == "kani_spawn" and e.data["parent"]
        )
        position = seek_next_for_agent(events, child_id, -1)
        assert events[position].data["id"] == child_id
        assert events[position].type == "kani_message"
        # that was the child's first message, so nothing lies behind it
        assert seek_prev_for_agent(events, child_id, position) == END_OF_LOG

    def test_seek_for_missing_agent_hits_end(self, corpus):
        events = corpus["solo"].log.events
        assert seek_next_for_agent(events, "nobody", -1) == END_OF_LOG


class TestTokens:
    def test_counts_match_the_oracle_on_real_logs(self, corpus):
        for run in corpus.values():
            usage = count_tokens(run.log.events)
            oracle = sum_tokens(
                (e.data["id"], e.data["prompt_tokens"], e.data["completion_tokens"])
                for e in run.events_of("tokens_used")
            )
            got = {
                agent: (c.prompt, c.completion) for agent, c in usage.per_agent.items()
            }
            assert got == oracle, run.name

    @given(
        st.lists(
            st.tuples(
                st.sampled_from(["a", "b", "c"]),
                st.integers(min_value=0, max_value=10**6),
                st.integers(min_value=0, max_value=10**6),
            ),
            max_size=40,
        )
    )
    def test_counts_match_the_oracle_on_random_streams(self, records):
        events = [
            Event("tokens_used", 1.0, {"id": a, "prompt_tokens": p, "completion_tokens": c})
            for a, p, c in records
        ]
        usage = count_tokens(events)
        got = {agent: (c.prompt, c.completion) for agent, c in usage.per_agent.items()}
        assert got == sum_tokens(records)
        grand = usage.grand_total()
        assert grand.prompt == sum(p for _, p, _ in records)
        assert grand.completion == sum(c for _, _, c in records)
        assert grand.total == grand.prompt + grand.completion

    def test_non_token_events_are_ignored(self, corpus):
        run = corpus["one_fanout"]
        only_tokens = [e for e in run.log.events if e.type == "tokens_used"]
        assert (
            count_tokens(run.log.events).to_payload()
            == count_tokens(only_tokens).to_payload()
        )

    def test_malformed_token_events_degrade_to_zero(self):
        usage = count_tokens(
            [
                Event("tokens_used", 1.0, {"id": "a", "prompt_tokens": 5}),
                Event("tokens_used", 1.0, {"prompt_tokens": 5, "completion_tokens": 5}),
            ]
        )
        assert usage.for_agent("a").prompt == 5
        assert usage.for_agent("a").completion == 0
        assert list(usage.per_agent) == ["a"]


class TestGraph:
    def test_graph_matches_the_parent_vector(self):
        parents = [None, 0, 0, 1, 3]
        graph = build_graph(log_from_parents(parents))
        assert graph.root == "a0"
        assert graph.node_count == 5
        oracle_children = children_of(parents)
        for i, kids in oracle_children.items():
            assert graph.children[f"a{i}"] == [f"a{k}" for k in kids]

    def test_status_tracks_the_last_state_change(self, corpus):
        run = corpus["child_error"]
        graph = build_graph(run.log.events)
        child_id = next(
            e.data["id"] for e in run.events_of("kani_spawn") if e.data["parent"]
        )
        assert graph.status[child_id] == "ERRORED"
        assert graph.status[graph.root] == "DONE"  # close() sealed the root

    def test_orphan_spawn_raises(self):
        with pytest.raises(StructuralLogError):
            build_graph([spawn("kid", "missing", 1)])

    def test_dot_output_mentions_every_node(self):
        graph = build_graph(log_from_parents([None, 0]))
        dot = graph.to_dot()
        assert dot.startswith("digraph")
        assert '"a0" -> "a1"' in dot


class TestClassifier:
    def test_exhaustive_against_the_oracle_up_to_six_nodes(self):
        checked = 0
        for size in range(1, 7):
            for parents in all_parent_vectors(size):
                graph = build_graph(log_from_parents(parents))
                got = classify_commitment(graph)
                assert got.value == brute_force_classify(parents), parents
                checked += 1
        # ordered trees on n nodes where each attaches to an earlier one:
        # (n-1)! shapes, summed over n = 1..6
        assert checked == 1 + 1 + 2 + 6 + 24 + 120

    def test_random_large_trees_against_the_oracle(self):
        rng = random.Random(20250825)
        for _ in range(1000):
            parents = random_parent_vector(rng, rng.randint(1, 50))
            graph = build_graph(log_from_parents(parents))
            assert classify_commitment(graph).value == brute_force_classify(parents), (
                parents
            )

    def test_labeled_examples(self):
        solo = build_graph(log_from_parents([None]))
        chain = build_graph(log_from_parents([None, 0, 1]))
        bush = build_graph(log_from_parents([None, 0, 0, 0]))
        assert classify_commitment(solo) is CommitmentClass.OVERCOMMITTED
        assert classify_commitment(chain) is CommitmentClass.UNDERCOMMITTED
        assert classify_commitment(bush) is CommitmentClass.NORMAL

    def test_classes_are_mutually_exclusive_and_total(self):
        rng = random.Random(7)
        for _ in range(200):
            parents = random_parent_vector(rng, rng.randint(1, 30))
            label = classify_commitment(build_graph(log_from_parents(parents)))
            assert label in (
                CommitmentClass.OVERCOMMITTED,
                CommitmentClass.UNDERCOMMITTED,
                CommitmentClass.NORMAL,
            )

    def test_empty_graph_is_unclassifiable(self):
        with pytest.raises(ValueError):
            classify_commitment(DelegationGraph())

    def test_root_anchored_restricts_chain_starts(self):
        # a 3-chain hangs off one child of a busy root
        parents = [None, 0, 0, 1, 3, 4]
        graph = build_graph(log_from_parents(parents))
        assert classify_commitment(graph) is CommitmentClass.UNDERCOMMITTED
        assert classify_commitment(graph, root_anchored=True) is CommitmentClass.NORMAL
        # a chain from the root itself is caught either way
        chain = build_graph(log_from_parents([None, 0, 1]))
        assert classify_commitment(chain, root_anchored=True) is CommitmentClass.UNDERCOMMITTED

    def test_corpus_scenarios_classify_as_designed(self, corpus):
        for run in corpus.values():
            expected = run.scenario.expect.get("class")
            if expected is None:
                continue
            assert classify_log(run.log).value == expected, run.name

    def test_string_enum_serializes_cleanly(self):
        import json

        assert json.dumps(CommitmentClass.NORMAL) == '"normal"'
        assert str(CommitmentClass.OVERCOMMITTED) == "overcommitted"


class TestRates:
    def test_rates_round_to_one_decimal(self, tmp_path):
        shapes = {
            "s1": [None],  # overcommitted
            "s2": [None, 0],  # overcommitted
            "s3": [None, 0, 1],  # undercommitted
        }
        logs = []
        for name, parents in shapes.items():
            directory = tmp_path / name
            directory.mkdir()
            lines = [e.serialize() for e in log_from_parents(parents)]
            (directory / "events.jsonl").write_text("\n".join(lines) + "\n")
            logs.append(directory)
        over, under = commitment_rates(logs)
        assert (over, under) == (66.7, 33.3)

    def test_unparseable_logs_are_excluded(self, tmp_path):
        good = tmp_path / "good"
        good.mkdir()
        (good / "events.jsonl").write_text(spawn("a0", None).serialize() + "\n")
        bad = tmp_path / "bad"
        bad.mkdir()
        (bad / "events.jsonl").write_text("not json\n")
        over, under = commitment_rates([good, bad])
        assert (over, under) == (100.0, 0.0)

    def test_no_sessions_is_all_zero(self):
        assert commitment_rates([]) == (0.0, 0.0)


class TestReplayer:
    def test_seek_matches_fresh_reconstruction(self, corpus):
        log = corpus["deep_wide"].log
        replayer = Replayer(log)
        count = len(log.events)
        for target in [0, 3, count, count // 2, 1, count - 1, 0, count]:
            via_replayer = snapshot_key(replayer.seek(target))
            assert via_replayer == snapshot_key(reconstruct(log.events, target))
            assert replayer.position == target

    def test_positions_clamp_to_the_log(self, corpus):
        log = corpus["solo"].log
        replayer = Replayer(log)
        assert replayer.seek(10**9).event_index == len(log.events)
        assert replayer.seek(-5).event_index == 0

    def test_stepping_both_directions(self, corpus):
        log = corpus["one_nested"].log
        replayer = Replayer(log)
        replayer.seek(4)
        assert replayer.forward().event_index == 5
        assert replayer.back().event_index == 4
        replayer.seek(0)
        assert replayer.back().event_index == 0  # clamped at the start

    def test_checkpoints_make_backward_seeks_cheap(self, corpus):
        log = corpus["deep_wide"].log
        replayer = Replayer(log, checkpoint_interval=5)
        replayer.seek(len(log.events))
        marks = set(replayer._checkpoints)
        assert 5 in marks and 10 in marks
        # a backward seek resumes from a checkpoint, not from zero
        snap = replayer.seek(7)
        assert snapshot_key(snap) == snapshot_key(reconstruct(log.events, 7))

    def test_interval_must_be_positive(self, corpus):
        with pytest.raises(ValueError):
            Replayer(corpus["solo"].log, checkpoint_interval=0)

    def test_events_between_clamps_both_ends(self, corpus):
        log = corpus["solo"].log
        replayer = Replayer(log)
        count = len(log.events)
        assert [e.index for e in replayer.events_between(0, 3)] == [0, 1, 2]
        assert replayer.events_between(-10, 10**9) == log.events
        assert replayer.events_between(5, 2) == []
        assert replayer.events_between(count, count + 5) == []


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_fold_prefix_property_on_synthetic_trees(data):
    rng = random.Random(data.draw(st.integers(0, 10**6)))
    parents = random_parent_vector(rng, rng.randint(1, 12))
    events = log_from_parents(parents)
    cut = data.draw(st.integers(0, len(events)))
    partial = reconstruct(events, cut)
    for event in events[cut:]:
        partial.apply(event)
    assert snapshot_key(partial) == snapshot_key(reconstruct(events))
