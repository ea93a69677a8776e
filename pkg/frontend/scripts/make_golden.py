"""Regenerate the golden replay fixture for the frontend tests.

Runs one deterministic scripted session (root fans out to two children,
then closes), saves its raw log next to an expected-state file, and
records three staged cursor positions chosen so the replay walks through
all of the running / waiting / done node colors.

Usage: python3 scripts/make_golden.py  (from the frontend directory)
"""

import asyncio
import json
import sys
from pathlib import Path

from colony import AgentConfig, EventLog, ScriptBook, ScriptStep, Session, reconstruct

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "golden"

# must match STATE_COLORS in src/graph.ts; the test pins the UI to these
STATE_COLORS = {
    "RUNNING": "#34a853",
    "WAITING": "#f4b400",
    "DONE": "#9aa0a6",
    "ERRORED": "#ea4335",
}


def fanout_config() -> AgentConfig:
    book = ScriptBook(
        root=[
            ScriptStep(
                calls=[
                    ("delegate", {"instructions": "chart the northern shelf"}),
                    ("delegate", {"instructions": "chart the southern shelf"}),
                ],
                prompt_tokens=12,
                completion_tokens=6,
            ),
            ScriptStep(reply="Both shelves are charted.", prompt_tokens=20, completion_tokens=8),
        ],
        children={
            "chart the northern shelf": [
                ScriptStep(reply="Northern shelf: 14 ridges.", prompt_tokens=5, completion_tokens=4)
            ],
            "chart the southern shelf": [
                ScriptStep(reply="Southern shelf: 9 trenches.", prompt_tokens=5, completion_tokens=4)
            ],
        },
        name="golden",
    )
    return AgentConfig(engine=book.engine_for)


async def run() -> None:
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    for stale in ("events.jsonl", "session.json", "expected.json"):
        (FIXTURE_DIR / stale).unlink(missing_ok=True)
    session = Session(
        fanout_config(),
        save_dir=FIXTURE_DIR,
        session_id="golden",
        title="Golden fixture session",
    )
    session.start()
    await session.run_round("Chart both continental shelves.")
    await session.close()

    log = EventLog.load(FIXTURE_DIR)
    final = reconstruct(log.events)
    assert final.root_id is not None
    assert len(final.agents) == 3
    assert all(n.state.value == "DONE" for n in final.agents.values())

    def states_at(index: int) -> dict[str, str]:
        snap = reconstruct(log.events, index)
        return {agent_id: node.state.value for agent_id, node in snap.agents.items()}

    stages = []

    def add_stage(label: str, index: int) -> None:
        states = states_at(index)
        stages.append(
            {
                "label": label,
                "index": index,
                "states": states,
                "colors_present": sorted({STATE_COLORS[s] for s in states.values()}),
            }
        )

    add_stage("root-running", 1)
    mid = next(
        i
        for i in range(1, len(log.events) + 1)
        if set(states_at(i).values()) == {"WAITING", "RUNNING"}
    )
    add_stage("fanned-out", mid)
    add_stage("closed", len(log.events))

    seen = {color for stage in stages for color in stage["colors_present"]}
    assert {STATE_COLORS["RUNNING"], STATE_COLORS["WAITING"], STATE_COLORS["DONE"]} <= seen

    root = final.agents[final.root_id]
    expected = {
        "event_count": len(log.events),
        "root_id": final.root_id,
        "node_count": len(final.agents),
        "edges": sorted([root.id, child] for child in root.children),
        "state_colors": STATE_COLORS,
        "final_states": {agent_id: n.state.value for agent_id, n in final.agents.items()},
        "final_agents": {agent_id: n.to_payload() for agent_id, n in final.agents.items()},
        "rounds_completed": final.rounds_completed,
        "stages": stages,
    }
    (FIXTURE_DIR / "expected.json").write_text(json.dumps(expected, indent=2) + "\n")
    print(f"wrote {FIXTURE_DIR} ({len(log.events)} events, mid stage at {mid})")


if __name__ == "__main__":
    sys.exit(asyncio.run(run()))
