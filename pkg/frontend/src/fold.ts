/** Pure event fold: rebuild session state by applying log events in order.
 *
 * This mirrors the server's replay semantics so the client can scrub a
 * downloaded log locally and keep a live view current by applying frames
 * as they arrive. Events referencing unknown agents are skipped (and
 * counted) rather than thrown: a live view must survive a partial stream.
 */

import type {
  AgentPayload,
  ChatMessageWire,
  EventWire,
  SessionStateWire,
} from "./types.js";

export interface TokenCount {
  prompt: number;
  completion: number;
}

export interface ClientSnapshot {
  rootId: string | null;
  /** Insertion order is spawn order. */
  agents: Map<string, AgentPayload>;
  tokens: Map<string, TokenCount>;
  roundsCompleted: number;
  /** Number of events folded in (also: index of the next event). */
  index: number;
  /** Events that referenced agents this snapshot never saw. */
  skipped: number;
}

export function emptySnapshot(): ClientSnapshot {
  return {
    rootId: null,
    agents: new Map(),
    tokens: new Map(),
    roundsCompleted: 0,
    index: 0,
    skipped: 0,
  };
}

/** Deep-copy a snapshot so checkpoints stay immutable. */
export function copySnapshot(snap: ClientSnapshot): ClientSnapshot {
  return {
    rootId: snap.rootId,
    agents: new Map(
      [...snap.agents].map(([id, node]) => [id, structuredClone(node)]),
    ),
    tokens: new Map([...snap.tokens].map(([id, t]) => [id, { ...t }])),
    roundsCompleted: snap.roundsCompleted,
    index: snap.index,
    skipped: snap.skipped,
  };
}

function asMessage(event: EventWire): ChatMessageWire {
  return {
    role: event["role"] as ChatMessageWire["role"],
    content: (event["content"] as string) ?? "",
    tool_calls: (event["tool_calls"] as ChatMessageWire["tool_calls"]) ?? null,
    tool_call_id: (event["tool_call_id"] as string) ?? null,
  };
}

/** Apply one event in place. Unknown event types advance the index only. */
export function applyEvent(snap: ClientSnapshot, event: EventWire): void {
  const agentId = typeof event["id"] === "string" ? (event["id"] as string) : null;
  switch (event.type) {
    case "kani_spawn": {
      const node = structuredClone(event) as unknown as AgentPayload;
      const payload: AgentPayload = {
        id: node.id,
        parent: node.parent ?? null,
        children: [...(node.children ?? [])],
        depth: node.depth,
        state: node.state,
        history: node.history ?? [],
        engine_desc: node.engine_desc ?? "",
        tool_names: node.tool_names ?? [],
        system_prompt: node.system_prompt ?? null,
      };
      snap.agents.set(payload.id, payload);
      if (payload.parent === null) {
        if (snap.rootId === null) snap.rootId = payload.id;
      } else {
        const parent = snap.agents.get(payload.parent);
        if (parent === undefined) snap.skipped += 1;
        else if (!parent.children.includes(payload.id)) parent.children.push(payload.id);
      }
      break;
    }
    case "kani_state_change": {
      const node = agentId === null ? undefined : snap.agents.get(agentId);
      if (node === undefined) snap.skipped += 1;
      else node.state = event["state"] as AgentPayload["state"];
      break;
    }
    case "kani_message": {
      const node = agentId === null ? undefined : snap.agents.get(agentId);
      if (node === undefined) snap.skipped += 1;
      else node.history.push(asMessage(event));
      break;
    }
    case "root_message":
      // duplicate of the root's kani_message; recorded for seeking only
      break;
    case "tokens_used": {
      if (agentId === null) {
        snap.skipped += 1;
        break;
      }
      const count = snap.tokens.get(agentId) ?? { prompt: 0, completion: 0 };
      count.prompt += (event["prompt_tokens"] as number) ?? 0;
      count.completion += (event["completion_tokens"] as number) ?? 0;
      snap.tokens.set(agentId, count);
      break;
    }
    case "round_complete":
      snap.roundsCompleted += 1;
      break;
    default:
      break;
  }
  snap.index += 1;
}

/** Fold `events[0 .. upTo)` into a fresh snapshot. */
export function foldEvents(events: EventWire[], upTo?: number): ClientSnapshot {
  const limit = upTo === undefined ? events.length : upTo;
  if (limit < 0 || limit > events.length) {
    throw new RangeError(`fold limit ${limit} outside 0..${events.length}`);
  }
  const snap = emptySnapshot();
  for (let i = 0; i < limit; i += 1) applyEvent(snap, events[i]!);
  return snap;
}

/** Seed a snapshot from a websocket sync frame's full state. */
export function fromSyncState(state: SessionStateWire, index: number): ClientSnapshot {
  const snap = emptySnapshot();
  snap.rootId = state.root_id;
  for (const [id, node] of Object.entries(state.agents)) {
    snap.agents.set(id, structuredClone(node));
  }
  snap.index = index;
  return snap;
}

/** Comparable plain form (sorted keys) for tests and debugging. */
export function snapshotAgentsPayload(
  snap: ClientSnapshot,
): Record<string, AgentPayload> {
  const out: Record<string, AgentPayload> = {};
  for (const id of [...snap.agents.keys()].sort()) {
    out[id] = structuredClone(snap.agents.get(id)!);
  }
  return out;
}
