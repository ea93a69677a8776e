import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { LiveSession, SocketLike } from "../src/socket.js";
import type { ServerFrame, SessionHandle } from "../src/types.js";

class FakeSocket implements SocketLike {
  onopen: ((ev: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: ((ev: unknown) => void) | null = null;
  onerror: ((ev: unknown) => void) | null = null;
  sent: string[] = [];
  closed = false;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
  }

  push(frame: ServerFrame | Record<string, unknown>): void {
    this.onmessage?.({ data: JSON.stringify(frame) });
  }
}

const handle: SessionHandle = {
  id: "s1",
  title: "t",
  status: "active",
  root_id: "r",
  save_dir: null,
  event_count: 2,
  round_in_progress: true,
};

const rootPayload = {
  id: "r",
  parent: null,
  children: [],
  depth: 0,
  state: "RUNNING" as const,
  history: [],
  engine_desc: "e",
  tool_names: [],
  system_prompt: null,
};

function syncFrame(index: number): ServerFrame {
  return {
    frame: "sync",
    index,
    session: handle,
    state: { root_id: "r", agents: { r: structuredClone(rootPayload) } },
  };
}

describe("live session socket", () => {
  let sockets: FakeSocket[];
  let live: LiveSession;

  beforeEach(() => {
    vi.useFakeTimers();
    sockets = [];
    live = new LiveSession("ws://test/api/ws/sessions/s1", () => {
      const socket = new FakeSocket();
      sockets.push(socket);
      return socket;
    });
  });

  afterEach(() => {
    live.stop();
    vi.useRealTimers();
  });

  it("folds sync then event frames in order", () => {
    live.connect();
    const socket = sockets[0]!;
    socket.push(syncFrame(2));
    expect(live.status).toBe("live");
    expect(live.snapshot.agents.size).toBe(1);
    socket.push({
      frame: "event",
      index: 2,
      event: {
        type: "kani_message",
        timestamp: 3,
        id: "r",
        role: "ASSISTANT",
        content: "hello",
        tool_calls: null,
        tool_call_id: null,
      },
    });
    expect(live.snapshot.agents.get("r")!.history).toHaveLength(1);
    expect(live.snapshot.index).toBe(3);
  });

  it("accumulates deltas and clears them when the full message lands", () => {
    live.connect();
    const socket = sockets[0]!;
    socket.push(syncFrame(2));
    socket.push({ frame: "delta", id: "r", seq: 0, text: "hel" });
    socket.push({ frame: "delta", id: "r", seq: 1, text: "lo" });
    socket.push({ frame: "delta", id: "r", seq: 1, text: "lo" });
    expect(live.deltas.get("r")).toBe("hello");
    socket.push({
      frame: "event",
      index: 2,
      event: {
        type: "kani_message",
        timestamp: 3,
        id: "r",
        role: "ASSISTANT",
        content: "hello",
        tool_calls: null,
        tool_call_id: null,
      },
    });
    expect(live.deltas.has("r")).toBe(false);
  });

  it("resyncs through a fresh connection when indices skip", () => {
    live.connect();
    const first = sockets[0]!;
    first.push(syncFrame(2));
    first.push({
      frame: "event",
      index: 5,
      event: { type: "round_complete", timestamp: 4, id: "r" },
    });
    expect(live.status).toBe("connecting");
    expect(first.closed).toBe(true);
    vi.runOnlyPendingTimers();
    expect(sockets).toHaveLength(2);
    sockets[1]!.push(syncFrame(9));
    expect(live.status).toBe("live");
    expect(live.snapshot.index).toBe(9);
  });

  it("resyncs on an explicit gap event", () => {
    live.connect();
    sockets[0]!.push(syncFrame(2));
    sockets[0]!.push({
      frame: "event",
      index: 2,
      event: { type: "subscription_gap", timestamp: 4, dropped: 7 },
    });
    expect(live.status).toBe("connecting");
  });

  it("marks the session closed and stops reconnecting", () => {
    live.connect();
    sockets[0]!.push(syncFrame(2));
    sockets[0]!.push({ frame: "control", kind: "session_closed" });
    expect(live.status).toBe("closed");
    expect(live.handle?.status).toBe("closed");
    sockets[0]!.onclose?.({});
    vi.runOnlyPendingTimers();
    expect(sockets).toHaveLength(1);
  });

  it("reconnects with backoff after a dropped connection", () => {
    live.connect();
    sockets[0]!.push(syncFrame(2));
    sockets[0]!.onclose?.({});
    expect(live.status).toBe("connecting");
    vi.runOnlyPendingTimers();
    expect(sockets).toHaveLength(2);
  });

  it("sends pings on request", () => {
    live.connect();
    sockets[0]!.push(syncFrame(0));
    live.ping();
    expect(sockets[0]!.sent).toContain(JSON.stringify({ frame: "ping" }));
  });
});
