/** Live session stream: one WebSocket whose frames are folded, in arrival
 * order, into a client snapshot.
 *
 * The server guarantees the sync frame and subsequent event frames tile
 * the log exactly, so the fold here tracks the server state. If indices
 * ever skip (dropped frames under backpressure surface as a gap event),
 * the connection resyncs by reconnecting: the next sync frame replaces
 * local state wholesale.
 */

import { ClientSnapshot, applyEvent, emptySnapshot, fromSyncState } from "./fold.js";
import type { ServerFrame, SessionHandle } from "./types.js";

/** Structural subset of the browser WebSocket, so tests can plug in a
 * Node implementation. */
export interface SocketLike {
  onopen: ((ev: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev: unknown) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  send(data: string): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export type ConnectionStatus = "connecting" | "live" | "closed";

const GAP_EVENT = "subscription_gap";
const RECONNECT_BASE_MS = 250;
const RECONNECT_MAX_MS = 5000;

export class LiveSession {
  snapshot: ClientSnapshot = emptySnapshot();
  handle: SessionHandle | null = null;
  status: ConnectionStatus = "connecting";
  /** In-flight streaming text per agent, cleared as full messages land. */
  deltas = new Map<string, string>();
  onChange: (() => void) | null = null;

  private socket: SocketLike | null = null;
  private nextIndex = 0;
  private attempts = 0;
  private stopped = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private deltaSeqs = new Map<string, number>();

  constructor(
    readonly url: string,
    private readonly factory: SocketFactory = (u) =>
      new WebSocket(u) as unknown as SocketLike,
  ) {}

  connect(): void {
    if (this.stopped) return;
    this.status = "connecting";
    this.emit();
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
    };
    socket.onmessage = (ev) => this.handleMessage(String(ev.data));
    socket.onerror = () => {
      // the close handler owns reconnection; nothing to do here
    };
    socket.onclose = () => {
      if (this.socket !== socket) return;
      this.socket = null;
      if (this.stopped || this.status === "closed") return;
      this.scheduleReconnect();
    };
  }

  /** Stop listening and drop the socket; local state stays readable. */
  stop(): void {
    this.stopped = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.reconnectTimer = null;
    const socket = this.socket;
    this.socket = null;
    if (socket !== null) {
      socket.onclose = null;
      socket.close();
    }
  }

  ping(): void {
    this.socket?.send(JSON.stringify({ frame: "ping" }));
  }

  private emit(): void {
    this.onChange?.();
  }

  private scheduleReconnect(): void {
    this.status = "connecting";
    this.emit();
    const delay = Math.min(
      RECONNECT_MAX_MS,
      RECONNECT_BASE_MS * 2 ** Math.min(this.attempts, 6),
    );
    this.attempts += 1;
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      this.connect();
    }, delay);
  }

  private resync(): void {
    const socket = this.socket;
    this.socket = null;
    if (socket !== null) {
      socket.onclose = null;
      socket.close();
    }
    this.scheduleReconnect();
  }

  private handleMessage(raw: string): void {
    let frame: ServerFrame;
    try {
      frame = JSON.parse(raw) as ServerFrame;
    } catch {
      return;
    }
    switch (frame.frame) {
      case "sync":
        this.snapshot = fromSyncState(frame.state, frame.index);
        this.handle = frame.session;
        this.nextIndex = frame.index;
        this.deltas.clear();
        this.deltaSeqs.clear();
        this.status = "live";
        this.emit();
        break;
      case "event": {
        if (frame.event.type === GAP_EVENT || frame.index !== this.nextIndex) {
          this.resync();
          return;
        }
        this.nextIndex += 1;
        applyEvent(this.snapshot, frame.event);
        if (frame.event.type === "kani_message") {
          const id = frame.event["id"];
          if (typeof id === "string") {
            this.deltas.delete(id);
            this.deltaSeqs.delete(id);
          }
        }
        this.emit();
        break;
      }
      case "delta": {
        const last = this.deltaSeqs.get(frame.id);
        if (last !== undefined && frame.seq <= last) break;
        this.deltaSeqs.set(frame.id, frame.seq);
        this.deltas.set(frame.id, (this.deltas.get(frame.id) ?? "") + frame.text);
        this.emit();
        break;
      }
      case "control":
        if (frame.kind === "session_closed") {
          this.status = "closed";
          if (this.handle !== null) this.handle.status = "closed";
          this.emit();
        }
        break;
      default:
        break;
    }
  }
}
