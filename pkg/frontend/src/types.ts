/** Wire types shared with the session server. Field names mirror the JSON
 * payloads exactly; everything here is plain data. */

export type ChatRole = "SYSTEM" | "USER" | "ASSISTANT" | "FUNCTION";

export interface ToolCallWire {
  id: string;
  name: string;
  /** Already-decoded argument object. */
  arguments: Record<string, unknown>;
}

export interface ChatMessageWire {
  role: ChatRole;
  content: string;
  tool_calls: ToolCallWire[] | null;
  tool_call_id: string | null;
}

export type RunStateName = "RUNNING" | "WAITING" | "DONE" | "ERRORED";

/** One agent as carried in spawn events and state snapshots. */
export interface AgentPayload {
  id: string;
  parent: string | null;
  children: string[];
  depth: number;
  state: RunStateName;
  history: ChatMessageWire[];
  engine_desc: string;
  tool_names: string[];
  system_prompt: string | null;
}

/** One log line: `type` and `timestamp` plus the type-specific payload
 * flattened alongside them. */
export interface EventWire {
  type: string;
  timestamp: number;
  [key: string]: unknown;
}

export interface SessionHandle {
  id: string;
  title: string;
  status: "active" | "closed";
  root_id: string | null;
  save_dir: string | null;
  event_count: number;
  round_in_progress: boolean;
}

export interface SessionStateWire {
  root_id: string | null;
  agents: Record<string, AgentPayload>;
}

export interface DefinitionSummary {
  name: string;
  engine: string;
  scheme: string;
  max_depth: number;
  tools: string[];
  root_has_tools: boolean;
}

export interface SaveEntry {
  session_id: string;
  title: string;
  event_count: number;
  last_edit_time: number;
  path: string;
  corrupt: boolean;
  replayable: boolean;
}

// -- websocket frames ------------------------------------------------------

export interface SyncFrame {
  frame: "sync";
  index: number;
  session: SessionHandle;
  state: SessionStateWire;
}

export interface EventFrame {
  frame: "event";
  index: number;
  event: EventWire;
}

export interface DeltaFrame {
  frame: "delta";
  id: string;
  seq: number;
  text: string;
}

export interface ControlFrame {
  frame: "control";
  kind: "session_closed" | "pong";
}

export type ServerFrame = SyncFrame | EventFrame | DeltaFrame | ControlFrame;
