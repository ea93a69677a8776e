/** Thin typed client for the session server's REST API. */

import type {
  DefinitionSummary,
  EventWire,
  SaveEntry,
  SessionHandle,
  SessionStateWire,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export interface RoundOutcome {
  status: "complete" | "error" | "started";
  reply?: string;
  error?: string;
  session: SessionHandle;
}

export interface EventPage {
  start: number;
  end: number;
  count: number;
  at_end: boolean;
  events: { index: number; event: EventWire }[];
}

export class ApiClient {
  constructor(readonly base: string = "") {}

  private url(path: string): string {
    return `${this.base}${path}`;
  }

  listDefinitions(): Promise<{ default: string; definitions: DefinitionSummary[] }> {
    return request(this.url("/api/definitions"));
  }

  listSessions(): Promise<{ sessions: SessionHandle[] }> {
    return request(this.url("/api/sessions"));
  }

  createSession(definition?: string, title = ""): Promise<SessionHandle> {
    return request(this.url("/api/sessions"), {
      method: "POST",
      body: JSON.stringify({ definition: definition ?? null, title }),
    });
  }

  getSession(id: string): Promise<SessionHandle> {
    return request(this.url(`/api/sessions/${id}`));
  }

  sendMessage(id: string, text: string, wait = false): Promise<RoundOutcome> {
    return request(this.url(`/api/sessions/${id}/message`), {
      method: "POST",
      body: JSON.stringify({ text, wait }),
    });
  }

  closeSession(id: string): Promise<SessionHandle> {
    return request(this.url(`/api/sessions/${id}/close`), { method: "POST" });
  }

  listSaves(opts: { sort?: string; descending?: boolean; q?: string } = {}): Promise<{
    saves: SaveEntry[];
  }> {
    const params = new URLSearchParams();
    if (opts.sort) params.set("sort", opts.sort);
    if (opts.descending !== undefined) params.set("descending", String(opts.descending));
    if (opts.q) params.set("q", opts.q);
    const suffix = params.size > 0 ? `?${params}` : "";
    return request(this.url(`/api/saves${suffix}`));
  }

  replayInfo(saveId: string): Promise<{ save: SaveEntry | null; event_count: number }> {
    return request(this.url(`/api/replays/${saveId}`));
  }

  replayEventsPage(saveId: string, start: number, end?: number): Promise<EventPage> {
    const params = new URLSearchParams({ start: String(start) });
    if (end !== undefined) params.set("end", String(end));
    return request(this.url(`/api/replays/${saveId}/events?${params}`));
  }

  /** Download the whole log, paging to keep individual responses small. */
  async replayAllEvents(saveId: string, pageSize = 2000): Promise<EventWire[]> {
    const events: EventWire[] = [];
    let start = 0;
    for (;;) {
      const page = await this.replayEventsPage(saveId, start, start + pageSize);
      events.push(...page.events.map((e) => e.event));
      if (page.at_end || page.events.length === 0) return events;
      start = page.end;
    }
  }

  replaySnapshot(
    saveId: string,
    index: number,
  ): Promise<{ index: number; state: SessionStateWire & Record<string, unknown> }> {
    return request(this.url(`/api/replays/${saveId}/snapshot?index=${index}`));
  }

  replaySeek(
    saveId: string,
    fromIndex: number,
    direction: "next" | "prev",
    agent?: string,
  ): Promise<{ index: number; found: boolean }> {
    const params = new URLSearchParams({
      from_index: String(fromIndex),
      direction,
    });
    if (agent !== undefined) params.set("agent", agent);
    return request(this.url(`/api/replays/${saveId}/seek?${params}`));
  }
}
