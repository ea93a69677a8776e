/** HTML and SVG string renderers. Views build markup here and mount it
 * with innerHTML; interactivity is wired afterwards through data-*
 * attributes, so rendering stays a pure function of the view model. */

import type { GraphViewModel } from "./graph.js";
import type { ChatMessageWire, SaveEntry } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const NODE_RADIUS = 16;
const CELL_W = 72;
const CELL_H = 84;
const PAD = 28;

/** Top-down tree as SVG. Every node carries data-node-id for click
 * delegation and a <title> with the full agent id. */
export function renderGraphSvg(graph: GraphViewModel): string {
  const width = graph.width * CELL_W + PAD * 2;
  const height = graph.height * CELL_H + PAD * 2;
  const cx = (x: number) => PAD + x * CELL_W + CELL_W / 2;
  const cy = (y: number) => PAD + y * CELL_H + CELL_H / 2;
  const byId = new Map(graph.nodes.map((n) => [n.id, n]));
  const parts: string[] = [];
  parts.push(
    `<svg class="graph" viewBox="0 0 ${width} ${height}" ` +
      `xmlns="http://www.w3.org/2000/svg" role="img" aria-label="delegation graph">`,
  );
  for (const edge of graph.edges) {
    const from = byId.get(edge.from);
    const to = byId.get(edge.to);
    if (from === undefined || to === undefined) continue;
    parts.push(
      `<line class="edge" x1="${cx(from.x)}" y1="${cy(from.y)}" ` +
        `x2="${cx(to.x)}" y2="${cy(to.y)}" />`,
    );
  }
  for (const node of graph.nodes) {
    const ring = node.selected ? ' stroke="#1a73e8" stroke-width="3"' : "";
    parts.push(
      `<g class="node" data-node-id="${escapeHtml(node.id)}">` +
        `<circle cx="${cx(node.x)}" cy="${cy(node.y)}" r="${NODE_RADIUS}" ` +
        `fill="${node.color}"${ring}><title>${escapeHtml(node.id)} (${node.state})</title></circle>` +
        `<text x="${cx(node.x)}" y="${cy(node.y) + NODE_RADIUS + 14}" ` +
        `text-anchor="middle">${escapeHtml(node.label)}</text></g>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}

function renderToolCalls(message: ChatMessageWire): string {
  if (!message.tool_calls || message.tool_calls.length === 0) return "";
  const items = message.tool_calls
    .map(
      (call) =>
        `<li><code>${escapeHtml(call.name)}</code>` +
        `(${escapeHtml(JSON.stringify(call.arguments))})</li>`,
    )
    .join("");
  return `<ul class="tool-calls">${items}</ul>`;
}

export function renderMessage(message: ChatMessageWire): string {
  const body = message.content ? `<p>${escapeHtml(message.content)}</p>` : "";
  const role = message.role.toLowerCase();
  return (
    `<div class="message role-${role}">` +
    `<span class="role">${role}</span>${body}${renderToolCalls(message)}</div>`
  );
}

export function renderHistory(history: ChatMessageWire[]): string {
  if (history.length === 0) return '<p class="empty">No messages yet.</p>';
  return history.map(renderMessage).join("");
}

/** Root chat pane: full messages plus any in-flight streaming text. */
export function renderChat(history: ChatMessageWire[], streaming: string | null): string {
  const base = history
    .filter((m) => m.role === "USER" || (m.role === "ASSISTANT" && m.content))
    .map(renderMessage)
    .join("");
  const tail = streaming
    ? `<div class="message role-assistant streaming"><span class="role">assistant</span>` +
      `<p>${escapeHtml(streaming)}</p></div>`
    : "";
  return base + tail;
}

export function formatTime(epochSeconds: number): string {
  return new Date(epochSeconds * 1000).toLocaleString();
}

export function renderSaveList(saves: SaveEntry[]): string {
  if (saves.length === 0) return '<p class="empty">No saves match.</p>';
  const rows = saves
    .map((save) => {
      const flags = save.corrupt
        ? '<span class="flag bad">corrupt</span>'
        : save.replayable
          ? ""
          : '<span class="flag warn">partial</span>';
      return (
        `<tr class="save-row" data-save-id="${escapeHtml(save.session_id)}">` +
        `<td>${escapeHtml(save.title || save.session_id)} ${flags}</td>` +
        `<td class="num">${save.event_count}</td>` +
        `<td>${escapeHtml(formatTime(save.last_edit_time))}</td></tr>`
      );
    })
    .join("");
  return (
    '<table class="saves"><thead><tr><th>Title</th><th>Events</th>' +
    `<th>Last edit</th></tr></thead><tbody>${rows}</tbody></table>`
  );
}
