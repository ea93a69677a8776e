/** Live session view: root chat on the left, delegation graph top right,
 * selected agent's history bottom right. */

import { ApiClient, ApiError } from "../api.js";
import { buildGraph } from "../graph.js";
import { escapeHtml, renderChat, renderGraphSvg, renderHistory } from "../render.js";
import { LiveSession } from "../socket.js";

export function mountInteractive(
  root: HTMLElement,
  api: ApiClient,
  wsBase: string,
  sessionId: string,
): () => void {
  root.innerHTML = `
    <section class="interactive">
      <div class="banner" id="banner" hidden></div>
      <div class="panes">
        <div class="chat-pane">
          <div class="chat-log" id="chat-log"></div>
          <form id="chat-form" class="chat-bar">
            <input id="chat-input" type="text" placeholder="Message the root agent" />
            <button type="submit">Send</button>
          </form>
        </div>
        <div class="side">
          <div class="graph-pane" id="graph-pane"></div>
          <div class="inspector" id="inspector">
            <p class="empty">Click a node to inspect its messages.</p>
          </div>
        </div>
      </div>
      <footer class="session-bar">
        <span id="session-title"></span>
        <button id="close-session" type="button">End session</button>
      </footer>
    </section>`;

  const banner = root.querySelector<HTMLElement>("#banner")!;
  const chatLog = root.querySelector<HTMLElement>("#chat-log")!;
  const graphPane = root.querySelector<HTMLElement>("#graph-pane")!;
  const inspector = root.querySelector<HTMLElement>("#inspector")!;
  const titleEl = root.querySelector<HTMLElement>("#session-title")!;

  let selected: string | null = null;
  const live = new LiveSession(`${wsBase}/api/ws/sessions/${sessionId}`);

  function redraw(): void {
    const snap = live.snapshot;
    const rootAgent = snap.rootId === null ? undefined : snap.agents.get(snap.rootId);
    const streaming = snap.rootId === null ? null : (live.deltas.get(snap.rootId) ?? null);
    chatLog.innerHTML = renderChat(rootAgent?.history ?? [], streaming);
    chatLog.scrollTop = chatLog.scrollHeight;
    graphPane.innerHTML = renderGraphSvg(buildGraph(snap, selected));
    if (selected !== null) {
      const agent = snap.agents.get(selected);
      inspector.innerHTML =
        agent === undefined
          ? '<p class="empty">Agent not in view.</p>'
          : `<h3>${escapeHtml(agent.id.slice(0, 8))} · ${agent.state}</h3>` +
            renderHistory(agent.history);
    }
    if (live.handle !== null) {
      titleEl.textContent = `${live.handle.title || live.handle.id} · ${live.handle.status}`;
    }
    if (live.status === "live") {
      banner.hidden = true;
    } else {
      banner.hidden = false;
      banner.textContent =
        live.status === "closed" ? "Session closed." : "Reconnecting…";
    }
  }

  live.onChange = redraw;
  live.connect();
  const keepalive = setInterval(() => {
    if (live.status === "live") live.ping();
  }, 20000);

  graphPane.addEventListener("click", (ev) => {
    const group = (ev.target as Element).closest<SVGElement>("[data-node-id]");
    if (group === null) return;
    selected = group.dataset["nodeId"] ?? null;
    redraw();
  });

  root.querySelector<HTMLFormElement>("#chat-form")!.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const input = root.querySelector<HTMLInputElement>("#chat-input")!;
    const text = input.value.trim();
    if (!text) return;
    input.value = "";
    void api.sendMessage(sessionId, text, false).catch((err: unknown) => {
      const reason = err instanceof ApiError ? err.message : "send failed";
      banner.hidden = false;
      banner.textContent = reason;
    });
  });

  root.querySelector<HTMLButtonElement>("#close-session")!.addEventListener(
    "click",
    () => {
      void api.closeSession(sessionId).catch(() => undefined);
    },
  );

  redraw();
  return () => {
    clearInterval(keepalive);
    live.stop();
  };
}
