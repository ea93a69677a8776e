/** Replay view: a slider over the event log plus next/previous-message
 * jumps scoped to the root or the selected node. Graph and histories are
 * refolded locally on every seek; message jumps ask the server for the
 * target index. */

import { ApiClient, ApiError } from "../api.js";
import { ReplayCursor } from "../cursor.js";
import { buildGraph } from "../graph.js";
import { escapeHtml, renderGraphSvg, renderHistory } from "../render.js";

export function mountReplay(
  root: HTMLElement,
  api: ApiClient,
  saveId: string,
): () => void {
  root.innerHTML = '<section class="replay"><p class="muted">Loading save…</p></section>';
  let alive = true;
  let cursor: ReplayCursor | null = null;
  let selected: string | null = null;

  function redraw(): void {
    if (cursor === null) return;
    const snap = cursor.snapshot;
    const indexEl = root.querySelector<HTMLElement>("#cursor-index");
    const slider = root.querySelector<HTMLInputElement>("#seek-slider");
    if (indexEl) indexEl.textContent = `${cursor.index} / ${cursor.count}`;
    if (slider) slider.value = String(cursor.index);
    const graphPane = root.querySelector<HTMLElement>("#replay-graph")!;
    graphPane.innerHTML = renderGraphSvg(buildGraph(snap, selected));
    const rootPane = root.querySelector<HTMLElement>("#root-history")!;
    const rootAgent = snap.rootId === null ? undefined : snap.agents.get(snap.rootId);
    rootPane.innerHTML = renderHistory(rootAgent?.history ?? []);
    const nodePane = root.querySelector<HTMLElement>("#node-history")!;
    if (selected === null) {
      nodePane.innerHTML = '<p class="empty">Click a node to follow it.</p>';
    } else {
      const agent = snap.agents.get(selected);
      nodePane.innerHTML =
        agent === undefined
          ? '<p class="empty">Not spawned yet at this point.</p>'
          : `<h3>${escapeHtml(agent.id.slice(0, 8))} · ${agent.state}</h3>` +
            renderHistory(agent.history);
    }
  }

  async function jump(direction: "next" | "prev", agent?: string): Promise<void> {
    if (cursor === null) return;
    const found = await api.replaySeek(saveId, cursor.position, direction, agent);
    if (found.found) {
      cursor.seekTo(found.index + 1);
      redraw();
    }
  }

  void (async () => {
    try {
      const info = await api.replayInfo(saveId);
      const events = await api.replayAllEvents(saveId);
      if (!alive) return;
      cursor = new ReplayCursor(events);
      cursor.toEnd();
      const title = info.save?.title || saveId;
      root.innerHTML = `
        <section class="replay">
          <h1>${escapeHtml(title)}</h1>
          <div class="seek-bar">
            <button id="prev-root" type="button" title="previous root message">⏮ root</button>
            <button id="step-back" type="button">−1</button>
            <input id="seek-slider" type="range" min="0" max="${events.length}" step="1" />
            <button id="step-fwd" type="button">+1</button>
            <button id="next-root" type="button" title="next root message">root ⏭</button>
            <span id="cursor-index" class="muted"></span>
          </div>
          <div class="seek-bar">
            <button id="prev-node" type="button">⏮ selected</button>
            <button id="next-node" type="button">selected ⏭</button>
          </div>
          <div class="panes">
            <div class="history-pane"><h2>Root</h2><div id="root-history"></div></div>
            <div class="side">
              <div class="graph-pane" id="replay-graph"></div>
              <div class="inspector" id="node-history"></div>
            </div>
          </div>
          <nav class="home-links"><a href="#/saves">Back to saves</a></nav>
        </section>`;
      const slider = root.querySelector<HTMLInputElement>("#seek-slider")!;
      slider.addEventListener("input", () => {
        cursor?.seekTo(Number(slider.value));
        redraw();
      });
      const wire = (id: string, fn: () => void) =>
        root.querySelector<HTMLButtonElement>(id)!.addEventListener("click", fn);
      wire("#step-back", () => {
        cursor?.stepBack();
        redraw();
      });
      wire("#step-fwd", () => {
        cursor?.stepForward();
        redraw();
      });
      wire("#prev-root", () => void jump("prev"));
      wire("#next-root", () => void jump("next"));
      wire("#prev-node", () => {
        if (selected !== null) void jump("prev", selected);
      });
      wire("#next-node", () => {
        if (selected !== null) void jump("next", selected);
      });
      root.querySelector<HTMLElement>("#replay-graph")!.addEventListener("click", (ev) => {
        const group = (ev.target as Element).closest<SVGElement>("[data-node-id]");
        if (group === null) return;
        selected = group.dataset["nodeId"] ?? null;
        redraw();
      });
      redraw();
    } catch (err) {
      if (!alive) return;
      const detail =
        err instanceof ApiError ? `${err.status}: ${err.message}` : String(err);
      root.innerHTML =
        `<section class="replay"><p class="error">Cannot replay this save ` +
        `(${escapeHtml(detail)})</p>` +
        '<nav class="home-links"><a href="#/saves">Back to saves</a></nav></section>';
    }
  })();

  return () => {
    alive = false;
  };
}
