/** Landing view: start a session from a chat bar, rejoin running ones, or
 * jump to the save browser. */

import { ApiClient } from "../api.js";
import { escapeHtml } from "../render.js";
import type { DefinitionSummary, SessionHandle } from "../types.js";

function definitionOption(def: DefinitionSummary, selected: string): string {
  const chosen = def.name === selected ? " selected" : "";
  return (
    `<option value="${escapeHtml(def.name)}"${chosen}>` +
    `${escapeHtml(def.name)} (${escapeHtml(def.engine)}, ${escapeHtml(def.scheme)})</option>`
  );
}

function sessionRow(session: SessionHandle): string {
  return (
    `<li><a href="#/session/${escapeHtml(session.id)}">` +
    `${escapeHtml(session.title || session.id)}</a>` +
    ` <span class="muted">${session.event_count} events</span></li>`
  );
}

export function mountHome(root: HTMLElement, api: ApiClient): () => void {
  root.innerHTML = '<section class="home"><p class="muted">Loading…</p></section>';
  let alive = true;

  void (async () => {
    try {
      const [defs, sessions] = await Promise.all([
        api.listDefinitions(),
        api.listSessions(),
      ]);
      if (!alive) return;
      const active = sessions.sessions.filter((s) => s.status === "active");
      root.innerHTML = `
        <section class="home">
          <h1>colony</h1>
          <p>Delegate a task to a tree of agents and watch it unfold.</p>
          <form id="start-form" class="chat-bar">
            <select id="definition">${defs.definitions
              .map((d) => definitionOption(d, defs.default))
              .join("")}</select>
            <input id="first-message" type="text" required
                   placeholder="What should the agents work on?" />
            <button type="submit">Start</button>
          </form>
          <nav class="home-links">
            <a href="#/saves">Browse saves</a>
          </nav>
          ${
            active.length > 0
              ? `<h2>Running sessions</h2><ul class="session-list">${active
                  .map(sessionRow)
                  .join("")}</ul>`
              : ""
          }
        </section>`;
      const form = root.querySelector<HTMLFormElement>("#start-form")!;
      form.addEventListener("submit", (ev) => {
        ev.preventDefault();
        const definition = root.querySelector<HTMLSelectElement>("#definition")!.value;
        const text = root.querySelector<HTMLInputElement>("#first-message")!.value.trim();
        if (!text) return;
        void (async () => {
          try {
            const session = await api.createSession(definition, text.slice(0, 80));
            await api.sendMessage(session.id, text, false);
            window.location.hash = `#/session/${session.id}`;
          } catch (err) {
            alert(`Could not start session: ${(err as Error).message}`);
          }
        })();
      });
    } catch (err) {
      if (alive) {
        root.innerHTML = `<section class="home"><p class="error">` +
          `Server unreachable: ${escapeHtml((err as Error).message)}</p></section>`;
      }
    }
  })();

  return () => {
    alive = false;
  };
}
