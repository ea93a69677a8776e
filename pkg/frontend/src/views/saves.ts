/** Save browser: title search plus sorting by name, edit time, or event
 * count; a row click opens the replay view. */

import { ApiClient } from "../api.js";
import { escapeHtml, renderSaveList } from "../render.js";

export function mountSaves(root: HTMLElement, api: ApiClient): () => void {
  root.innerHTML = `
    <section class="saves-view">
      <h1>Saved sessions</h1>
      <form id="filter" class="filter-bar">
        <input id="query" type="search" placeholder="Search titles" />
        <select id="sort">
          <option value="edit">Last edit</option>
          <option value="name">Name</option>
          <option value="events">Event count</option>
        </select>
        <label><input id="descending" type="checkbox" checked /> descending</label>
      </form>
      <div id="save-list"><p class="muted">Loading…</p></div>
      <nav class="home-links"><a href="#/">Home</a></nav>
    </section>`;

  const listEl = root.querySelector<HTMLElement>("#save-list")!;
  const queryEl = root.querySelector<HTMLInputElement>("#query")!;
  const sortEl = root.querySelector<HTMLSelectElement>("#sort")!;
  const descEl = root.querySelector<HTMLInputElement>("#descending")!;
  let alive = true;

  async function refresh(): Promise<void> {
    try {
      const { saves } = await api.listSaves({
        sort: sortEl.value,
        descending: descEl.checked,
        q: queryEl.value.trim() || undefined,
      });
      if (alive) listEl.innerHTML = renderSaveList(saves);
    } catch (err) {
      if (alive) {
        listEl.innerHTML =
          `<p class="error">Could not load saves: ` +
          `${escapeHtml((err as Error).message)}</p>` +
          '<button id="retry" type="button">Retry</button>';
        listEl
          .querySelector("#retry")
          ?.addEventListener("click", () => void refresh());
      }
    }
  }

  root.querySelector<HTMLFormElement>("#filter")!.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void refresh();
  });
  for (const el of [queryEl, sortEl, descEl]) {
    el.addEventListener("change", () => void refresh());
  }
  listEl.addEventListener("click", (ev) => {
    const row = (ev.target as Element).closest<HTMLElement>(".save-row");
    const saveId = row?.dataset["saveId"];
    if (saveId) window.location.hash = `#/replay/${saveId}`;
  });

  void refresh();
  return () => {
    alive = false;
  };
}
