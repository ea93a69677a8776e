/** Hash router mounting one of the four views; the API base is the page's
 * own origin, so the bundle can be served by the session server itself. */

import { ApiClient } from "./api.js";
import { mountHome } from "./views/home.js";
import { mountInteractive } from "./views/interactive.js";
import { mountReplay } from "./views/replay.js";
import { mountSaves } from "./views/saves.js";

const api = new ApiClient("");
const wsBase = `${window.location.protocol === "https:" ? "wss" : "ws"}://${
  window.location.host
}`;

let cleanup: (() => void) | null = null;

function route(): void {
  const root = document.getElementById("app");
  if (root === null) return;
  cleanup?.();
  const hash = window.location.hash || "#/";
  const session = /^#\/session\/([^/]+)$/.exec(hash);
  const replay = /^#\/replay\/([^/]+)$/.exec(hash);
  if (session !== null) {
    cleanup = mountInteractive(root, api, wsBase, session[1]!);
  } else if (replay !== null) {
    cleanup = mountReplay(root, api, replay[1]!);
  } else if (hash === "#/saves") {
    cleanup = mountSaves(root, api);
  } else {
    cleanup = mountHome(root, api);
  }
}

window.addEventListener("hashchange", route);
window.addEventListener("DOMContentLoaded", route);
