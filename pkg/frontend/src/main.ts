/**
 * Browser bootstrap: read the base URL and session id from the query
 * string, show a create form when there is no session yet, and wire the
 * controller to the page via event delegation.
 *
 *   index.html?api=http://127.0.0.1:8000&session=my-run
 */

import { ApiClient } from "./api.js";
import { SessionController } from "./controller.js";
import { renderApp } from "./render.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? "http://127.0.0.1:8000";
const app = document.getElementById("app");
if (app === null) throw new Error("missing #app element");

let controller: SessionController | null = null;

function draw(): void {
  if (controller === null || app === null) return;
  app.innerHTML = renderApp(controller.screen(), controller.banner());
}

function attach(sessionId: string): void {
  controller?.stop();
  controller = new SessionController(new ApiClient(baseUrl), sessionId, { onChange: draw });
  void controller.start();
}

function renderCreateForm(): void {
  if (app === null) return;
  app.innerHTML = `
    <section class="create">
      <h2>New session</h2>
      <label>Session id <input id="new-id" value="session-1"></label>
      <label>Seed <input id="new-seed" type="number" value="0"></label>
      <label>Problem <input id="new-problem" value="branin-currin"></label>
      <label>Budget <input id="new-budget" type="number" value="20"></label>
      <button id="create" type="button">Create</button>
      <p class="message" id="create-error" role="alert"></p>
    </section>`;
}

async function createSession(): Promise<void> {
  const field = (id: string) => (document.getElementById(id) as HTMLInputElement).value;
  const api = new ApiClient(baseUrl);
  try {
    const res = await api.createSession({
      id: field("new-id"),
      problem: field("new-problem"),
      seed: Number(field("new-seed")),
      budget: Number(field("new-budget")),
    });
    const next = new URLSearchParams(window.location.search);
    next.set("session", res.id);
    window.history.replaceState(null, "", `?${next.toString()}`);
    attach(res.id);
  } catch (err) {
    const box = document.getElementById("create-error");
    if (box !== null) box.textContent = err instanceof Error ? err.message : String(err);
  }
}

app.addEventListener("click", (event) => {
  const target = event.target as HTMLElement;
  const card = target.closest<HTMLElement>("[data-option-id]");
  if (card !== null && controller !== null) {
    controller.toggle(Number(card.dataset.optionId));
    return;
  }
  if (target.closest("#submit") !== null && controller !== null) {
    void controller.submit();
    return;
  }
  if (target.closest("#retry") !== null && controller !== null) {
    void controller.retry();
    return;
  }
  if (target.closest("#create") !== null) {
    void createSession();
  }
});

window.addEventListener("pagehide", () => controller?.stop());

const sessionId = params.get("session");
if (sessionId !== null) attach(sessionId);
else renderCreateForm();
