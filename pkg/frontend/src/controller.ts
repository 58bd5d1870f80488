/**
 * Session driver: keeps the latest server payloads, polls while the
 * server is fitting, and funnels user actions through the API with the
 * documented error handling. One controller per session per tab;
 * stop() cancels the poll loop on navigation.
 *
 * Error handling on submit:
 *   422  validation message shown, selection kept
 *   409  the session moved on without us: reload state
 *   anything transport-level: retry banner, selection kept
 */

import { ApiClient, ApiError } from "./api.js";
import type { ParetoView, Screen } from "./model.js";
import { canSubmit, pruneSelection, screenFor, toggleSelection } from "./model.js";
import type { QueryPayload, StatePayload } from "./types.js";

export interface ControllerOptions {
  /** poll period while the server fits; 1000 ms = the intended 1 Hz */
  pollIntervalMs?: number;
  /** called after every visible change, for re-rendering */
  onChange?: () => void;
}

export class SessionController {
  private state: StatePayload | null = null;
  private query: QueryPayload | null = null;
  private pareto: ParetoView = null;
  private selected: ReadonlySet<number> = new Set();
  private message: string | null = null;
  private bannerText: string | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;
  private readonly pollMs: number;
  private readonly onChange: () => void;

  constructor(
    readonly api: ApiClient,
    readonly sessionId: string,
    options: ControllerOptions = {},
  ) {
    this.pollMs = options.pollIntervalMs ?? 1000;
    this.onChange = options.onChange ?? (() => undefined);
  }

  screen(): Screen {
    return screenFor(this.state, this.query, this.selected, this.message, this.pareto);
  }

  /** Network-trouble banner, shown over any screen; null when clear. */
  banner(): string | null {
    return this.bannerText;
  }

  /** Bring the controller up from nothing but the session id: exactly
   * what happens on a page refresh. */
  async start(): Promise<void> {
    await this.refresh();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
  }

  /** One state round-trip; fetches the query and Pareto panel when they
   * apply, and keeps polling while the server is busy. */
  async refresh(): Promise<void> {
    let state: StatePayload;
    try {
      state = await this.api.getState(this.sessionId);
    } catch (err) {
      this.reportTrouble(err);
      return;
    }
    this.bannerText = null;
    this.state = state;
    if (state.state === "awaiting-choice") {
      await this.ensureQuery(state);
    }
    if (state.history.length > 0 || state.state === "done") {
      await this.refreshPareto();
    }
    this.onChange();
    if (state.state === "fitting" || state.state === "ready" || state.state === "initializing") {
      this.schedulePoll();
    }
  }

  toggle(id: number): void {
    const screen = this.screen();
    if (screen.kind !== "query") return;
    this.selected = toggleSelection(this.selected, id);
    this.onChange();
  }

  /** Submit the current selection. Returns true when the server accepted
   * it. An empty selection is refused locally and never reaches the
   * server. */
  async submit(): Promise<boolean> {
    const query = this.query;
    if (this.screen().kind !== "query" || query === null) return false;
    if (!canSubmit(this.selected, query)) return false;
    const chosen = [...this.selected].sort((a, b) => a - b);
    try {
      await this.api.submitChoice(this.sessionId, query.query_seq, chosen);
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        // invalid by the server's rules: show why, keep the selection
        this.message = err.detail;
        this.onChange();
        return false;
      }
      if (err instanceof ApiError && err.status === 409) {
        // the session advanced past this query; rebuild from the server
        await this.refresh();
        return false;
      }
      this.reportTrouble(err);
      return false;
    }
    this.selected = new Set();
    this.message = null;
    await this.refresh();
    return true;
  }

  /** Clear the trouble banner and try the server again. */
  async retry(): Promise<void> {
    this.bannerText = null;
    await this.refresh();
  }

  private async ensureQuery(state: StatePayload): Promise<void> {
    if (this.query !== null && this.query.query_seq === state.query_seq) return;
    try {
      this.query = await this.api.getQuery(this.sessionId);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // raced a state change; the next poll sorts it out
        this.schedulePoll();
        return;
      }
      this.reportTrouble(err);
      return;
    }
    // a new query invalidates selection and feedback from the last one
    this.selected = pruneSelection(this.selected, this.query);
    this.message = null;
  }

  private async refreshPareto(): Promise<void> {
    try {
      this.pareto = await this.api.getPareto(this.sessionId);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.pareto = "pending";
        return;
      }
      // the panel must never block the query flow; keep what we had
    }
  }

  private schedulePoll(): void {
    if (this.stopped || this.timer !== null) return;
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.refresh();
    }, this.pollMs);
  }

  private reportTrouble(err: unknown): void {
    const what = err instanceof Error ? err.message : String(err);
    this.bannerText = `cannot reach the session server (${what})`;
    this.onChange();
  }
}
