/**
 * Pure view model: what the screen shows is a function of the last
 * /state payload plus the local selection, nothing else. Refreshing the
 * page and replaying the last payload must land on the same screen.
 */

import type { ParetoPayload, QueryPayload, StatePayload } from "./types.js";

/** Pareto panel content: a payload, "pending" while the server refuses
 * with 409 (no completed fit yet), or null when never asked. */
export type ParetoView = ParetoPayload | "pending" | null;

export type Screen =
  | { kind: "connecting" }
  | {
      kind: "query";
      state: StatePayload;
      query: QueryPayload;
      selected: ReadonlySet<number>;
      /** shown when the server sent fewer cards than it aimed for */
      notice: string | null;
      /** validation feedback from a rejected submit; selection is kept */
      message: string | null;
      pareto: ParetoView;
    }
  | { kind: "fitting"; state: StatePayload; pareto: ParetoView }
  | { kind: "done"; state: StatePayload; pareto: ParetoView };

export function screenFor(
  state: StatePayload | null,
  query: QueryPayload | null,
  selected: ReadonlySet<number>,
  message: string | null,
  pareto: ParetoView,
): Screen {
  if (state === null) return { kind: "connecting" };
  if (state.state === "done") return { kind: "done", state, pareto };
  if (state.state === "awaiting-choice" && query !== null && query.query_seq === state.query_seq) {
    const notice =
      query.ids.length < query.requested_size
        ? `only ${query.ids.length} of ${query.requested_size} options in this round`
        : null;
    return { kind: "query", state, query, selected, notice, message, pareto };
  }
  // fitting, ready, initializing, or awaiting-choice with the query still
  // in flight: everything the user can do is wait
  return { kind: "fitting", state, pareto };
}

export function toggleSelection(selected: ReadonlySet<number>, id: number): Set<number> {
  const next = new Set(selected);
  if (next.has(id)) next.delete(id);
  else next.add(id);
  return next;
}

/** Submit is allowed only for a non-empty subset of the pending ids. */
export function canSubmit(selected: ReadonlySet<number>, query: QueryPayload | null): boolean {
  if (query === null || selected.size === 0) return false;
  for (const id of selected) if (!query.ids.includes(id)) return false;
  return true;
}

/** Drop selected ids that are not in the pending query (a stale selection
 * after the query advanced). */
export function pruneSelection(
  selected: ReadonlySet<number>,
  query: QueryPayload | null,
): Set<number> {
  if (query === null) return new Set();
  return new Set([...selected].filter((id) => query.ids.includes(id)));
}
