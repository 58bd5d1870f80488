import { describe, expect, it } from "vitest";

import { canSubmit, pruneSelection, screenFor, toggleSelection } from "../src/model.js";
import type { QueryPayload, StatePayload } from "../src/types.js";

function statePayload(partial: Partial<StatePayload> = {}): StatePayload {
  return {
    id: "s1",
    state: "awaiting-choice",
    problem: null,
    bounds: [[0, 1]],
    n_e: 2,
    auto_ne: false,
    budget: 3,
    iteration: 0,
    query_seq: 1,
    pending_query: [0, 1, 2, 3, 4],
    init_queries_left: 2,
    options: [[0.1], [0.2], [0.3], [0.4], [0.5]],
    history: [],
    latent_means: null,
    metrics: [],
    flags: [],
    error: null,
    created_at: "2026-01-01T00:00:00+00:00",
    updated_at: "2026-01-01T00:00:00+00:00",
    ...partial,
  };
}

function queryPayload(partial: Partial<QueryPayload> = {}): QueryPayload {
  const ids = partial.ids ?? [0, 1, 2, 3, 4];
  return {
    query_seq: 1,
    ids,
    options: ids.map((id) => ({
      id,
      coords: [id / 10],
      display: { label: `Option ${id}` },
    })),
    requested_size: 5,
    ...partial,
  };
}

describe("screenFor", () => {
  it("is connecting before any payload arrived", () => {
    expect(screenFor(null, null, new Set(), null, null).kind).toBe("connecting");
  });

  it("shows the query once state and query agree on the sequence", () => {
    const screen = screenFor(statePayload(), queryPayload(), new Set([1]), null, null);
    expect(screen.kind).toBe("query");
    if (screen.kind === "query") {
      expect(screen.query.ids).toEqual([0, 1, 2, 3, 4]);
      expect(screen.notice).toBeNull();
    }
  });

  it("keeps showing fitting while the query payload lags the state", () => {
    const stale = queryPayload({ query_seq: 7 });
    expect(screenFor(statePayload({ query_seq: 8 }), stale, new Set(), null, null).kind).toBe(
      "fitting",
    );
  });

  it.each(["fitting", "ready", "initializing"] as const)("maps %s to the wait screen", (s) => {
    const state = statePayload({ state: s, pending_query: null });
    expect(screenFor(state, null, new Set(), null, null).kind).toBe("fitting");
  });

  it("maps done to the summary screen", () => {
    const state = statePayload({ state: "done", pending_query: null });
    expect(screenFor(state, null, new Set(), null, null).kind).toBe("done");
  });

  it("flags a padded query with a notice", () => {
    const query = queryPayload({ ids: [0, 1, 2] });
    const screen = screenFor(statePayload({ pending_query: [0, 1, 2] }), query, new Set(), null, null);
    expect(screen.kind).toBe("query");
    if (screen.kind === "query") {
      expect(screen.notice).toContain("3 of 5");
    }
  });

  it("passes the validation message through untouched", () => {
    const screen = screenFor(statePayload(), queryPayload(), new Set([0]), "stale query", null);
    if (screen.kind === "query") expect(screen.message).toBe("stale query");
    else throw new Error("expected the query screen");
  });
});

describe("selection", () => {
  it("toggles ids in and out", () => {
    let sel: ReadonlySet<number> = new Set<number>();
    sel = toggleSelection(sel, 3);
    expect([...sel]).toEqual([3]);
    sel = toggleSelection(sel, 3);
    expect(sel.size).toBe(0);
  });

  it("never allows an empty submit", () => {
    expect(canSubmit(new Set(), queryPayload())).toBe(false);
    expect(canSubmit(new Set([2]), queryPayload())).toBe(true);
  });

  it("refuses ids outside the pending query", () => {
    expect(canSubmit(new Set([99]), queryPayload())).toBe(false);
    expect(canSubmit(new Set([1, 99]), queryPayload())).toBe(false);
  });

  it("prunes a stale selection down to the live query", () => {
    const pruned = pruneSelection(new Set([1, 7, 9]), queryPayload());
    expect([...pruned]).toEqual([1]);
    expect(pruneSelection(new Set([1]), null).size).toBe(0);
  });
});
