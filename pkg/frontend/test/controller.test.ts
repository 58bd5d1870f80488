import { afterEach, describe, expect, it } from "vitest";

import { ApiClient, type FetchLike } from "../src/api.js";
import { SessionController } from "../src/controller.js";
import { MockServer, type MockOptions } from "./mockServer.js";

const live: SessionController[] = [];

afterEach(() => {
  for (const c of live.splice(0)) c.stop();
});

function track(c: SessionController): SessionController {
  live.push(c);
  return c;
}

async function until(cond: () => boolean, timeoutMs = 3000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!cond()) {
    if (Date.now() > deadline) throw new Error("condition not reached in time");
    await new Promise((resolve) => setTimeout(resolve, 2));
  }
}

function counted(inner: FetchLike): { fetch: FetchLike; calls: () => number } {
  let n = 0;
  return {
    fetch: (url, init) => {
      n += 1;
      return inner(url, init);
    },
    calls: () => n,
  };
}

async function makeSession(options: MockOptions = {}): Promise<{
  server: MockServer;
  api: ApiClient;
  calls: () => number;
}> {
  const server = new MockServer(options);
  const { fetch, calls } = counted(server.fetch);
  const api = new ApiClient("http://mock", fetch);
  await api.createSession({ id: "s", seed: 7, problem: "branin-currin", budget: 3 });
  return { server, api, calls };
}

function controller(api: ApiClient): SessionController {
  return track(new SessionController(api, "s", { pollIntervalMs: 1 }));
}

describe("SessionController", () => {
  it("starts from just a session id and lands on the query screen", async () => {
    const { api } = await makeSession();
    const c = controller(api);
    await c.start();
    const screen = c.screen();
    expect(screen.kind).toBe("query");
    if (screen.kind === "query") {
      expect(screen.query.query_seq).toBe(1);
      expect(screen.selected.size).toBe(0);
    }
  });

  it("submits a selection, polls through the fit and shows the next query", async () => {
    const { server, api } = await makeSession();
    const c = controller(api);
    await c.start();
    let screen = c.screen();
    if (screen.kind !== "query") throw new Error("expected a query screen");
    const picked = screen.query.ids[0]!;
    c.toggle(picked);
    expect(await c.submit()).toBe(true);
    await until(() => {
      const s = c.screen();
      return s.kind === "query" && s.query.query_seq === 2;
    });
    screen = c.screen();
    if (screen.kind !== "query") throw new Error("expected the next query");
    expect(screen.selected.size).toBe(0);
    expect(server.submissions("s")).toEqual([{ query_seq: 1, chosen: [picked], pending: screen.state.history[0]!.set }]);
    // one answered round is enough for a front estimate
    expect(screen.pareto).toMatchObject({ threshold: 0.5 });
  });

  it("refuses an empty submit locally, without a request", async () => {
    const { api, calls } = await makeSession();
    const c = controller(api);
    await c.start();
    const before = calls();
    expect(await c.submit()).toBe(false);
    expect(calls()).toBe(before);
    expect(c.screen().kind).toBe("query");
  });

  it("keeps the selection and shows the server detail on a 422", async () => {
    const { server, api } = await makeSession();
    const c = controller(api);
    await c.start();
    const first = c.screen();
    if (first.kind !== "query") throw new Error("expected a query screen");
    const mine = first.query.ids[1]!;
    c.toggle(mine);
    // another tab answers the same query and the fit completes behind our back
    const pending = server.session("s").pending!;
    await server.fetch("http://mock/v1/sessions/s/choice", {
      method: "POST",
      body: JSON.stringify({ query_seq: 1, chosen: [pending[0]] }),
    });
    await api.getState("s");
    await api.getState("s");
    expect(server.session("s").querySeq).toBe(2);

    expect(await c.submit()).toBe(false);
    const screen = c.screen();
    expect(screen.kind).toBe("query");
    if (screen.kind === "query") {
      expect(screen.message).toContain("stale");
      expect(screen.selected.has(mine)).toBe(true);
    }
    expect(c.banner()).toBeNull();
  });

  it("reloads the session when a submit hits a 409", async () => {
    const { server, api } = await makeSession();
    const c = controller(api);
    await c.start();
    const first = c.screen();
    if (first.kind !== "query") throw new Error("expected a query screen");
    c.toggle(first.query.ids[0]!);
    // another tab answered; the server is mid-fit when our submit arrives
    const pending = server.session("s").pending!;
    await server.fetch("http://mock/v1/sessions/s/choice", {
      method: "POST",
      body: JSON.stringify({ query_seq: 1, chosen: [pending[0]] }),
    });

    expect(await c.submit()).toBe(false);
    expect(c.screen().kind).toBe("fitting");
    await until(() => {
      const s = c.screen();
      return s.kind === "query" && s.query.query_seq === 2;
    });
    const screen = c.screen();
    if (screen.kind === "query") expect(screen.message).toBeNull();
  });

  it("shows the front as pending while the first fit is still running", async () => {
    const { api } = await makeSession({ fitPolls: 4 });
    const c = controller(api);
    await c.start();
    const first = c.screen();
    if (first.kind !== "query") throw new Error("expected a query screen");
    c.toggle(first.query.ids[0]!);
    await c.submit();
    const mid = c.screen();
    expect(mid.kind).toBe("fitting");
    if (mid.kind === "fitting") expect(mid.pareto).toBe("pending");
    await until(() => c.screen().kind === "query");
    const after = c.screen();
    if (after.kind === "query") expect(after.pareto).toMatchObject({ indices: [0, 1] });
  });

  it("raises the retry banner on network trouble and keeps the selection", async () => {
    const { server, api } = await makeSession();
    const c = controller(api);
    await c.start();
    const first = c.screen();
    if (first.kind !== "query") throw new Error("expected a query screen");
    const mine = first.query.ids[2]!;
    c.toggle(mine);
    server.offline = true;
    expect(await c.submit()).toBe(false);
    expect(c.banner()).toContain("cannot reach the session server");
    let screen = c.screen();
    if (screen.kind === "query") expect(screen.selected.has(mine)).toBe(true);

    server.offline = false;
    await c.retry();
    expect(c.banner()).toBeNull();
    screen = c.screen();
    expect(screen.kind).toBe("query");
    if (screen.kind === "query") {
      expect(screen.selected.has(mine)).toBe(true);
      expect(server.submissions("s")).toHaveLength(0);
    }
  });

  it("banners when even the first load fails, then recovers on retry", async () => {
    const { server, api } = await makeSession();
    server.offline = true;
    const c = controller(api);
    await c.start();
    expect(c.screen().kind).toBe("connecting");
    expect(c.banner()).toContain("cannot reach the session server");
    server.offline = false;
    await c.retry();
    expect(c.screen().kind).toBe("query");
  });

  it("stop() cancels the poll loop", async () => {
    const { api, calls } = await makeSession({ fitPolls: 50 });
    const c = controller(api);
    await c.start();
    const first = c.screen();
    if (first.kind !== "query") throw new Error("expected a query screen");
    c.toggle(first.query.ids[0]!);
    await c.submit();
    expect(c.screen().kind).toBe("fitting");
    await until(() => calls() > 8);
    c.stop();
    await new Promise((resolve) => setTimeout(resolve, 10));
    const frozen = calls();
    await new Promise((resolve) => setTimeout(resolve, 30));
    expect(calls()).toBe(frozen);
  });

  it("a second controller restores the same screen mid-fit and mid-query", async () => {
    const { api } = await makeSession({ fitPolls: 6 });
    const c1 = controller(api);
    await c1.start();
    const first = c1.screen();
    if (first.kind !== "query") throw new Error("expected a query screen");
    c1.toggle(first.query.ids[0]!);
    await c1.submit();
    c1.stop();

    // refresh while the server is fitting
    const c2 = controller(api);
    await c2.start();
    expect(c2.screen().kind).toBe("fitting");
    await until(() => c2.screen().kind === "query");
    const mid = c2.screen();
    if (mid.kind !== "query") throw new Error("expected a query screen");
    expect(mid.query.query_seq).toBe(2);
    c2.stop();

    // refresh while a query is waiting
    const c3 = controller(api);
    await c3.start();
    const restored = c3.screen();
    expect(restored.kind).toBe("query");
    if (restored.kind === "query") {
      expect(restored.query.query_seq).toBe(2);
      expect(restored.query.ids).toEqual(mid.query.ids);
      expect(restored.selected.size).toBe(0);
    }
  });
});
