// End-to-end walk against the real service: boots `xal serve`, then
// drives a ten-round toy session through the controller with a skip
// and a stale-query conflict along the way. Needs the Python package
// installed (the `xal` entry point on PATH).

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { spawn } from "node:child_process";
import type { ChildProcessByStdio } from "node:child_process";
import type { Readable } from "node:stream";

import { Api } from "../src/api.js";
import { SessionController } from "../src/controller.js";
import type { ConsoleView, DoneSummary } from "../src/controller.js";
import type { QueryCard } from "../src/viewmodel.js";
import { BiasChartState } from "../src/viewmodel.js";

const PORT = 8400 + (process.pid % 800);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcessByStdio<null, Readable, Readable>;
let serverLog = "";

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function waitForServer(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      // any HTTP response (a 404 here) means the service is up
      await fetch(`${BASE}/sessions/probe/next`);
      return;
    } catch (err) {
      lastError = err;
    }
    await sleep(300);
  }
  throw new Error(`service not reachable: ${String(lastError)}\n${serverLog}`);
}

class CountingView implements ConsoleView {
  chartRenders = 0;
  banners: Array<string | null> = [];
  doneSummaries: DoneSummary[] = [];

  renderCard(_card: QueryCard | null): void {}
  renderChart(): void {
    this.chartRenders += 1;
  }
  renderDone(summary: DoneSummary): void {
    this.doneSummaries.push(summary);
  }
  setBusy(_busy: boolean): void {}
  showBanner(message: string | null): void {
    this.banners.push(message);
  }
}

let firstQueryId = "";

describe("live console session", () => {
  beforeAll(async () => {
    server = spawn("xal", ["serve", "--port", String(PORT), "--host", "127.0.0.1"], {
      stdio: ["ignore", "pipe", "pipe"],
    });
    server.stdout.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));
    server.stderr.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));
    await waitForServer(90_000);
  }, 100_000);

  afterAll(() => {
    server?.kill("SIGTERM");
  });

  it("drives a ten-round toy session end to end", async () => {
    const api = new Api(BASE);
    const view = new CountingView();
    const controller = new SessionController(api, view);

    const info = await controller.start({ preset: "toy-live", seed: 11 });
    expect(info.n_rows).toBe(200);
    expect(info.labeled_count).toBe(20);
    expect(info.regions.length).toBeGreaterThanOrEqual(2);

    // baseline: the round-0 history is charted before any labeling
    expect(controller.chart?.rounds).toBe(1);
    expect(view.chartRenders).toBe(1);

    const first = controller.card!;
    expect(first.round).toBe(0);
    expect(first.queryId).toMatch(/^q0-\d+$/);
    expect(first.constraints.length).toBeGreaterThan(0);
    firstQueryId = first.queryId;

    // skipping holds the round: a new query arrives, nothing charted
    await expect(controller.skip()).resolves.toBe("ok");
    expect(controller.card).toBeNull();
    await controller.tick();
    const afterSkip = controller.card!;
    expect(afterSkip.round).toBe(0);
    expect(afterSkip.queryId).not.toBe(first.queryId);
    expect(controller.chart?.rounds).toBe(1);
    expect(view.chartRenders).toBe(1);

    // a stale copy of the query (second-tab race) conflicts, and the
    // controller refetches the real pending query without an error
    controller.card = { ...afterSkip, queryId: "q0-9999" };
    await expect(controller.label(1)).resolves.toBe("stale");
    expect(view.banners).toEqual([]);
    expect(controller.card?.queryId).toBe(afterSkip.queryId);

    // ten labeled rounds; each advances the chart by exactly one round
    for (let round = 0; round < 10; round++) {
      if (!controller.card) await controller.tick();
      expect(controller.card?.round).toBe(round);
      await expect(controller.label((round % 2) as 0 | 1)).resolves.toBe("ok");
      expect(controller.chart?.rounds).toBe(round + 2);
      expect(view.chartRenders).toBe(round + 2);
    }

    expect(controller.chart?.rounds).toBe(11); // baseline + rounds 1..10
    expect(view.chartRenders).toBe(11); // chart updates = recorded rounds
    expect(view.chartRenders - 1).toBe(10); // one per labeled round
    expect(controller.done).toBe(false);
    expect(view.doneSummaries).toEqual([]);

    // the server agrees: round 10 is awaiting its label
    const next = await api.next(info.session_id);
    expect(next.status).toBe("awaiting_label");
    if (next.status === "awaiting_label") {
      expect(next.round).toBe(10);
      expect(next.query_id).toMatch(/^q10-\d+$/);
    }

    // a page reload rebuilds the identical chart from /history alone
    const rebuilt = new BiasChartState(info.regions);
    rebuilt.appendFrom(await api.history(info.session_id));
    expect(Object.fromEntries(rebuilt.series)).toEqual(
      Object.fromEntries(controller.chart!.series),
    );
  });

  it("selects the same first query again for the same seed", async () => {
    const controller = new SessionController(new Api(BASE), new CountingView());
    await controller.start({ preset: "toy-live", seed: 11 });
    expect(controller.card?.queryId).toBe(firstQueryId);
  });
});
