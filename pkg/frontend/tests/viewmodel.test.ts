import { describe, expect, it } from "vitest";

import type { HistoryPayload, NextAwaiting } from "../src/api.js";
import { BiasChartState, cardFrom, weightBars } from "../src/viewmodel.js";

function awaitingFixture(): NextAwaiting {
  return {
    status: "awaiting_label",
    round: 4,
    query_id: "q4-17",
    index: 17,
    features: [
      { name: "age", value: 31, display: "31" },
      { name: "priors", value: 2, display: "2" },
    ],
    certainty: 0.5031,
    explanation: {
      // deliberately awkward floats: the card must not touch them
      constraints: [
        { text: "age <= 0.00", feature: 0, weight: 0.30000000000000004 },
        { text: "priors > 0.00", feature: 1, weight: -1.7763568394002505e-15 },
      ],
      intercept: 0.4812,
      r2: 0.9321,
    },
    region_text: "Q2",
  };
}

describe("cardFrom", () => {
  it("passes explanation weights through exactly as received", () => {
    const payload = awaitingFixture();
    const card = cardFrom(payload);
    expect(card.constraints).toHaveLength(2);
    expect(Object.is(card.constraints[0]!.weight, 0.30000000000000004)).toBe(true);
    expect(Object.is(card.constraints[1]!.weight, -1.7763568394002505e-15)).toBe(true);
    expect(card.constraints[0]!.text).toBe("age <= 0.00");
    expect(card.intercept).toBe(payload.explanation.intercept);
    expect(card.r2).toBe(payload.explanation.r2);
  });

  it("carries identity and display fields over", () => {
    const card = cardFrom(awaitingFixture());
    expect(card.queryId).toBe("q4-17");
    expect(card.round).toBe(4);
    expect(card.index).toBe(17);
    expect(card.certainty).toBe(0.5031);
    expect(card.regionText).toBe("Q2");
    expect(card.features.map((f) => f.name)).toEqual(["age", "priors"]);
    expect(card.batch).toBeUndefined();
  });

  it("keeps the batch summary when present", () => {
    const payload = { ...awaitingFixture(), batch: { size: 5, summary: "cluster 2" } };
    expect(cardFrom(payload).batch).toEqual({ size: 5, summary: "cluster 2" });
  });
});

function historyOf(points: Array<Record<string, number | null>>): HistoryPayload {
  return {
    regions: ["1", "2"],
    rounds: points.map((bias, r) => ({
      round: r,
      bias,
      count: Object.fromEntries(Object.keys(bias).map((k) => [k, r + 1])),
    })),
  };
}

describe("BiasChartState", () => {
  it("appends rounds and reports the count", () => {
    const state = new BiasChartState(["1", "2"]);
    const history = historyOf([{ "1": 0.2, "2": 0.1 }, { "1": 0.3, "2": null }]);
    expect(state.appendFrom(history)).toBe(2);
    expect(state.rounds).toBe(2);
    expect(state.series.get("1")).toEqual([
      { round: 0, bias: 0.2, count: 1 },
      { round: 1, bias: 0.3, count: 2 },
    ]);
    expect(state.series.get("2")![1]).toEqual({ round: 1, bias: null, count: 2 });
  });

  it("is append-only: re-reading the same history changes nothing", () => {
    const state = new BiasChartState(["1", "2"]);
    const history = historyOf([{ "1": 0.2, "2": 0.1 }, { "1": 0.3, "2": 0.4 }]);
    state.appendFrom(history);
    const snapshot = JSON.stringify([...state.series.entries()]);
    expect(state.appendFrom(history)).toBe(0);
    expect(JSON.stringify([...state.series.entries()])).toBe(snapshot);
  });

  it("extends with only the new rounds on a longer history", () => {
    const state = new BiasChartState(["1", "2"]);
    state.appendFrom(historyOf([{ "1": 0.2, "2": 0.1 }]));
    const longer = historyOf([{ "1": 0.2, "2": 0.1 }, { "1": 0.25, "2": 0.15 }]);
    expect(state.appendFrom(longer)).toBe(1);
    expect(state.rounds).toBe(2);
  });

  it("rejects a history shorter than what it already holds", () => {
    const state = new BiasChartState(["1", "2"]);
    state.appendFrom(historyOf([{ "1": 0.2, "2": 0.1 }, { "1": 0.3, "2": 0.4 }]));
    expect(() => state.appendFrom(historyOf([{ "1": 0.2, "2": 0.1 }]))).toThrow(/shrank/);
  });

  it("fills missing regions with a gap point", () => {
    const state = new BiasChartState(["1", "2"]);
    state.appendFrom(historyOf([{ "1": 0.2 }]));
    expect(state.series.get("2")![0]).toEqual({ round: 0, bias: null, count: 0 });
  });

  it("toggles visibility without touching the data", () => {
    const state = new BiasChartState(["1", "2"]);
    state.appendFrom(historyOf([{ "1": 0.2, "2": 0.1 }]));
    state.toggle("2");
    expect(state.isVisible("2")).toBe(false);
    expect(state.visibleRegions()).toEqual(["1"]);
    expect(state.series.get("2")).toHaveLength(1);
    state.toggle("2");
    expect(state.visibleRegions()).toEqual(["1", "2"]);
  });
});

describe("weightBars", () => {
  it("centers bars on the axis midpoint, scaled by the largest weight", () => {
    const bars = weightBars(
      [
        { text: "a", feature: 0, weight: 2.0 },
        { text: "b", feature: 1, weight: -1.0 },
        { text: "c", feature: 2, weight: 0.5 },
      ],
      200,
    );
    // width 200 -> midpoint 100; |2.0| spans the full half
    expect(bars[0]).toMatchObject({ x: 100, w: 100, positive: true });
    expect(bars[1]).toMatchObject({ x: 50, w: 50, positive: false });
    expect(bars[2]).toMatchObject({ x: 100, w: 25, positive: true });
  });

  it("gives mirrored weights mirrored geometry", () => {
    const [pos, neg] = weightBars(
      [
        { text: "p", feature: 0, weight: 0.7 },
        { text: "n", feature: 1, weight: -0.7 },
      ],
      300,
    );
    expect(pos!.w).toBeCloseTo(neg!.w, 12);
    expect(pos!.x).toBe(150);
    expect(pos!.x - neg!.x).toBeCloseTo(neg!.w, 12);
  });

  it("keeps the received weight on the bar unchanged", () => {
    const bars = weightBars([{ text: "a", feature: 0, weight: -0.1234567890123 }], 100);
    expect(Object.is(bars[0]!.weight, -0.1234567890123)).toBe(true);
  });

  it("degrades to zero-length bars when all weights are zero", () => {
    const bars = weightBars(
      [
        { text: "a", feature: 0, weight: 0 },
        { text: "b", feature: 1, weight: 0 },
      ],
      200,
    );
    for (const bar of bars) {
      expect(bar.w).toBe(0);
      expect(bar.x).toBe(100);
      expect(Number.isFinite(bar.w)).toBe(true);
    }
  });
});
