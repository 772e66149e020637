// Client-side view models. The card keeps the service's numbers
// untouched (formatting is the renderer's job), and the chart state is
// append-only: history refreshes may only extend the series.

import type {
  ConstraintWeight,
  FeatureCell,
  HistoryPayload,
  NextAwaiting,
} from "./api.js";

export interface QueryCard {
  queryId: string;
  round: number;
  index: number;
  features: FeatureCell[];
  certainty: number;
  constraints: ConstraintWeight[];
  intercept: number;
  r2: number;
  regionText: string;
  batch?: { size: number; summary: string };
}

export function cardFrom(payload: NextAwaiting): QueryCard {
  return {
    queryId: payload.query_id,
    round: payload.round,
    index: payload.index,
    features: payload.features,
    certainty: payload.certainty,
    constraints: payload.explanation.constraints,
    intercept: payload.explanation.intercept,
    r2: payload.explanation.r2,
    regionText: payload.region_text,
    batch: payload.batch,
  };
}

export interface SeriesPoint {
  round: number;
  bias: number | null; // null renders as a gap
  count: number;
}

export class BiasChartState {
  readonly series = new Map<string, SeriesPoint[]>();
  private readonly hidden = new Set<string>();

  constructor(readonly regions: string[]) {
    for (const name of regions) this.series.set(name, []);
  }

  get rounds(): number {
    const first = this.regions[0];
    return first === undefined ? 0 : this.series.get(first)!.length;
  }

  /** Extend every region's series with rounds beyond the current
   * length; earlier entries are never touched. Returns how many rounds
   * were appended. */
  appendFrom(history: HistoryPayload): number {
    const have = this.rounds;
    const incoming = history.rounds.length;
    if (incoming < have) {
      throw new Error(`history shrank from ${have} to ${incoming} rounds`);
    }
    for (let r = have; r < incoming; r++) {
      const entry = history.rounds[r]!;
      for (const name of this.regions) {
        this.series.get(name)!.push({
          round: entry.round,
          bias: entry.bias[name] ?? null,
          count: entry.count[name] ?? 0,
        });
      }
    }
    return incoming - have;
  }

  toggle(region: string): void {
    if (this.hidden.has(region)) this.hidden.delete(region);
    else this.hidden.add(region);
  }

  isVisible(region: string): boolean {
    return !this.hidden.has(region);
  }

  visibleRegions(): string[] {
    return this.regions.filter((name) => this.isVisible(name));
  }
}

export interface WeightBar {
  text: string;
  weight: number; // exactly the received weight
  // bar geometry on a zero-centered axis of the given pixel width:
  // x is the left edge, w the bar length, both nonnegative
  x: number;
  w: number;
  positive: boolean;
}

/** Signed horizontal bars: the axis midpoint is zero, each side scaled
 * by the largest absolute weight so sides stay comparable. */
export function weightBars(constraints: ConstraintWeight[], width: number): WeightBar[] {
  const mid = width / 2;
  const largest = Math.max(1e-12, ...constraints.map((c) => Math.abs(c.weight)));
  return constraints.map((c) => {
    const len = (Math.abs(c.weight) / largest) * mid;
    return {
      text: c.text,
      weight: c.weight,
      x: c.weight >= 0 ? mid : mid - len,
      w: len,
      positive: c.weight >= 0,
    };
  });
}
