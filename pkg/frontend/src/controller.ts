// Session flow state machine, kept free of DOM so the protocol logic
// is testable headless. One mutation may be in flight at a time; a
// stale-query conflict silently refetches instead of surfacing an
// error, because it just means the server has moved on.

import { StaleQueryError } from "./api.js";
import type { ApiClient, LabelResult, SessionInfo } from "./api.js";
import { BiasChartState, cardFrom } from "./viewmodel.js";
import type { QueryCard } from "./viewmodel.js";

export interface DoneSummary {
  round: number;
  labeledCount: number;
}

export interface ConsoleView {
  renderCard(card: QueryCard | null): void;
  renderChart(state: BiasChartState): void;
  renderDone(summary: DoneSummary): void;
  setBusy(busy: boolean): void;
  showBanner(message: string | null): void;
}

export type SubmitOutcome = "ok" | "stale" | "ignored" | "failed";

const BASE_POLL_MS = 500;
const MAX_BACKOFF_MS = 8000;

export class SessionController {
  session: SessionInfo | null = null;
  chart: BiasChartState | null = null;
  card: QueryCard | null = null;
  done = false;
  private busy = false;
  private failures = 0;

  constructor(
    private readonly api: ApiClient,
    private readonly view: ConsoleView,
  ) {}

  async start(options: { preset?: string; seed?: number }): Promise<SessionInfo> {
    this.session = await this.api.createSession(options);
    this.chart = new BiasChartState(this.session.regions);
    await this.refreshHistory();
    await this.tick();
    return this.session;
  }

  /** Poll interval with exponential backoff while the service is
   * unreachable. */
  nextDelayMs(): number {
    return Math.min(BASE_POLL_MS * 2 ** this.failures, MAX_BACKOFF_MS);
  }

  async tick(): Promise<void> {
    if (!this.session || this.done || this.busy) return;
    try {
      const payload = await this.api.next(this.session.session_id);
      this.recovered();
      if (payload.status === "done") {
        await this.finish(payload.round, payload.labeled_count);
        return;
      }
      if (!this.card || this.card.queryId !== payload.query_id) {
        this.card = cardFrom(payload);
        this.view.renderCard(this.card);
      }
    } catch (err) {
      this.noteFailure(err);
    }
  }

  label(label: 0 | 1): Promise<SubmitOutcome> {
    return this.submit((sid, queryId) => this.api.label(sid, queryId, label));
  }

  skip(): Promise<SubmitOutcome> {
    return this.submit((sid, queryId) => this.api.skip(sid, queryId));
  }

  private async submit(
    send: (sessionId: string, queryId: string) => Promise<LabelResult>,
  ): Promise<SubmitOutcome> {
    if (!this.session || this.busy || !this.card || this.done) return "ignored";
    this.busy = true;
    this.view.setBusy(true);
    try {
      const result = await send(this.session.session_id, this.card.queryId);
      this.recovered();
      this.card = null;
      this.view.renderCard(null);
      await this.refreshHistory();
      if (result.done) {
        await this.finish(result.round, result.labeled_count);
      }
      return "ok";
    } catch (err) {
      if (err instanceof StaleQueryError) {
        // the pending query changed under us; drop ours and refetch
        this.card = null;
        this.view.renderCard(null);
        this.busy = false;
        this.view.setBusy(false);
        await this.tick();
        return "stale";
      }
      this.noteFailure(err);
      return "failed";
    } finally {
      this.busy = false;
      this.view.setBusy(false);
    }
  }

  /** Pull the full history and extend the chart; renders only when new
   * rounds actually arrived, so skips cause no spurious updates. */
  async refreshHistory(): Promise<number> {
    if (!this.session || !this.chart) return 0;
    const history = await this.api.history(this.session.session_id);
    const appended = this.chart.appendFrom(history);
    if (appended > 0) this.view.renderChart(this.chart);
    return appended;
  }

  private async finish(round: number, labeledCount: number): Promise<void> {
    this.done = true;
    this.card = null;
    this.view.renderCard(null);
    await this.refreshHistory();
    this.view.renderDone({ round, labeledCount });
  }

  private recovered(): void {
    if (this.failures > 0) this.view.showBanner(null);
    this.failures = 0;
  }

  private noteFailure(err: unknown): void {
    this.failures += 1;
    const message = err instanceof Error ? err.message : String(err);
    this.view.showBanner(`service unreachable (${message}); retrying`);
  }
}
