// Real-DOM rendering of the view models. Bar geometry comes from the
// shared weightBars helper; text shows a rounded weight while the
// title attribute keeps the exact value the service sent.

import type { ClusterReport } from "./api.js";
import { drawBiasChart, regionColor } from "./chart.js";
import type { ConsoleView, DoneSummary } from "./controller.js";
import { weightBars } from "./viewmodel.js";
import type { BiasChartState, QueryCard } from "./viewmodel.js";

const BAR_WIDTH = 260;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class DomView implements ConsoleView {
  private togglesBuilt = false;

  constructor(
    private readonly root: {
      card: HTMLElement;
      chart: HTMLCanvasElement;
      toggles: HTMLElement;
      status: HTMLElement;
      banner: HTMLElement;
      buttons: HTMLButtonElement[];
    },
    private readonly onToggle: (region: string) => void,
  ) {}

  renderCard(card: QueryCard | null): void {
    const host = this.root.card;
    host.textContent = "";
    if (!card) return;

    host.append(el("h2", "", `query ${card.queryId} (round ${card.round}, row ${card.index})`));

    const table = el("table", "features");
    for (const f of card.features) {
      const tr = el("tr");
      tr.append(el("td", "fname", f.display || f.name));
      tr.append(el("td", "fval", String(f.value)));
      table.append(tr);
    }
    host.append(table);

    host.append(el("p", "certainty", `model certainty ${card.certainty.toFixed(4)}`));

    const bars = el("div", "bars");
    for (const bar of weightBars(card.constraints, BAR_WIDTH)) {
      const row = el("div", "bar-row");
      row.append(el("span", "bar-text", bar.text));
      const track = el("div", "bar-track");
      track.style.width = `${BAR_WIDTH}px`;
      const fill = el("div", bar.positive ? "bar-fill pos" : "bar-fill neg");
      fill.style.left = `${bar.x}px`;
      fill.style.width = `${Math.max(1, bar.w)}px`;
      track.append(fill);
      row.append(track);
      const label = el("span", "bar-weight", bar.weight.toFixed(4));
      label.title = String(bar.weight);
      row.append(label);
      bars.append(row);
    }
    host.append(bars);

    host.append(el("p", "region", `region: ${card.regionText}`));
    host.append(el("p", "fit", `local fit r2 ${card.r2.toFixed(3)}`));
    if (card.batch) {
      host.append(el("p", "batch", `batch of ${card.batch.size}: ${card.batch.summary}`));
    }
  }

  renderChart(state: BiasChartState): void {
    if (!this.togglesBuilt) {
      this.buildToggles(state);
      this.togglesBuilt = true;
    }
    const canvas = this.root.chart;
    const ctx = canvas.getContext("2d");
    if (ctx) drawBiasChart(ctx, state, canvas.width, canvas.height);
    this.root.status.textContent = `rounds recorded: ${state.rounds}`;
  }

  private buildToggles(state: BiasChartState): void {
    this.root.toggles.textContent = "";
    state.regions.forEach((name, i) => {
      const button = el("button", "toggle", name);
      button.style.borderColor = regionColor(i);
      button.addEventListener("click", () => {
        this.onToggle(name);
        button.classList.toggle("off", !state.isVisible(name));
        this.renderChart(state);
      });
      this.root.toggles.append(button);
    });
  }

  renderDone(summary: DoneSummary): void {
    const host = this.root.card;
    host.textContent = "";
    host.append(el("h2", "", "session complete"));
    host.append(el(
      "p", "",
      `${summary.labeledCount} points labeled over ${summary.round} rounds`,
    ));
  }

  setBusy(busy: boolean): void {
    for (const button of this.root.buttons) button.disabled = busy;
  }

  showBanner(message: string | null): void {
    this.root.banner.textContent = message ?? "";
    this.root.banner.style.display = message ? "block" : "none";
  }

  renderClusters(report: ClusterReport, host: HTMLElement): void {
    host.textContent = "";
    host.append(el(
      "h3", "",
      `${report.k} uncertainty clusters (agreement ${report.agreement.toFixed(2)})`,
    ));
    for (const cluster of report.clusters) {
      const line = cluster.label.length ? cluster.label.join(" and ") : "(unlabeled)";
      host.append(el("p", "cluster", `#${cluster.id} (${cluster.size} points): ${line}`));
    }
  }
}
