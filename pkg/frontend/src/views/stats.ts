// Stats dashboard: per-classifier accuracy metrics, leak counts broken down
// by PII category and by OS, model versions, and retrain history.

import type { ApiClient, ClassifierMetrics, ModelSummary, RetrainReport } from "../api.js";
import { LeakRow, countBy, rowsFromPage } from "../model.js";

export interface StatsDeps {
  api: ApiClient;
  toast: (message: string) => void;
}

export class StatsView {
  retrainHistory: { at: string; report: RetrainReport }[] = [];

  constructor(private root: HTMLElement, private deps: StatsDeps) {
    root.innerHTML = `
      <h2>Classifiers</h2>
      <div data-role="metrics"></div>
      <h2>Leaks by category / OS</h2>
      <div data-role="breakdown"></div>
      <h2>Models</h2>
      <div data-role="models"></div>
      <button data-role="retrain">Retrain now</button>
      <ul data-role="retrain-history"></ul>`;
    (root.querySelector('[data-role="retrain"]') as HTMLButtonElement)
      .addEventListener("click", () => void this.retrain());
  }

  private async retrain(): Promise<void> {
    try {
      const report = await this.deps.api.retrain();
      this.retrainHistory.push({ at: new Date().toISOString(), report });
      this.deps.toast(`retrained: ${report.retrained.join(", ") || "nothing to do"}`);
      await this.refresh();
    } catch (err) {
      this.deps.toast(`retrain failed: ${(err as Error).message}`);
    }
  }

  async refresh(): Promise<void> {
    const [metrics, models, page] = await Promise.all([
      this.deps.api.metrics(),
      this.deps.api.models(),
      this.deps.api.leaks({ limit: 1000 }),
    ]);
    this.renderMetrics(metrics);
    this.renderModels(models);
    this.renderBreakdown(rowsFromPage(page));
    this.renderHistory();
  }

  private renderMetrics(metrics: Record<string, ClassifierMetrics>): void {
    const target = this.root.querySelector('[data-role="metrics"]') as HTMLElement;
    const names = Object.keys(metrics).sort();
    if (names.length === 0) {
      target.innerHTML = `<p class="placeholder">no evaluation run yet</p>`;
      return;
    }
    const rows = names
      .map((name) => {
        const m = metrics[name];
        return `<tr><td>${name}</td><td>${m.ccr.toFixed(4)}</td>` +
          `<td>${m.auc.toFixed(4)}</td><td>${m.fpr.toFixed(4)}</td>` +
          `<td>${m.fnr.toFixed(4)}</td></tr>`;
      })
      .join("");
    target.innerHTML =
      `<table><thead><tr><th>classifier</th><th>CCR</th><th>AUC</th>` +
      `<th>FPR</th><th>FNR</th></tr></thead><tbody>${rows}</tbody></table>`;
  }

  private renderBreakdown(rows: LeakRow[]): void {
    const target = this.root.querySelector('[data-role="breakdown"]') as HTMLElement;
    if (rows.length === 0) {
      target.innerHTML = `<p class="placeholder">no leaks recorded</p>`;
      return;
    }
    const render = (counts: Map<string, number>) =>
      [...counts.entries()]
        .sort((a, b) => b[1] - a[1])
        .map(([name, count]) => `<tr><td>${name}</td><td>${count}</td></tr>`)
        .join("");
    target.innerHTML =
      `<table><tbody>${render(countBy(rows, "category"))}</tbody></table>` +
      `<table><tbody>${render(countBy(rows, "os"))}</tbody></table>`;
  }

  private renderModels(models: ModelSummary[]): void {
    const target = this.root.querySelector('[data-role="models"]') as HTMLElement;
    const rows = models
      .map(
        (m) =>
          `<tr data-classifier="${m.classifier}"><td>${m.classifier}</td>` +
          `<td data-role="version">v${m.version}</td><td>${m.vocab_size} words</td>` +
          `<td>depth ${m.tree_depth}</td></tr>`,
      )
      .join("");
    target.innerHTML = `<table><tbody>${rows}</tbody></table>`;
  }

  private renderHistory(): void {
    const target = this.root.querySelector('[data-role="retrain-history"]') as HTMLElement;
    target.textContent = "";
    for (const item of this.retrainHistory) {
      const li = document.createElement("li");
      li.textContent =
        `${item.at}: retrained ${item.report.retrained.length} classifier(s), ` +
        `backfilled ${item.report.backfilled}`;
      target.appendChild(li);
    }
  }
}
