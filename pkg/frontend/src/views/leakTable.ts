// Leak table: one row per suspected leak with masked value, verdict buttons
// (optimistic, rolled back on API failure) and a per-leak action dropdown.

import type { ApiClient } from "../api.js";
import {
  LeakAction,
  LeakRow,
  RowFilters,
  buildRuleDraft,
  displayValue,
  filterRows,
  rowsFromPage,
} from "../model.js";

export interface LeakTableDeps {
  api: ApiClient;
  user: string;
  toast: (message: string) => void;
  onRuleCreated?: () => void;
}

const VERDICTS = ["Correct", "Wrong", "Unknown"] as const;

export class LeakTableView {
  rows: LeakRow[] = [];
  filters: RowFilters = { domain: "", pii: "", fromMs: null, toMs: null };
  private tbody: HTMLTableSectionElement;

  constructor(private root: HTMLElement, private deps: LeakTableDeps) {
    root.innerHTML = `
      <div class="filters">
        <input data-role="filter-domain" placeholder="domain" />
        <select data-role="filter-pii">
          <option value="">any PII</option>
          <option>DeviceIdentifier</option>
          <option>UserIdentifier</option>
          <option>ContactInformation</option>
          <option>Location</option>
          <option>Credential</option>
        </select>
        <input data-role="filter-from" placeholder="from (ISO time)" />
        <input data-role="filter-to" placeholder="to (ISO time)" />
        <button data-role="apply-filters">Apply</button>
      </div>
      <table class="leaks">
        <thead>
          <tr>
            <th>time</th><th>app / domain</th><th>PII</th><th>key</th>
            <th>value</th><th>score</th><th>outcome</th><th>verdict</th><th>action</th>
          </tr>
        </thead>
        <tbody data-role="leak-body"></tbody>
      </table>`;
    this.tbody = root.querySelector('[data-role="leak-body"]') as HTMLTableSectionElement;
    (root.querySelector('[data-role="apply-filters"]') as HTMLButtonElement)
      .addEventListener("click", () => {
        this.readFilters();
        this.render();
      });
  }

  private readFilters() {
    const get = (role: string) =>
      (this.root.querySelector(`[data-role="${role}"]`) as HTMLInputElement).value.trim();
    const parse = (text: string) => (text ? Date.parse(text) : null);
    this.filters = {
      domain: get("filter-domain"),
      pii: (this.root.querySelector('[data-role="filter-pii"]') as HTMLSelectElement).value,
      fromMs: parse(get("filter-from")),
      toMs: parse(get("filter-to")),
    };
  }

  async refresh(): Promise<void> {
    const page = await this.deps.api.leaks({ limit: 1000 });
    const revealed = new Set(
      this.rows.filter((r) => !r.masked).map((r) => r.predictionId),
    );
    this.rows = rowsFromPage(page);
    for (const row of this.rows) {
      if (revealed.has(row.predictionId)) row.masked = false;
    }
    this.render();
  }

  visibleRows(): LeakRow[] {
    return filterRows(this.rows, this.filters);
  }

  render(): void {
    this.tbody.textContent = "";
    for (const row of this.visibleRows()) {
      this.tbody.appendChild(this.renderRow(row));
    }
  }

  private renderRow(row: LeakRow): HTMLTableRowElement {
    const tr = document.createElement("tr");
    tr.dataset.predictionId = row.predictionId;

    const cells = [
      row.time,
      `${row.app || "?"} / ${row.domain || "?"}`,
      row.kind ? `${row.category}/${row.kind}` : "(unextracted)",
      row.key,
    ];
    for (const text of cells) {
      const td = document.createElement("td");
      td.textContent = text;
      tr.appendChild(td);
    }

    const valueTd = document.createElement("td");
    const valueSpan = document.createElement("span");
    valueSpan.className = "value" + (row.masked ? " masked" : "");
    valueSpan.dataset.role = "value";
    valueSpan.textContent = displayValue(row);
    valueSpan.title = row.masked ? "click to reveal" : "click to mask";
    valueSpan.addEventListener("click", () => {
      row.masked = !row.masked;
      valueSpan.textContent = displayValue(row);
      valueSpan.classList.toggle("masked", row.masked);
    });
    valueTd.appendChild(valueSpan);
    tr.appendChild(valueTd);

    const scoreTd = document.createElement("td");
    scoreTd.textContent = row.score.toFixed(2);
    tr.appendChild(scoreTd);

    const outcomeTd = document.createElement("td");
    outcomeTd.textContent = row.outcome;
    tr.appendChild(outcomeTd);

    tr.appendChild(this.renderVerdictCell(row));
    tr.appendChild(this.renderActionCell(row));
    return tr;
  }

  private renderVerdictCell(row: LeakRow): HTMLTableCellElement {
    const td = document.createElement("td");
    td.dataset.role = "verdict";
    if (row.labelState) {
      const mark = document.createElement("span");
      mark.className = "labeled";
      mark.textContent = row.labelState;
      td.appendChild(mark);
      return td;
    }
    for (const verdict of VERDICTS) {
      const button = document.createElement("button");
      button.textContent = verdict;
      button.dataset.verdict = verdict;
      button.addEventListener("click", async () => {
        const previous = row.labelState;
        row.labelState = verdict; // optimistic
        this.render();
        try {
          await this.deps.api.submitLabel(row.predictionId, verdict, this.deps.user);
        } catch (err) {
          row.labelState = previous; // roll back
          this.render();
          this.deps.toast(`label failed: ${(err as Error).message}`);
        }
      });
      td.appendChild(button);
    }
    return td;
  }

  private renderActionCell(row: LeakRow): HTMLTableCellElement {
    const td = document.createElement("td");
    td.dataset.role = "action";
    const select = document.createElement("select");
    for (const [value, label] of [
      ["allow", "Allow"],
      ["remove", "Remove"],
      ["replace", "Replace with…"],
      ["block-domain", "Block domain"],
    ] as [LeakAction, string][]) {
      const option = document.createElement("option");
      option.value = value;
      option.textContent = label;
      select.appendChild(option);
    }
    const replacement = document.createElement("input");
    replacement.placeholder = "replacement";
    replacement.className = "replacement";
    replacement.hidden = true;
    select.addEventListener("change", () => {
      replacement.hidden = select.value !== "replace";
    });
    const apply = document.createElement("button");
    apply.textContent = "Apply";
    const error = document.createElement("span");
    error.className = "inline-error";
    error.dataset.role = "action-error";
    apply.addEventListener("click", async () => {
      error.textContent = "";
      const action = select.value as LeakAction;
      if (action === "allow") return;
      const draft = buildRuleDraft(row, action, replacement.value);
      if ("error" in draft) {
        error.textContent = draft.error; // inline validation, no API call
        return;
      }
      try {
        await this.deps.api.createRule(draft);
        this.deps.toast(`rule created for ${draft.scope.value}`);
        this.deps.onRuleCreated?.();
      } catch (err) {
        error.textContent = (err as Error).message;
      }
    });
    td.append(select, replacement, apply, error);
    return td;
  }
}
