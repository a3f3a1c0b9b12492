// DOM behavior with a stubbed API: optimistic labeling with rollback, value
// reveal, and inline rule validation.
import { beforeEach, describe, expect, it, vi } from "vitest";

import type { ApiClient, LeakRecord, LeaksPage } from "../src/api.js";
import { LeakTableView } from "../src/views/leakTable.js";
import { RuleEditorView } from "../src/views/ruleEditor.js";
import { StatsView } from "../src/views/stats.js";

function record(i: number, overrides: Partial<LeakRecord> = {}): LeakRecord {
  return {
    prediction_id: `p${i}`,
    flow_id: `f${i}`,
    classifier: "c",
    positive: true,
    score: 0.9,
    extracted: [{ category: "DeviceIdentifier", kind: "Imei", key: "auid",
                  value: "356938035643809", span: [0, 15] }],
    model_version: 1,
    ts_ms: 1470000000000 + i,
    domain: "metrics.apexmob.example",
    app: "ApexMetrics",
    os: "android",
    outcome: { decision: "pass", applied_rules: [] },
    labels: [],
    ...overrides,
  };
}

function page(records: LeakRecord[]): LeaksPage {
  return { leaks: records, total: records.length, offset: 0, limit: 500 };
}

function stubApi(overrides: Partial<Record<keyof ApiClient, unknown>> = {}): ApiClient {
  return {
    leaks: vi.fn(async () => page([record(0), record(1)])),
    submitLabel: vi.fn(async () => ({ ok: true, backfill: 0 })),
    rules: vi.fn(async () => []),
    createRule: vi.fn(async (draft: unknown) => ({
      rule_id: "r1",
      ...(draft as object),
      enabled: true,
      created_by: "",
    })),
    setRuleEnabled: vi.fn(async () => ({})),
    deleteRule: vi.fn(async () => ({ ok: true })),
    metrics: vi.fn(async () => ({})),
    models: vi.fn(async () => []),
    retrain: vi.fn(async () => ({ retrained: [], backfilled: 0, deltas: {} })),
    ingest: vi.fn(async () => ({ results: [] })),
    ...overrides,
  } as unknown as ApiClient;
}

function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

describe("leak table view", () => {
  let root: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = `<div id="leaks"></div>`;
    root = document.getElementById("leaks")!;
  });

  it("renders one row per leak with the value masked", async () => {
    const api = stubApi();
    const view = new LeakTableView(root, { api, user: "u", toast: () => {} });
    await view.refresh();
    const rows = root.querySelectorAll("tbody tr");
    expect(rows).toHaveLength(2);
    const value = root.querySelector('[data-role="value"]')!;
    expect(value.textContent).not.toContain("356938035643809");
    (value as HTMLElement).click();
    expect(value.textContent).toBe("356938035643809");
  });

  it("labels optimistically and keeps the state on success", async () => {
    const api = stubApi();
    const view = new LeakTableView(root, { api, user: "u", toast: () => {} });
    await view.refresh();
    const button = root.querySelector(
      'tbody tr [data-role="verdict"] button[data-verdict="Correct"]',
    ) as HTMLButtonElement;
    button.click();
    await flush();
    expect(api.submitLabel).toHaveBeenCalledWith("p0", "Correct", "u");
    expect(root.querySelector("tbody tr .labeled")?.textContent).toBe("Correct");
  });

  it("rolls back the optimistic label and toasts when the API fails", async () => {
    const toast = vi.fn();
    const api = stubApi({
      submitLabel: vi.fn(async () => {
        throw new Error("boom");
      }),
    });
    const view = new LeakTableView(root, { api, user: "u", toast });
    await view.refresh();
    const button = root.querySelector(
      'tbody tr [data-role="verdict"] button[data-verdict="Wrong"]',
    ) as HTMLButtonElement;
    button.click();
    await flush();
    expect(root.querySelector("tbody tr .labeled")).toBeNull();
    expect(toast).toHaveBeenCalledWith(expect.stringContaining("label failed"));
  });

  it("applies domain and pii filters to the rendered rows", async () => {
    const api = stubApi({
      leaks: vi.fn(async () =>
        page([
          record(0),
          record(1, {
            domain: "geo.pinmaps.example",
            extracted: [{ category: "Location", kind: "GpsCoordinate", key: "ll",
                          value: "1,2", span: [0, 3] }],
          }),
        ])),
    });
    const view = new LeakTableView(root, { api, user: "u", toast: () => {} });
    await view.refresh();
    (root.querySelector('[data-role="filter-domain"]') as HTMLInputElement).value =
      "geo.pinmaps.example";
    (root.querySelector('[data-role="apply-filters"]') as HTMLButtonElement).click();
    expect(root.querySelectorAll("tbody tr")).toHaveLength(1);
  });

  it("per-leak replace with an empty replacement shows an inline error", async () => {
    const api = stubApi();
    const view = new LeakTableView(root, { api, user: "u", toast: () => {} });
    await view.refresh();
    const cell = root.querySelector('tbody tr [data-role="action"]')!;
    const select = cell.querySelector("select") as HTMLSelectElement;
    select.value = "replace";
    select.dispatchEvent(new Event("change"));
    (cell.querySelector("button") as HTMLButtonElement).click();
    await flush();
    expect(cell.querySelector('[data-role="action-error"]')!.textContent)
      .toContain("replacement");
    expect(api.createRule).not.toHaveBeenCalled();
  });

  it("per-leak replace posts a domain-scoped rule", async () => {
    const api = stubApi();
    const created = vi.fn();
    const view = new LeakTableView(root, { api, user: "u", toast: () => {},
                                           onRuleCreated: created });
    await view.refresh();
    const cell = root.querySelector('tbody tr [data-role="action"]')!;
    const select = cell.querySelector("select") as HTMLSelectElement;
    select.value = "replace";
    select.dispatchEvent(new Event("change"));
    (cell.querySelector("input") as HTMLInputElement).value = "XXXX";
    (cell.querySelector("button") as HTMLButtonElement).click();
    await flush();
    expect(api.createRule).toHaveBeenCalledWith({
      scope: { type: "domain", value: "metrics.apexmob.example" },
      action: { type: "replace", replacement: "XXXX" },
      pii_filter: { category: "DeviceIdentifier", kind: "Imei" },
    });
    expect(created).toHaveBeenCalled();
  });
});

describe("rule editor view", () => {
  beforeEach(() => {
    document.body.innerHTML = `<div id="rules"></div>`;
  });

  it("lists rules and toggles enabled state", async () => {
    const api = stubApi({
      rules: vi.fn(async () => [
        { rule_id: "r1", scope: { type: "domain", value: "x.example" },
          action: { type: "block" }, pii_filter: null, enabled: true, created_by: "" },
      ]),
    });
    const view = new RuleEditorView(document.getElementById("rules")!,
                                    { api, toast: () => {} });
    await view.refresh();
    const li = document.querySelector('li[data-rule-id="r1"]')!;
    expect(li.textContent).toContain("block");
    (li.querySelector('[data-role="toggle"]') as HTMLButtonElement).click();
    await flush();
    expect(api.setRuleEnabled).toHaveBeenCalledWith("r1", false);
  });

  it("validates the creation form before calling the API", async () => {
    const api = stubApi();
    new RuleEditorView(document.getElementById("rules")!, { api, toast: () => {} });
    const form = document.querySelector('[data-role="rule-form"]') as HTMLFormElement;
    (document.querySelector('[data-role="new-action"]') as HTMLSelectElement).value =
      "replace";
    (document.querySelector('[data-role="new-scope-value"]') as HTMLInputElement).value =
      "x.example";
    form.dispatchEvent(new Event("submit"));
    await flush();
    expect(document.querySelector('[data-role="rule-error"]')!.textContent)
      .toContain("replacement");
    expect(api.createRule).not.toHaveBeenCalled();
  });
});

describe("stats view", () => {
  beforeEach(() => {
    document.body.innerHTML = `<div id="stats"></div>`;
  });

  it("shows a placeholder without metrics and a table with them", async () => {
    const api = stubApi();
    const view = new StatsView(document.getElementById("stats")!,
                               { api, toast: () => {} });
    await view.refresh();
    expect(document.querySelector('[data-role="metrics"] .placeholder')).toBeTruthy();
    (api.metrics as ReturnType<typeof vi.fn>).mockResolvedValue({
      "general": { ccr: 0.99, auc: 0.98, fpr: 0.01, fnr: 0.02, tp: 1, tn: 1,
                   fp: 0, fn: 0, predict_micros_mean: 5, predict_micros_max: 9 },
    });
    await view.refresh();
    const cellText = document.querySelector('[data-role="metrics"] tbody tr')!
      .textContent!;
    expect(cellText).toContain("general");
    expect(cellText).toContain("0.9900");
  });

  it("records retrain history and re-renders model versions", async () => {
    const api = stubApi({
      models: vi.fn(async () => [
        { classifier: "general", domain: null, os: null, version: 2,
          vocab_size: 10, tree_depth: 1, tree_leaves: 2, n_pos: 1, n_neg: 1 },
      ]),
      retrain: vi.fn(async () => ({ retrained: ["general"], backfilled: 3,
                                    deltas: {} })),
    });
    const view = new StatsView(document.getElementById("stats")!,
                               { api, toast: () => {} });
    await view.refresh();
    expect(document.querySelector('[data-role="version"]')!.textContent).toBe("v2");
    (document.querySelector('[data-role="retrain"]') as HTMLButtonElement).click();
    await flush();
    expect(document.querySelector('[data-role="retrain-history"] li')!.textContent)
      .toContain("backfilled 3");
  });
});
