// View models and the pure logic behind the views: masking, filtering,
// rule construction. Kept DOM-free so it is unit-testable.

import type { LeakRecord, LeaksPage, Rule, RuleAction, RuleScope } from "./api.js";

export type LabelState = "" | "Correct" | "Wrong" | "Unknown";

export interface LeakRow {
  predictionId: string;
  flowId: string;
  time: string;
  timeMs: number;
  domain: string;
  app: string;
  os: string;
  category: string;
  kind: string;
  key: string;
  value: string;
  masked: boolean;
  score: number;
  outcome: string;
  labelState: LabelState;
  unextracted: boolean;
}

export function maskValue(value: string): string {
  if (!value) return "";
  const dots = "•".repeat(Math.min(value.length, 12));
  return dots;
}

export function displayValue(row: LeakRow): string {
  if (row.unextracted) return "(value not located)";
  return row.masked ? maskValue(row.value) : row.value;
}

export function toLeakRow(record: LeakRecord): LeakRow {
  const first = record.extracted[0];
  const mine = record.labels && record.labels.length > 0
    ? (record.labels[record.labels.length - 1].verdict as string)
    : "";
  const normalized = mine
    ? ((mine[0].toUpperCase() + mine.slice(1).toLowerCase()) as LabelState)
    : "";
  return {
    predictionId: record.prediction_id,
    flowId: record.flow_id,
    time: new Date(record.ts_ms).toISOString().replace("T", " ").slice(0, 19),
    timeMs: record.ts_ms,
    domain: record.domain ?? "",
    app: record.app ?? "",
    os: record.os ?? "",
    category: first ? first.category : "",
    kind: first ? first.kind : "",
    key: first ? first.key : "",
    value: first ? first.value : "",
    // values start masked; credentials must never render unmasked by default
    masked: true,
    score: record.score,
    outcome: record.outcome?.decision ?? "",
    labelState: normalized,
    unextracted: record.extracted.length === 0,
  };
}

export function rowsFromPage(page: LeaksPage): LeakRow[] {
  return page.leaks.map(toLeakRow);
}

export interface RowFilters {
  domain: string;
  pii: string;
  fromMs: number | null;
  toMs: number | null;
}

export function filterRows(rows: LeakRow[], filters: RowFilters): LeakRow[] {
  return rows.filter((row) => {
    if (filters.domain && row.domain !== filters.domain) return false;
    if (filters.pii && row.category !== filters.pii && row.kind !== filters.pii)
      return false;
    if (filters.fromMs !== null && row.timeMs < filters.fromMs) return false;
    if (filters.toMs !== null && row.timeMs > filters.toMs) return false;
    return true;
  });
}

// Per-leak dropdown choices and how each turns into a rewrite rule.
export type LeakAction = "allow" | "remove" | "replace" | "block-domain";

export interface RuleDraft {
  scope: RuleScope;
  action: RuleAction;
  pii_filter: { category: string; kind: string } | null;
}

export function buildRuleDraft(
  row: LeakRow,
  action: LeakAction,
  replacement: string,
  scopeType: "category" | "domain" | "app" = "domain",
): RuleDraft | { error: string } {
  if (action === "allow") return { error: "allow needs no rule" };
  if (action === "replace" && !replacement.trim()) {
    return { error: "replacement text must not be empty" };
  }
  let scope: RuleScope;
  if (action === "block-domain" || scopeType === "domain") {
    scope = { type: "domain", value: row.domain };
  } else if (scopeType === "category") {
    scope = { type: "category", value: row.category };
  } else {
    scope = { type: "app", value: row.app };
  }
  if (!scope.value) return { error: `leak has no ${scope.type} to scope the rule by` };
  const ruleAction: RuleAction =
    action === "block-domain"
      ? { type: "block" }
      : action === "remove"
        ? { type: "remove" }
        : { type: "replace", replacement: replacement.trim() };
  const pii_filter =
    action === "block-domain" || !row.kind
      ? null
      : { category: row.category, kind: row.kind };
  return { scope, action: ruleAction, pii_filter };
}

export function describeRule(rule: Rule): string {
  const action =
    rule.action.type === "replace"
      ? `replace with "${rule.action.replacement ?? ""}"`
      : rule.action.type;
  const filter = rule.pii_filter ? ` (${rule.pii_filter.kind})` : "";
  return `${action} when ${rule.scope.type}=${rule.scope.value}${filter}`;
}

// Aggregations for the stats view; counts come straight off the API rows.
export function countBy(rows: LeakRow[], field: "category" | "os"): Map<string, number> {
  const out = new Map<string, number>();
  for (const row of rows) {
    const key = row[field] || "(unknown)";
    out.set(key, (out.get(key) ?? 0) + 1);
  }
  return out;
}
