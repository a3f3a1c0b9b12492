// Typed client for the /v1 JSON API. The UI derives all state from these
// calls; nothing is inferred client-side.

export interface ExtractedItem {
  category: string;
  kind: string;
  key: string;
  value: string;
  span: [number, number];
}

export interface LeakRecord {
  prediction_id: string;
  flow_id: string;
  classifier: string;
  positive: boolean;
  score: number;
  extracted: ExtractedItem[];
  model_version: number;
  ts_ms: number;
  domain?: string;
  app?: string | null;
  os?: string;
  outcome?: { decision?: string; applied_rules?: string[] };
  labels?: { user: string; verdict: string }[];
}

export interface LeaksPage {
  leaks: LeakRecord[];
  total: number;
  offset: number;
  limit: number;
}

export interface RuleScope {
  type: "category" | "domain" | "app";
  value: string;
}

export interface RuleAction {
  type: "block" | "remove" | "replace";
  replacement?: string;
}

export interface Rule {
  rule_id: string;
  scope: RuleScope;
  action: RuleAction;
  pii_filter: { category: string; kind: string } | null;
  enabled: boolean;
  created_by: string;
}

export interface ModelSummary {
  classifier: string;
  domain: string | null;
  os: string | null;
  version: number;
  vocab_size: number;
  tree_depth: number;
  tree_leaves: number;
  n_pos: number | null;
  n_neg: number | null;
}

export interface ClassifierMetrics {
  ccr: number;
  auc: number;
  fpr: number;
  fnr: number;
  tp: number;
  tn: number;
  fp: number;
  fn: number;
  predict_micros_mean: number;
  predict_micros_max: number;
}

export interface RetrainReport {
  retrained: string[];
  backfilled: number;
  deltas: Record<string, unknown>;
}

export interface LeakFilters {
  domain?: string;
  pii?: string;
  since?: number;
  offset?: number;
  limit?: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(private baseUrl: string = "", private authToken: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const headers: Record<string, string> = {
      "Content-Type": "application/json",
      ...(init?.headers as Record<string, string> | undefined),
    };
    if (this.authToken) headers["X-Auth-Token"] = this.authToken;
    const resp = await fetch(this.baseUrl + path, { ...init, headers });
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        if (body && body.detail) detail = String(body.detail);
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  async leaks(filters: LeakFilters = {}): Promise<LeaksPage> {
    const params = new URLSearchParams();
    if (filters.domain) params.set("domain", filters.domain);
    if (filters.pii) params.set("pii", filters.pii);
    if (filters.since !== undefined) params.set("since", String(filters.since));
    if (filters.offset !== undefined) params.set("offset", String(filters.offset));
    params.set("limit", String(filters.limit ?? 500));
    return this.request<LeaksPage>(`/v1/leaks?${params.toString()}`);
  }

  async submitLabel(predictionId: string, verdict: string, user: string) {
    return this.request<{ ok: boolean; backfill: number }>("/v1/labels", {
      method: "POST",
      body: JSON.stringify({ prediction_id: predictionId, verdict, user }),
    });
  }

  async rules(): Promise<Rule[]> {
    const body = await this.request<{ rules: Rule[] }>("/v1/rules");
    return body.rules;
  }

  async createRule(rule: {
    scope: RuleScope;
    action: RuleAction;
    pii_filter?: { category: string; kind: string } | null;
  }): Promise<Rule> {
    return this.request<Rule>("/v1/rules", {
      method: "POST",
      body: JSON.stringify({ pii_filter: null, ...rule }),
    });
  }

  async setRuleEnabled(ruleId: string, enabled: boolean): Promise<Rule> {
    return this.request<Rule>(`/v1/rules/${encodeURIComponent(ruleId)}`, {
      method: "PATCH",
      body: JSON.stringify({ enabled }),
    });
  }

  async deleteRule(ruleId: string) {
    return this.request<{ ok: boolean }>(`/v1/rules/${encodeURIComponent(ruleId)}`, {
      method: "DELETE",
    });
  }

  async metrics(): Promise<Record<string, ClassifierMetrics>> {
    const body = await this.request<{ metrics: Record<string, ClassifierMetrics> }>(
      "/v1/metrics",
    );
    return body.metrics ?? {};
  }

  async models(): Promise<ModelSummary[]> {
    const body = await this.request<{ models: ModelSummary[] }>("/v1/models");
    return body.models;
  }

  async retrain(): Promise<RetrainReport> {
    return this.request<RetrainReport>("/v1/retrain", { method: "POST" });
  }

  async ingest(records: unknown[]): Promise<{ results: Record<string, unknown>[] }> {
    return this.request("/v1/flows", {
      method: "POST",
      body: JSON.stringify({ records }),
    });
  }
}
