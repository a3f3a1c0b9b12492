// App bootstrap: three panels over the JSON API, refreshed by polling.

import { ApiClient } from "./api.js";
import { LeakTableView } from "./views/leakTable.js";
import { RuleEditorView } from "./views/ruleEditor.js";
import { StatsView } from "./views/stats.js";

const POLL_MS = 5000;

function toast(message: string): void {
  const el = document.getElementById("toast");
  if (!el) return;
  el.textContent = message;
  el.classList.add("visible");
  setTimeout(() => el.classList.remove("visible"), 4000);
}

export function startApp(root: Document = document): void {
  const params = new URLSearchParams(root.defaultView?.location.search ?? "");
  const api = new ApiClient(params.get("api") ?? "", params.get("token") ?? "");
  const user = params.get("user") ?? "reviewer";

  const rules = new RuleEditorView(root.getElementById("rules")!, { api, toast });
  const leaks = new LeakTableView(root.getElementById("leaks")!, {
    api,
    user,
    toast,
    onRuleCreated: () => void rules.refresh(),
  });
  const stats = new StatsView(root.getElementById("stats")!, { api, toast });

  const refreshAll = () => {
    void leaks.refresh().catch((err) => toast(`leaks: ${err.message}`));
    void rules.refresh().catch((err) => toast(`rules: ${err.message}`));
    void stats.refresh().catch((err) => toast(`stats: ${err.message}`));
  };
  refreshAll();
  setInterval(refreshAll, POLL_MS);
}

if (typeof document !== "undefined" && document.getElementById("leaks")) {
  startApp();
}
