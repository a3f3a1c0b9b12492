// Rules panel: list existing block/remove/replace rules, toggle or delete
// them, and create rules from scratch.

import type { ApiClient, Rule } from "../api.js";
import { describeRule } from "../model.js";

export interface RuleEditorDeps {
  api: ApiClient;
  toast: (message: string) => void;
}

export class RuleEditorView {
  rules: Rule[] = [];
  private listEl: HTMLElement;

  constructor(private root: HTMLElement, private deps: RuleEditorDeps) {
    root.innerHTML = `
      <h2>Rules</h2>
      <form data-role="rule-form">
        <select data-role="new-scope-type">
          <option value="domain">domain</option>
          <option value="category">category</option>
          <option value="app">app</option>
        </select>
        <input data-role="new-scope-value" placeholder="scope value" />
        <select data-role="new-action">
          <option value="block">block</option>
          <option value="remove">remove</option>
          <option value="replace">replace</option>
        </select>
        <input data-role="new-replacement" placeholder="replacement" />
        <button type="submit">Add rule</button>
        <span class="inline-error" data-role="rule-error"></span>
      </form>
      <ul class="rules" data-role="rule-list"></ul>`;
    this.listEl = root.querySelector('[data-role="rule-list"]') as HTMLElement;
    const form = root.querySelector('[data-role="rule-form"]') as HTMLFormElement;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.createFromForm();
    });
  }

  private field(role: string): HTMLInputElement {
    return this.root.querySelector(`[data-role="${role}"]`) as HTMLInputElement;
  }

  private async createFromForm(): Promise<void> {
    const errorEl = this.root.querySelector('[data-role="rule-error"]') as HTMLElement;
    errorEl.textContent = "";
    const scopeType = (this.field("new-scope-type") as unknown as HTMLSelectElement).value;
    const scopeValue = this.field("new-scope-value").value.trim();
    const actionType = (this.field("new-action") as unknown as HTMLSelectElement).value;
    const replacement = this.field("new-replacement").value;
    if (!scopeValue) {
      errorEl.textContent = "scope value is required";
      return;
    }
    if (actionType === "replace" && !replacement.trim()) {
      errorEl.textContent = "replacement text must not be empty";
      return;
    }
    try {
      await this.deps.api.createRule({
        scope: { type: scopeType as "domain" | "category" | "app", value: scopeValue },
        action:
          actionType === "replace"
            ? { type: "replace", replacement: replacement.trim() }
            : { type: actionType as "block" | "remove" },
      });
      await this.refresh();
      this.deps.toast("rule added");
    } catch (err) {
      errorEl.textContent = (err as Error).message;
    }
  }

  async refresh(): Promise<void> {
    this.rules = await this.deps.api.rules();
    this.render();
  }

  render(): void {
    this.listEl.textContent = "";
    for (const rule of this.rules) {
      const li = document.createElement("li");
      li.dataset.ruleId = rule.rule_id;
      const label = document.createElement("span");
      label.textContent = `${rule.rule_id}: ${describeRule(rule)}`;
      if (!rule.enabled) label.className = "disabled";
      const toggle = document.createElement("button");
      toggle.textContent = rule.enabled ? "Disable" : "Enable";
      toggle.dataset.role = "toggle";
      toggle.addEventListener("click", async () => {
        try {
          await this.deps.api.setRuleEnabled(rule.rule_id, !rule.enabled);
          await this.refresh();
        } catch (err) {
          this.deps.toast(`toggle failed: ${(err as Error).message}`);
        }
      });
      const remove = document.createElement("button");
      remove.textContent = "Delete";
      remove.dataset.role = "delete";
      remove.addEventListener("click", async () => {
        try {
          await this.deps.api.deleteRule(rule.rule_id);
          await this.refresh();
        } catch (err) {
          this.deps.toast(`delete failed: ${(err as Error).message}`);
        }
      });
      li.append(label, toggle, remove);
      this.listEl.appendChild(li);
    }
  }
}
