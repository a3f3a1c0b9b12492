"""User control policies: block a flow, or remove/substitute extracted PII.

Rewriting operates on the flow record's query and decoded body, at the byte
spans the extractor reported. The rewritten flow is re-derived (kv pairs,
tokens, Content-Length) so it can be serialized or re-classified directly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional

from .extractor import Extraction
from .flows import Flow, KvSource, Span, extract_kv_pairs
from .pii import PiiCategory, PiiType
from .registry import PredictionRecord
from .tokenizer import tokenize


class ScopeType(Enum):
    BY_CATEGORY = "category"
    BY_DOMAIN = "domain"
    BY_APP = "app"


class ActionType(Enum):
    BLOCK = "block"
    REMOVE = "remove"
    REPLACE = "replace"


_ACTION_ORDER = {ActionType.BLOCK: 0, ActionType.REMOVE: 1, ActionType.REPLACE: 2}


@dataclass
class RewriteRule:
    rule_id: str
    scope_type: ScopeType
    scope_value: str  # category name, domain, or app id
    action: ActionType
    replacement: str = ""
    pii_filter: Optional[PiiType] = None
    enabled: bool = True
    created_by: str = ""

    def __post_init__(self):
        if self.action is ActionType.REPLACE and not self.replacement:
            raise ValueError("replace rules need a non-empty replacement")
        if self.scope_type is ScopeType.BY_CATEGORY:
            PiiCategory(self.scope_value)  # raises on unknown category names

    def to_json(self) -> dict:
        pii = None
        if self.pii_filter is not None:
            category, kind = self.pii_filter.to_names()
            pii = {"category": category, "kind": kind}
        return {
            "rule_id": self.rule_id,
            "scope": {"type": self.scope_type.value, "value": self.scope_value},
            "action": {
                "type": self.action.value,
                **({"replacement": self.replacement} if self.action is ActionType.REPLACE else {}),
            },
            "pii_filter": pii,
            "enabled": self.enabled,
            "created_by": self.created_by,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RewriteRule":
        pii = obj.get("pii_filter")
        return cls(
            rule_id=obj["rule_id"],
            scope_type=ScopeType(obj["scope"]["type"]),
            scope_value=obj["scope"]["value"],
            action=ActionType(obj["action"]["type"]),
            replacement=obj["action"].get("replacement", ""),
            pii_filter=PiiType.from_names(pii["category"], pii["kind"]) if pii else None,
            enabled=obj.get("enabled", True),
            created_by=obj.get("created_by", ""),
        )


class Decision(Enum):
    PASS = "pass"
    BLOCKED = "blocked"
    MODIFIED = "modified"


@dataclass
class RewriteOutcome:
    decision: Decision
    modified_flow: Optional[Flow] = None
    applied_rules: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.decision is Decision.MODIFIED and self.modified_flow is None:
            raise ValueError("modified outcomes carry the modified flow")
        if self.decision is Decision.BLOCKED and self.modified_flow is not None:
            raise ValueError("blocked outcomes carry no flow")


def _scope_matches(rule: RewriteRule, flow: Flow, categories: set[PiiCategory]) -> bool:
    if rule.scope_type is ScopeType.BY_DOMAIN:
        return rule.scope_value.lower() == flow.domain
    if rule.scope_type is ScopeType.BY_APP:
        return bool(flow.app_id) and rule.scope_value == flow.app_id
    return PiiCategory(rule.scope_value) in categories


def match_rules(prediction: PredictionRecord, flow: Flow,
                rules: Iterable[RewriteRule]) -> list[RewriteRule]:
    """Enabled rules whose scope and PII filter match the prediction, ordered
    Block first, then Remove, then Replace, then by rule id."""
    categories = {e.pii.category for e in prediction.extracted}
    types = {e.pii for e in prediction.extracted}
    matched = [
        rule for rule in rules
        if rule.enabled
        and _scope_matches(rule, flow, categories)
        and (rule.pii_filter is None or rule.pii_filter in types)
    ]
    matched.sort(key=lambda r: (_ACTION_ORDER[r.action], r.rule_id))
    return matched


def _rule_for(extraction: Extraction, matched: list[RewriteRule]) -> Optional[RewriteRule]:
    for rule in matched:
        if rule.pii_filter is not None and rule.pii_filter != extraction.pii:
            continue
        if rule.scope_type is ScopeType.BY_CATEGORY and \
                PiiCategory(rule.scope_value) != extraction.pii.category:
            continue
        return rule
    return None


@dataclass
class _Edit:
    span: Span
    data: bytes
    rule_id: str


def rewrite(flow: Flow, prediction: PredictionRecord,
            rules: Iterable[RewriteRule]) -> RewriteOutcome:
    """Apply matching rules to the flow's extracted spans.

    A matching Block rule wins outright. Remove drops the whole key=value unit
    for query/form pairs (bare value elsewhere, keeping the structure valid);
    Replace substitutes the replacement text. Overlapping spans are resolved
    leftmost-longest.
    """
    if not prediction.positive or not prediction.extracted:
        return RewriteOutcome(decision=Decision.PASS)
    matched = match_rules(prediction, flow, rules)
    if not matched:
        return RewriteOutcome(decision=Decision.PASS)
    if matched[0].action is ActionType.BLOCK:
        return RewriteOutcome(decision=Decision.BLOCKED, applied_rules=[matched[0].rule_id])

    pair_by_span = {pair.value_span: pair for pair in flow.kv_pairs}
    edits: list[_Edit] = []
    for extraction in prediction.extracted:
        rule = _rule_for(extraction, matched)
        if rule is None:
            continue
        if rule.action is ActionType.REPLACE:
            edits.append(_Edit(extraction.span, rule.replacement.encode("utf-8"), rule.rule_id))
        else:  # remove
            pair = pair_by_span.get(extraction.span)
            if pair is not None and pair.pair_span is not None and \
                    pair.source in (KvSource.QUERY_PARAM, KvSource.FORM_BODY):
                edits.append(_Edit(_with_separator(flow, pair.pair_span), b"", rule.rule_id))
            else:
                edits.append(_Edit(extraction.span, b"", rule.rule_id))

    edits = _drop_overlaps(edits)
    if not edits:
        return RewriteOutcome(decision=Decision.PASS)

    query_bytes = flow.query.encode("utf-8")
    body_bytes = flow.decoded_text.encode("utf-8")
    boundary = len(query_bytes)
    applied: list[str] = []
    body_changed = False
    # apply right-to-left so earlier offsets stay valid
    for edit in sorted(edits, key=lambda e: e.span.offset, reverse=True):
        if edit.span.offset >= boundary:
            off = edit.span.offset - boundary
            body_bytes = body_bytes[:off] + edit.data + body_bytes[off + edit.span.length:]
            body_changed = True
        else:
            query_bytes = (query_bytes[: edit.span.offset] + edit.data
                           + query_bytes[edit.span.offset + edit.span.length:])
        applied.append(edit.rule_id)
    applied = sorted(set(applied))

    new_query = query_bytes.decode("utf-8")
    new_text = body_bytes.decode("utf-8")
    if new_query == flow.query and new_text == flow.decoded_text:
        return RewriteOutcome(decision=Decision.PASS)

    headers = flow.headers
    if body_changed:
        headers = _set_content_length(headers, len(body_bytes))
    out = replace(
        flow,
        query=new_query,
        decoded_text=new_text,
        body=body_bytes,
        content_encoding=None,
        headers=headers,
        kv_pairs=[],
        tokenized=None,
    )
    extract_kv_pairs(out)
    tokenize(out)
    return RewriteOutcome(decision=Decision.MODIFIED, modified_flow=out, applied_rules=applied)


def _with_separator(flow: Flow, pair_span: Span) -> Span:
    """Grow a pair's span to swallow one adjacent '&' separator."""
    source = flow.kv_source_bytes
    start, end = pair_span.offset, pair_span.end
    if start > 0 and source[start - 1 : start] == b"&":
        return Span(start - 1, end - start + 1)
    if source[end : end + 1] == b"&":
        return Span(start, end - start + 1)
    return pair_span


def _drop_overlaps(edits: list[_Edit]) -> list[_Edit]:
    # leftmost-longest wins; conflicting later edits are dropped
    kept: list[_Edit] = []
    last_end = -1
    for edit in sorted(edits, key=lambda e: (e.span.offset, -e.span.length)):
        if edit.span.offset <= last_end:
            continue
        kept.append(edit)
        last_end = edit.span.end - 1
    return kept


def _set_content_length(headers: list[tuple[str, str]], length: int) -> list[tuple[str, str]]:
    out = []
    seen = False
    for name, value in headers:
        if name.lower() == "content-length":
            out.append((name, str(length)))
            seen = True
        else:
            out.append((name, value))
    if not seen:
        out.append(("Content-Length", str(length)))
    return out


def read_rules(lines: Iterable[str]) -> list[RewriteRule]:
    rules = []
    for line in lines:
        line = line.strip()
        if line:
            rules.append(RewriteRule.from_json(json.loads(line)))
    return rules


def serialize_rule(rule: RewriteRule) -> str:
    return json.dumps(rule.to_json(), separators=(",", ":"))
