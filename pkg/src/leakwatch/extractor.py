"""Locating the leaking key/value pairs inside a flow flagged as a leak.

Two signals: a per-(PII type, key) probability table learned from labeled
flows, and the root words of the trained decision trees, which are injected
with a large probability. Structural validators veto value shapes that cannot
possibly be the claimed PII kind.
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .features import key_words
from .flows import Flow, GroundTruthLabel, Span
from .pii import PiiKind, PiiType

DEFAULT_THRESHOLD = 0.2
DEFAULT_ROOT_BONUS = 1.0

_MAC_RE = re.compile(r"^[0-9A-Fa-f]{2}([:-][0-9A-Fa-f]{2}){5}$")


@dataclass
class Extraction:
    pii: PiiType
    key: str
    value: str
    span: Span


@dataclass
class SuspiciousKeyTable:
    entries: dict[tuple[PiiType, str], float] = field(default_factory=dict)
    counts: dict[tuple[PiiType, str], tuple[int, int]] = field(default_factory=dict)
    threshold: float = DEFAULT_THRESHOLD
    root_bonus_p: float = DEFAULT_ROOT_BONUS

    def probability(self, pii: PiiType, key: str) -> float:
        return self.entries.get((pii, key), 0.0)

    def suspicious_types(self, key: str) -> list[tuple[PiiType, float]]:
        """Candidate PII types for a key, highest probability first.

        Ties (typically several root-injected entries at the bonus value) fall
        back to the observed count-based probability, so evidence decides the
        type while the bonus still decides suspicion."""
        out = [
            (pii, p)
            for (pii, entry_key), p in self.entries.items()
            if entry_key == key and p > self.threshold
        ]

        def observed(pii: PiiType) -> float:
            k_pii, k_all = self.counts.get((pii, key), (0, 0))
            return k_pii / k_all if k_all else 0.0

        out.sort(key=lambda item: (-item[1], -observed(item[0]), item[0].kind.value))
        return out

    def to_json(self) -> dict:
        rows = []
        for (pii, key), p in sorted(
            self.entries.items(), key=lambda kv: (kv[0][1], kv[0][0].kind.value)
        ):
            category, kind = pii.to_names()
            k_pii, k_all = self.counts.get((pii, key), (0, 0))
            rows.append(
                {"category": category, "kind": kind, "key": key, "p": p,
                 "k_pii": k_pii, "k_all": k_all}
            )
        return {"threshold": self.threshold, "root_bonus_p": self.root_bonus_p,
                "entries": rows}

    @classmethod
    def from_json(cls, obj: dict) -> "SuspiciousKeyTable":
        table = cls(threshold=obj.get("threshold", DEFAULT_THRESHOLD),
                    root_bonus_p=obj.get("root_bonus_p", DEFAULT_ROOT_BONUS))
        for row in obj.get("entries", []):
            pii = PiiType.from_names(row["category"], row["kind"])
            table.entries[(pii, row["key"])] = row["p"]
            table.counts[(pii, row["key"])] = (row.get("k_pii", 0), row.get("k_all", 0))
        return table


def build_table(
    flows: Iterable[Flow],
    truths: dict[str, GroundTruthLabel],
    threshold: float = DEFAULT_THRESHOLD,
) -> SuspiciousKeyTable:
    """Count, for every (PII type, key), how often the key carried that type's
    leaked value versus how often the key appears at all."""
    key_flow_count: Counter = Counter()
    pii_key_count: Counter = Counter()
    for flow in flows:
        keys_here = {pair.key for pair in flow.kv_pairs if pair.key}
        for key in keys_here:
            key_flow_count[key] += 1
        truth = truths.get(flow.flow_id)
        if not truth:
            continue
        seen: set[tuple[PiiType, str]] = set()
        for pii, value in truth.leaks:
            for pair in flow.kv_pairs:
                if pair.key and value in pair.value:
                    seen.add((pii, pair.key))
        for item in seen:
            pii_key_count[item] += 1

    table = SuspiciousKeyTable(threshold=threshold)
    for (pii, key), k_pii in pii_key_count.items():
        k_all = key_flow_count[key]
        table.entries[(pii, key)] = k_pii / k_all
        table.counts[(pii, key)] = (k_pii, k_all)
    return table


def augment_with_roots(
    table: SuspiciousKeyTable,
    classifier_roots: Iterable[tuple[Optional[str], set[str], set[PiiType]]],
) -> SuspiciousKeyTable:
    """Give tree-root words a large probability.

    Takes (root_word, keys_seen, positive_pii_types) per classifier; a root is
    only inserted when it names a key actually observed in that classifier's
    flows, for the PII types its positive training flows exhibited.
    """
    for root, keys_seen, positive_types in classifier_roots:
        if not root:
            continue
        for key in keys_seen:
            if root == key.lower() or root in key_words(key):
                for pii in positive_types:
                    existing = table.entries.get((pii, key), 0.0)
                    table.entries[(pii, key)] = max(existing, table.root_bonus_p)
                    if (pii, key) not in table.counts:
                        table.counts[(pii, key)] = (0, 0)
    return table


# ---------------------------------------------------------------------------
# structural validators
# ---------------------------------------------------------------------------

def _valid_gps(value: str) -> bool:
    parts = value.split(",")
    if len(parts) != 2:
        return False
    try:
        float(parts[0])
        float(parts[1])
    except ValueError:
        return False
    return True


_VALIDATORS: dict[PiiKind, Callable[[str], bool]] = {
    PiiKind.IMEI: lambda v: v.isdigit() and 14 <= len(v) <= 16,
    PiiKind.EMAIL_ADDRESS: lambda v: "@" in v,
    PiiKind.GPS_COORDINATE: _valid_gps,
    PiiKind.MAC_ADDRESS: lambda v: bool(_MAC_RE.match(v)),
}


def validates(pii: PiiType, value: str) -> bool:
    check = _VALIDATORS.get(pii.kind)
    return check(value) if check else True


def extract(flow: Flow, table: SuspiciousKeyTable) -> list[Extraction]:
    """Pairs whose key is suspicious for some PII type; per pair the highest-P
    type that survives structural validation wins. May be empty, in which case
    the caller flags the prediction unextracted."""
    out: list[Extraction] = []
    for pair in flow.kv_pairs:
        if not pair.key:
            continue
        for pii, _p in table.suspicious_types(pair.key):
            if validates(pii, pair.value):
                out.append(Extraction(pii=pii, key=pair.key, value=pair.value,
                                      span=pair.value_span))
                break
    return out


# ---------------------------------------------------------------------------
# naive equal-key baseline (evaluation foil; no probabilities, no validators)
# ---------------------------------------------------------------------------

def build_naive_key_map(
    flows: Iterable[Flow], truths: dict[str, GroundTruthLabel]
) -> dict[str, PiiType]:
    """Every key seen in a leaking flow, typed by the most common leak type
    observed alongside it."""
    votes: dict[str, Counter] = {}
    for flow in flows:
        truth = truths.get(flow.flow_id)
        if not truth or not truth.leaks:
            continue
        for pair in flow.kv_pairs:
            if not pair.key:
                continue
            counter = votes.setdefault(pair.key, Counter())
            for pii, _value in truth.leaks:
                counter[pii] += 1
    out = {}
    for key, counter in votes.items():
        best = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0].kind.value))[0][0]
        out[key] = best
    return out


def naive_extract(flow: Flow, key_map: dict[str, PiiType]) -> list[Extraction]:
    return [
        Extraction(pii=key_map[pair.key], key=pair.key, value=pair.value,
                   span=pair.value_span)
        for pair in flow.kv_pairs
        if pair.key in key_map
    ]


# ---------------------------------------------------------------------------
# extraction accuracy
# ---------------------------------------------------------------------------

@dataclass
class ExtractionScore:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def fp_rate(self) -> float:
        return self.fp / (self.tp + self.fp) if (self.tp + self.fp) else 0.0

    @property
    def fn_rate(self) -> float:
        return self.fn / (self.tp + self.fn) if (self.tp + self.fn) else 0.0


def score_extraction(
    flows: Iterable[Flow],
    truths: dict[str, GroundTruthLabel],
    extract_fn: Callable[[Flow], list[Extraction]],
) -> ExtractionScore:
    """Compare extracted (type, value) sets against ground truth over all
    flows that actually leak."""
    score = ExtractionScore()
    for flow in flows:
        truth = truths.get(flow.flow_id)
        if not truth or not truth.leaks:
            continue
        got = {(e.pii, e.value) for e in extract_fn(flow)}
        want = {(pii, value) for pii, value in truth.leaks}
        score.tp += len(got & want)
        score.fp += len(got - want)
        score.fn += len(want - got)
    return score
