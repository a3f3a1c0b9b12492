"""Feature pipeline: PII randomization, rare-leak oversampling, vocabulary
selection (frequency threshold + tf-idf stop words), and binary vectorization.
"""
from __future__ import annotations

import hashlib
import logging
import math
import random
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .flows import Flow, GroundTruthLabel, extract_kv_pairs
from .tokenizer import TokenizerConfig, tokenize, tokenize_text

log = logging.getLogger(__name__)

_HEX_CHARS = "0123456789abcdef"
_DIGITS = "0123456789"
_LOWER = "abcdefghijklmnopqrstuvwxyz"
_UPPER = _LOWER.upper()


@dataclass
class VocabularyConfig:
    min_word_frequency: int = 21
    stopword_tfidf_percentile: float = 0.10
    max_features: Optional[int] = 250

    def __post_init__(self):
        if self.min_word_frequency < 1:
            raise ValueError("min_word_frequency must be >= 1")
        if not 0 < self.stopword_tfidf_percentile <= 1:
            raise ValueError("stopword_tfidf_percentile must be in (0, 1]")


@dataclass
class FeatureVocabulary:
    words: list[str]
    frequencies: dict[str, int]
    stopwords: set[str]
    config: VocabularyConfig = field(default_factory=VocabularyConfig)

    def __post_init__(self):
        self._index = {word: i for i, word in enumerate(self.words)}

    def __len__(self) -> int:
        return len(self.words)

    @property
    def vocab_hash(self) -> str:
        digest = hashlib.sha256("\n".join(self.words).encode("utf-8"))
        return digest.hexdigest()[:16]

    def index_of(self, word: str) -> Optional[int]:
        return self._index.get(word)

    def to_json(self) -> dict:
        return {
            "words": list(self.words),
            "stopwords": sorted(self.stopwords),
            "config": {
                "min_word_frequency": self.config.min_word_frequency,
                "stopword_tfidf_percentile": self.config.stopword_tfidf_percentile,
                "max_features": self.config.max_features,
            },
            "frequencies": {w: self.frequencies.get(w, 0) for w in self.words},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureVocabulary":
        cfg = VocabularyConfig(**obj.get("config", {}))
        return cls(
            words=list(obj["words"]),
            frequencies={k: int(v) for k, v in obj.get("frequencies", {}).items()},
            stopwords=set(obj.get("stopwords", [])),
            config=cfg,
        )


@dataclass
class FeatureVector:
    bits: np.ndarray  # uint8, one per vocabulary word

    def __len__(self) -> int:
        return len(self.bits)


@dataclass
class TrainingSet:
    vectors: list[FeatureVector]
    labels: list[bool]
    provenance: list[str]

    def __post_init__(self):
        if not (len(self.vectors) == len(self.labels) == len(self.provenance)):
            raise ValueError("vectors, labels and provenance must be parallel lists")

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.vectors:
            return np.zeros((0, 0), dtype=np.uint8), np.zeros(0, dtype=bool)
        x = np.stack([v.bits for v in self.vectors])
        y = np.asarray(self.labels, dtype=bool)
        return x, y


# ---------------------------------------------------------------------------
# PII value randomization
# ---------------------------------------------------------------------------

def randomized_value(value: str, rng: random.Random) -> str:
    """Random stand-in of identical length and character class.

    All-digit values stay digits, all-hex values stay hex; in mixed values each
    alphanumeric character is redrawn within its own class and punctuation
    (dots, dashes, '@', ':') keeps its position.
    """
    if value.isdigit():
        return "".join(rng.choice(_DIGITS) for _ in value)
    if all(c in "0123456789abcdefABCDEF" for c in value):
        out = []
        for c in value:
            pick = rng.choice(_HEX_CHARS)
            out.append(pick.upper() if c.isalpha() and c.isupper() else pick)
        return "".join(out)
    out = []
    for c in value:
        if c.isdigit():
            out.append(rng.choice(_DIGITS))
        elif c.isalpha() and c.isascii():
            out.append(rng.choice(_UPPER if c.isupper() else _LOWER))
        else:
            out.append(c)
    return "".join(out)


def _replace_in_flow(flow: Flow, old: str, new: str,
                     tokenizer_cfg: TokenizerConfig | None) -> tuple[Flow, bool]:
    """Replace all occurrences of a value; re-derives decoded text, kv pairs
    and tokens. Returns (flow, found)."""
    found = False
    path, query, text = flow.path, flow.query, flow.decoded_text
    headers = flow.headers
    if old in path:
        path = path.replace(old, new)
        found = True
    if old in query:
        query = query.replace(old, new)
        found = True
    if any(old in value for _, value in headers):
        headers = [(n, v.replace(old, new)) for n, v in headers]
        found = True
    if old in text:
        text = text.replace(old, new)
        found = True
    if not found:
        return flow, False
    clone = replace(
        flow,
        path=path,
        query=query,
        headers=headers,
        decoded_text=text,
        body=text.encode("utf-8"),
        content_encoding=None,
        kv_pairs=[],
        tokenized=None,
    )
    extract_kv_pairs(clone)
    tokenize(clone, tokenizer_cfg)
    return clone, True


def randomize_pii_values(
    flows: list[Flow],
    truths: dict[str, GroundTruthLabel],
    rng: random.Random,
    tokenizer_cfg: TokenizerConfig | None = None,
) -> tuple[list[Flow], dict[str, GroundTruthLabel]]:
    """Replace every ground-truth PII value with a random same-shape string.

    Returns new flows plus truths rewritten to the replacement values, so
    later pipeline stages can still locate the (randomized) leak in the flow.
    Flows whose truth value cannot be found are passed through with a warning.
    """
    out_flows: list[Flow] = []
    out_truths: dict[str, GroundTruthLabel] = {}
    for flow in flows:
        truth = truths.get(flow.flow_id)
        if not truth or not truth.leaks:
            out_flows.append(flow)
            if truth:
                out_truths[flow.flow_id] = truth
            continue
        current = flow
        new_leaks = []
        for pii, value in truth.leaks:
            fresh = randomized_value(value, rng)
            current, found = _replace_in_flow(current, value, fresh, tokenizer_cfg)
            if found:
                new_leaks.append((pii, fresh))
            else:
                log.warning("truth value for %s not found in flow %s; left unchanged",
                            pii, flow.flow_id)
                new_leaks.append((pii, value))
        out_flows.append(current)
        out_truths[flow.flow_id] = GroundTruthLabel(flow_id=flow.flow_id, leaks=new_leaks)
    return out_flows, out_truths


# ---------------------------------------------------------------------------
# oversampling
# ---------------------------------------------------------------------------

def key_words(key: str, cfg: TokenizerConfig | None = None) -> list[str]:
    """Words a kv key contributes to the flow text (last dotted-path segment)."""
    leaf = key.rsplit(".", 1)[-1]
    if not leaf:
        return []
    return list(tokenize_text("", leaf, cfg).ordered)


def _word_frequencies(flows: list[Flow]) -> Counter:
    freq: Counter = Counter()
    for flow in flows:
        for word, positions in flow.tokenized.word_positions.items():
            freq[word] += len(positions)
    return freq


def _leak_key_words(flow: Flow, truth: GroundTruthLabel,
                    cfg: TokenizerConfig | None) -> list[str]:
    words = []
    for pii, value in truth.leaks:
        for pair in flow.kv_pairs:
            if pair.key and value in pair.value:
                words.extend(key_words(pair.key, cfg))
    return words


def oversample_rare_leaks(
    flows: list[Flow],
    truths: dict[str, GroundTruthLabel],
    cfg: VocabularyConfig,
    rng: random.Random,
    tokenizer_cfg: TokenizerConfig | None = None,
) -> tuple[list[Flow], dict[str, GroundTruthLabel]]:
    """Duplicate positive flows (with fresh randomized PII) until each leak's
    key word clears the frequency filter. Negative flows are never duplicated.
    """
    threshold = cfg.min_word_frequency
    freq = _word_frequencies(flows)
    out_flows = list(flows)
    out_truths = dict(truths)
    for flow in flows:
        truth = truths.get(flow.flow_id)
        if not truth or not truth.leaks:
            continue
        in_flow = flow.tokenized.word_positions
        for word in _leak_key_words(flow, truth, tokenizer_cfg):
            if freq[word] >= threshold or word not in in_flow:
                continue
            gain = len(in_flow[word])
            needed = threshold + 1 - freq[word]
            n_dups = -(-needed // gain)  # ceil
            for i in range(n_dups):
                dup = replace(flow, flow_id=f"{flow.flow_id}~os{i}",
                              kv_pairs=list(flow.kv_pairs), tokenized=flow.tokenized)
                dup_truth = GroundTruthLabel(flow_id=dup.flow_id, leaks=list(truth.leaks))
                current = dup
                fresh_leaks = []
                for pii, value in dup_truth.leaks:
                    fresh = randomized_value(value, rng)
                    current, found = _replace_in_flow(current, value, fresh, tokenizer_cfg)
                    fresh_leaks.append((pii, fresh if found else value))
                current.flow_id = dup.flow_id
                out_flows.append(current)
                out_truths[current.flow_id] = GroundTruthLabel(
                    flow_id=current.flow_id, leaks=fresh_leaks)
                for dup_word, positions in current.tokenized.word_positions.items():
                    freq[dup_word] += len(positions)
    return out_flows, out_truths


# ---------------------------------------------------------------------------
# vocabulary selection
# ---------------------------------------------------------------------------

def _adjacent_words(flows: list[Flow], truths: dict[str, GroundTruthLabel],
                    tokenizer_cfg: TokenizerConfig | None) -> set[str]:
    """Words that appear next to a ground-truth PII value: the key of the
    pair carrying it, the value's own tokens, and the tokens on either side."""
    adjacent: set[str] = set()
    lowercase = tokenizer_cfg.lowercase if tokenizer_cfg else True
    for flow in flows:
        truth = truths.get(flow.flow_id)
        if not truth or not truth.leaks:
            continue
        ordered = flow.tokenized.ordered
        for pii, value in truth.leaks:
            value_tokens = set(tokenize_text("", value, tokenizer_cfg).ordered)
            whole = value.lower() if lowercase else value
            value_tokens.add(whole)
            for i, token in enumerate(ordered):
                if token in value_tokens:
                    adjacent.add(token)
                    if i > 0:
                        adjacent.add(ordered[i - 1])
                    if i + 1 < len(ordered):
                        adjacent.add(ordered[i + 1])
            for pair in flow.kv_pairs:
                if pair.key and value in pair.value:
                    adjacent.update(key_words(pair.key, tokenizer_cfg))
    return adjacent


def build_vocabulary(
    flows: list[Flow],
    truths: dict[str, GroundTruthLabel],
    cfg: VocabularyConfig | None = None,
    tokenizer_cfg: TokenizerConfig | None = None,
) -> FeatureVocabulary:
    """Select feature words: frequency threshold, then tf-idf stop-word removal
    (words that never sat next to a leak), then an optional feature cap."""
    cfg = cfg or VocabularyConfig()
    if not flows:
        return FeatureVocabulary(words=[], frequencies={}, stopwords=set(), config=cfg)

    freq = _word_frequencies(flows)
    n_flows = len(flows)
    df: Counter = Counter()
    for flow in flows:
        for word in flow.tokenized.words:
            df[word] += 1

    kept = [w for w, c in freq.items() if c >= cfg.min_word_frequency]
    tfidf = {w: freq[w] * math.log(n_flows / df[w]) for w in kept}

    adjacent = _adjacent_words(flows, truths, tokenizer_cfg)
    by_tfidf = sorted(kept, key=lambda w: (tfidf[w], w))
    bottom_k = int(len(kept) * cfg.stopword_tfidf_percentile)
    stop_candidates = set(by_tfidf[:bottom_k])
    # a word in every flow has idf 0: no signal at all, always a candidate
    stop_candidates.update(w for w in kept if tfidf[w] == 0.0)
    stopwords = {w for w in stop_candidates if w not in adjacent}

    selected = [w for w in kept if w not in stopwords]
    if cfg.max_features is not None and len(selected) > cfg.max_features:
        selected = sorted(selected, key=lambda w: (-tfidf[w], w))[: cfg.max_features]
    selected.sort()
    return FeatureVocabulary(
        words=selected,
        frequencies={w: freq[w] for w in selected},
        stopwords=stopwords,
        config=cfg,
    )


def vectorize(flow: Flow, vocab: FeatureVocabulary) -> FeatureVector:
    bits = np.zeros(len(vocab), dtype=np.uint8)
    if flow.tokenized is not None:
        for word in flow.tokenized.words:
            idx = vocab.index_of(word)
            if idx is not None:
                bits[idx] = 1
    return FeatureVector(bits=bits)
