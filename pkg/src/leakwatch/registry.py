"""Per-domain-and-OS classifier registry.

One classifier per (destination domain, OS) pair that has enough labeled
samples; everything else falls through to a general classifier trained across
the leftover flows with negatives undersampled. Models are immutable bundles
swapped atomically, so classification can run concurrently with retraining.
"""
from __future__ import annotations

import hashlib
import random
import threading
import time
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .extractor import (
    Extraction,
    SuspiciousKeyTable,
    augment_with_roots,
    build_table,
    extract,
)
from .features import (
    FeatureVocabulary,
    TrainingSet,
    VocabularyConfig,
    build_vocabulary,
    oversample_rare_leaks,
    randomize_pii_values,
    vectorize,
)
from .flows import Flow, GroundTruthLabel, Os
from .pii import PiiType
from .tokenizer import TokenizerConfig, flow_text
from .tree import DecisionTree, TrainConfig, predict, root_word, train


@dataclass(frozen=True)
class ClassifierKey:
    domain: str = ""
    os: Os = Os.UNKNOWN

    @property
    def is_general(self) -> bool:
        return not self.domain

    @property
    def name(self) -> str:
        return "general" if self.is_general else f"{self.domain}|{self.os.value}"


GENERAL = ClassifierKey()


def pdao_key(domain: str, os: Os) -> ClassifierKey:
    if not domain or os is Os.UNKNOWN:
        raise ValueError("a per-domain-and-OS key needs a domain and a known OS")
    return ClassifierKey(domain=domain, os=os)


@dataclass
class RegistryConfig:
    pdao_min_samples: int = 101  # strictly more than 100 labeled flows
    pdao_min_positive: int = 1
    general_negative_sampling: float = 0.1
    kfold_k: int = 10
    rng_seed: int = 7

    def __post_init__(self):
        if not 0 < self.general_negative_sampling <= 1:
            raise ValueError("general_negative_sampling must be in (0, 1]")
        if self.kfold_k < 2:
            raise ValueError("kfold_k must be >= 2")


@dataclass
class Metrics:
    ccr: float
    auc: float
    fpr: float
    fnr: float
    tp: int
    tn: int
    fp: int
    fn: int
    predict_micros_mean: float = 0.0
    predict_micros_max: float = 0.0

    @classmethod
    def from_counts(cls, tp: int, tn: int, fp: int, fn: int,
                    scores: Optional[list[tuple[bool, float]]] = None,
                    micros: Optional[list[float]] = None) -> "Metrics":
        total = tp + tn + fp + fn
        return cls(
            ccr=(tn + tp) / total if total else 0.0,
            auc=roc_auc(scores) if scores else 0.5,
            fpr=fp / (fp + tn) if (fp + tn) else 0.0,
            fnr=fn / (fn + tp) if (fn + tp) else 0.0,
            tp=tp, tn=tn, fp=fp, fn=fn,
            predict_micros_mean=float(np.mean(micros)) if micros else 0.0,
            predict_micros_max=float(np.max(micros)) if micros else 0.0,
        )

    def to_json(self) -> dict:
        return {
            "ccr": self.ccr, "auc": self.auc, "fpr": self.fpr, "fnr": self.fnr,
            "tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn,
            "predict_micros_mean": self.predict_micros_mean,
            "predict_micros_max": self.predict_micros_max,
        }


def roc_auc(scored: list[tuple[bool, float]]) -> float:
    """Trapezoidal area under the ROC curve; ties are grouped so a constant
    score degenerates to the diagonal (0.5)."""
    n_pos = sum(1 for label, _ in scored if label)
    n_neg = len(scored) - n_pos
    if n_pos == 0 or n_neg == 0:
        return 0.5
    by_score: dict[float, list[int]] = defaultdict(lambda: [0, 0])
    for label, score in scored:
        by_score[score][0 if label else 1] += 1
    xs = [0.0]
    ys = [0.0]
    tp = fp = 0
    for score in sorted(by_score, reverse=True):
        tp += by_score[score][0]
        fp += by_score[score][1]
        xs.append(fp / n_neg)
        ys.append(tp / n_pos)
    return float(np.trapezoid(ys, xs))


@dataclass
class PredictionRecord:
    flow_id: str
    classifier_key: ClassifierKey
    positive: bool
    score: float
    extracted: list[Extraction]
    model_version: int
    prediction_id: Optional[str] = None
    predict_micros: float = 0.0
    unmodeled: bool = False
    unextracted: bool = False
    timestamp: int = 0

    def to_json(self) -> dict:
        items = []
        for e in self.extracted:
            category, kind = e.pii.to_names()
            items.append({
                "category": category, "kind": kind, "key": e.key, "value": e.value,
                "span": [e.span.offset, e.span.length],
            })
        return {
            "prediction_id": self.prediction_id,
            "flow_id": self.flow_id,
            "classifier": self.classifier_key.name,
            "positive": self.positive,
            "score": self.score,
            "extracted": items,
            "model_version": self.model_version,
            "predict_micros": self.predict_micros,
            "unmodeled": self.unmodeled,
            "unextracted": self.unextracted,
            "ts_ms": self.timestamp,
        }


@dataclass
class ModelBundle:
    """Everything needed to serve one classifier; immutable once published."""

    key: ClassifierKey
    vocab: FeatureVocabulary
    tree: DecisionTree
    version: int
    seed: int
    keys_seen: frozenset[str]
    positive_types: frozenset[PiiType]


def is_positive(flow_id: str, truths: dict[str, GroundTruthLabel]) -> bool:
    truth = truths.get(flow_id)
    return bool(truth and truth.leaks)


def corpus_stats(flows: Iterable[Flow],
                 truths: dict[str, GroundTruthLabel]) -> dict[tuple[str, Os], tuple[int, int]]:
    stats: dict[tuple[str, Os], list[int]] = defaultdict(lambda: [0, 0])
    for flow in flows:
        entry = stats[(flow.domain, flow.os)]
        entry[0] += 1
        if is_positive(flow.flow_id, truths):
            entry[1] += 1
    return {pair: (n, pos) for pair, (n, pos) in stats.items()}


def assign_classifier(flow: Flow, cfg: RegistryConfig,
                      stats: dict[tuple[str, Os], tuple[int, int]]) -> ClassifierKey:
    """PDAO key iff the (domain, OS) pair has enough labeled samples with at
    least one leak; otherwise the general classifier."""
    if not flow.domain or flow.os is Os.UNKNOWN:
        return GENERAL
    n, pos = stats.get((flow.domain, flow.os), (0, 0))
    if n >= cfg.pdao_min_samples and pos >= cfg.pdao_min_positive:
        return pdao_key(flow.domain, flow.os)
    return GENERAL


def _stable_seed(master: int, name: str, version: int) -> int:
    digest = hashlib.sha256(f"{master}:{name}:{version}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class Registry:
    """Read-mostly map of ClassifierKey -> ModelBundle plus the suspicious-key
    table; mutations publish replacement objects under a lock."""

    def __init__(self, cfg: RegistryConfig | None = None,
                 vocab_cfg: VocabularyConfig | None = None,
                 train_cfg: TrainConfig | None = None,
                 tokenizer_cfg: TokenizerConfig | None = None,
                 extractor_threshold: float = 0.2):
        self.cfg = cfg or RegistryConfig()
        self.vocab_cfg = vocab_cfg or VocabularyConfig()
        self.train_cfg = train_cfg or TrainConfig()
        self.tokenizer_cfg = tokenizer_cfg
        self.extractor_threshold = extractor_threshold
        self._models: dict[ClassifierKey, ModelBundle] = {}
        self._table = SuspiciousKeyTable(threshold=extractor_threshold)
        self._lock = threading.Lock()
        self._versions: Counter = Counter()

    # -- read side ---------------------------------------------------------

    @property
    def models(self) -> dict[ClassifierKey, ModelBundle]:
        return self._models

    @property
    def table(self) -> SuspiciousKeyTable:
        return self._table

    def publish(self, models: dict[ClassifierKey, ModelBundle],
                table: Optional[SuspiciousKeyTable] = None) -> None:
        """Swap in externally built bundles (e.g. loaded from disk)."""
        with self._lock:
            self._models = dict(models)
            for key, bundle in models.items():
                self._versions[key] = max(self._versions[key], bundle.version)
            if table is not None:
                self._table = table

    def bundle_for(self, flow: Flow) -> Optional[ModelBundle]:
        models = self._models
        if flow.domain and flow.os is not Os.UNKNOWN:
            bundle = models.get(ClassifierKey(flow.domain, flow.os))
            if bundle is not None:
                return bundle
        return models.get(GENERAL)

    def classify_flow(self, flow: Flow) -> PredictionRecord:
        """Dispatch, vectorize, predict, and (on a positive) extract; wall
        clock for predict+extract is recorded on the prediction."""
        bundle = self.bundle_for(flow)
        table = self._table
        started = time.perf_counter_ns()
        if bundle is None:
            return PredictionRecord(
                flow_id=flow.flow_id, classifier_key=GENERAL, positive=False,
                score=0.0, extracted=[], model_version=0, unmodeled=True,
                predict_micros=(time.perf_counter_ns() - started) / 1000.0,
                timestamp=flow.timestamp,
            )
        vector = vectorize(flow, bundle.vocab)
        positive, score = predict(bundle.tree, vector, bundle.vocab.vocab_hash)
        extracted = extract(flow, table) if positive else []
        micros = (time.perf_counter_ns() - started) / 1000.0
        return PredictionRecord(
            flow_id=flow.flow_id, classifier_key=bundle.key, positive=positive,
            score=score, extracted=extracted, model_version=bundle.version,
            predict_micros=micros, unextracted=positive and not extracted,
            timestamp=flow.timestamp,
        )

    # -- training ----------------------------------------------------------

    def _pipeline(self, flows: list[Flow], truths: dict[str, GroundTruthLabel],
                  rng: random.Random) -> tuple[FeatureVocabulary, TrainingSet]:
        flows_r, truths_r = randomize_pii_values(flows, truths, rng, self.tokenizer_cfg)
        flows_o, truths_o = oversample_rare_leaks(
            flows_r, truths_r, self.vocab_cfg, rng, self.tokenizer_cfg)
        vocab = build_vocabulary(flows_o, truths_o, self.vocab_cfg, self.tokenizer_cfg)
        vectors = [vectorize(f, vocab) for f in flows_o]
        labels = [is_positive(f.flow_id, truths_o) for f in flows_o]
        return vocab, TrainingSet(vectors, labels, [f.flow_id for f in flows_o])

    def _train_bundle(self, key: ClassifierKey, flows: list[Flow],
                      truths: dict[str, GroundTruthLabel], version: int) -> Optional[ModelBundle]:
        seed = _stable_seed(self.cfg.rng_seed, key.name, version)
        rng = random.Random(seed)
        if key.is_general:
            kept = [
                f for f in flows
                if is_positive(f.flow_id, truths)
                or rng.random() < self.cfg.general_negative_sampling
            ]
            flows = kept
        if not flows:
            return None
        vocab, training_set = self._pipeline(flows, truths, rng)
        tree = train(training_set, self.train_cfg, vocab)
        keys_seen = frozenset(
            pair.key for flow in flows for pair in flow.kv_pairs if pair.key)
        positive_types = frozenset(
            pii for flow in flows
            for pii, _v in (truths.get(flow.flow_id).leaks if truths.get(flow.flow_id) else [])
        )
        return ModelBundle(key=key, vocab=vocab, tree=tree, version=version,
                           seed=seed, keys_seen=keys_seen, positive_types=positive_types)

    def group_by_key(self, flows: list[Flow],
                     truths: dict[str, GroundTruthLabel]) -> dict[ClassifierKey, list[Flow]]:
        stats = corpus_stats(flows, truths)
        groups: dict[ClassifierKey, list[Flow]] = defaultdict(list)
        for flow in flows:
            groups[assign_classifier(flow, self.cfg, stats)].append(flow)
        return groups

    def train_all(self, flows: list[Flow], truths: dict[str, GroundTruthLabel],
                  keys: Optional[set[ClassifierKey]] = None) -> list[ClassifierKey]:
        """(Re)train every classifier, or just `keys`; publishes new bundles
        and a rebuilt suspicious-key table atomically. Returns trained keys."""
        groups = self.group_by_key(flows, truths)
        trained: list[ClassifierKey] = []
        new_models = dict(self._models)
        for key, key_flows in sorted(groups.items(), key=lambda kv: kv[0].name):
            if keys is not None and key not in keys:
                continue
            version = self._versions[key] + 1
            bundle = self._train_bundle(key, key_flows, truths, version)
            if bundle is None:
                continue
            new_models[key] = bundle
            self._versions[key] = version
            trained.append(key)
        # stale keys disappear when their flows no longer map to them
        if keys is None:
            new_models = {k: b for k, b in new_models.items() if k in groups}
        table = build_table(flows, truths, self.extractor_threshold)
        augment_with_roots(table, [
            (root_word(b.tree), set(b.keys_seen), set(b.positive_types))
            for b in new_models.values()
        ])
        with self._lock:
            self._models = new_models
            self._table = table
        return trained

    # -- evaluation --------------------------------------------------------

    def evaluate_bundle(self, bundle: ModelBundle, flows: list[Flow],
                        truths: dict[str, GroundTruthLabel]) -> Metrics:
        tp = tn = fp = fn = 0
        scored = []
        micros = []
        for flow in flows:
            started = time.perf_counter_ns()
            vector = vectorize(flow, bundle.vocab)
            positive, score = predict(bundle.tree, vector, bundle.vocab.vocab_hash)
            micros.append((time.perf_counter_ns() - started) / 1000.0)
            actual = is_positive(flow.flow_id, truths)
            scored.append((actual, score))
            if positive and actual:
                tp += 1
            elif positive:
                fp += 1
            elif actual:
                fn += 1
            else:
                tn += 1
        return Metrics.from_counts(tp, tn, fp, fn, scored, micros)

    def kfold_evaluate(self, flows: list[Flow], truths: dict[str, GroundTruthLabel],
                       k: Optional[int] = None) -> dict[ClassifierKey, Metrics]:
        """Stratified k-fold per classifier; aggregates confusion counts over
        the folds so each sample is tested exactly once."""
        k = k or self.cfg.kfold_k
        if k < 2:
            raise ValueError("k must be >= 2")
        out: dict[ClassifierKey, Metrics] = {}
        for key, key_flows in sorted(self.group_by_key(flows, truths).items(),
                                     key=lambda kv: kv[0].name):
            if len(key_flows) < k:
                continue
            out[key] = self._kfold_one(key, key_flows, truths, k)
        return out

    def make_folds(self, key_flows: list[Flow], truths: dict[str, GroundTruthLabel],
                   k: int, seed: int) -> list[list[int]]:
        """Stratified fold assignment (indices into key_flows). Falls back to
        leave-one-positive-out when positives are scarcer than k."""
        pos_idx = [i for i, f in enumerate(key_flows) if is_positive(f.flow_id, truths)]
        neg_idx = [i for i, f in enumerate(key_flows) if not is_positive(f.flow_id, truths)]
        rng = random.Random(seed)
        rng.shuffle(pos_idx)
        rng.shuffle(neg_idx)
        if 0 < len(pos_idx) < k:
            k = max(2, len(pos_idx))
        folds: list[list[int]] = [[] for _ in range(k)]
        for i, idx in enumerate(pos_idx):
            folds[i % k].append(idx)
        for i, idx in enumerate(neg_idx):
            folds[(len(pos_idx) + i) % k].append(idx)
        return folds

    def _kfold_one(self, key: ClassifierKey, key_flows: list[Flow],
                   truths: dict[str, GroundTruthLabel], k: int) -> Metrics:
        seed = _stable_seed(self.cfg.rng_seed, f"kfold:{key.name}", k)
        folds = self.make_folds(key_flows, truths, k, seed)
        tp = tn = fp = fn = 0
        scored = []
        micros = []
        for fold_no, test_idx in enumerate(folds):
            if not test_idx:
                continue
            test_set = set(test_idx)
            train_flows = [f for i, f in enumerate(key_flows) if i not in test_set]
            if not train_flows:
                continue
            version = 1000 * k + fold_no  # distinct rng stream per fold
            bundle = self._train_bundle(key, train_flows, truths, version)
            if bundle is None:
                continue
            for i in test_idx:
                flow = key_flows[i]
                started = time.perf_counter_ns()
                vector = vectorize(flow, bundle.vocab)
                positive, score = predict(bundle.tree, vector, bundle.vocab.vocab_hash)
                micros.append((time.perf_counter_ns() - started) / 1000.0)
                actual = is_positive(flow.flow_id, truths)
                scored.append((actual, score))
                if positive and actual:
                    tp += 1
                elif positive:
                    fp += 1
                elif actual:
                    fn += 1
                else:
                    tn += 1
        return Metrics.from_counts(tp, tn, fp, fn, scored, micros)

    # -- feedback ----------------------------------------------------------

    def apply_feedback(self, labels: list["Feedback"], store: "FlowStore") -> dict:
        """Fold user verdicts into the training corpus, backfill historical
        flows containing confirmed PII, retrain the affected classifiers, and
        report per-classifier FP/FN deltas on the stored flows."""
        if not labels:
            return {"retrained": [], "backfilled": 0, "deltas": {}}
        touched: set[str] = set()
        backfilled = 0
        for label in labels:
            flow = store.flows.get(label.flow_id)
            if flow is None:
                raise KeyError(f"label references unknown flow {label.flow_id!r}")
            if label.verdict == "correct" and label.extracted:
                for e in label.extracted:
                    backfilled += self._promote(store, flow, e.pii, e.value, touched)
            elif label.verdict == "wrong":
                store.truths[flow.flow_id] = GroundTruthLabel(flow_id=flow.flow_id, leaks=[])
                touched.add(flow.flow_id)

        # only flows with a truth entry train; unlabeled ingest traffic stays out
        labeled = [f for f in store.flows.values() if f.flow_id in store.truths]
        stats = corpus_stats(labeled, store.truths)
        affected: set[ClassifierKey] = set()
        for flow_id in touched:
            affected.add(assign_classifier(store.flows[flow_id], self.cfg, stats))

        before = {
            key: self.evaluate_bundle(self._models[key], flows, store.truths)
            for key, flows in self.group_by_key(labeled, store.truths).items()
            if key in affected and key in self._models
        }
        retrained = self.train_all(labeled, store.truths, keys=affected)
        after_groups = self.group_by_key(labeled, store.truths)
        deltas = {}
        for key in retrained:
            flows = after_groups.get(key, [])
            if key not in self._models or not flows:
                continue
            now = self.evaluate_bundle(self._models[key], flows, store.truths)
            prev = before.get(key)
            deltas[key.name] = {
                "fp_before": prev.fp if prev else None,
                "fp_after": now.fp,
                "fn_before": prev.fn if prev else None,
                "fn_after": now.fn,
            }
        return {
            "retrained": [key.name for key in retrained],
            "backfilled": backfilled,
            "deltas": deltas,
        }

    def _promote(self, store: "FlowStore", flow: Flow, pii: PiiType, value: str,
                 touched: set[str]) -> int:
        """Add the confirmed leak, then mine historical flows of the same
        (domain, OS) for the same value. Returns the number of backfills."""
        count = 0
        self._add_truth(store, flow.flow_id, pii, value)
        touched.add(flow.flow_id)
        for other in store.flows.values():
            if other.flow_id == flow.flow_id:
                continue
            if other.domain != flow.domain or other.os != flow.os:
                continue
            if value in flow_text(other):
                if self._add_truth(store, other.flow_id, pii, value):
                    count += 1
                touched.add(other.flow_id)
        return count

    @staticmethod
    def _add_truth(store: "FlowStore", flow_id: str, pii: PiiType, value: str) -> bool:
        truth = store.truths.get(flow_id)
        if truth is None:
            truth = GroundTruthLabel(flow_id=flow_id, leaks=[])
            store.truths[flow_id] = truth
        if (pii, value) in truth.leaks:
            return False
        truth.leaks.append((pii, value))
        return True


@dataclass
class Feedback:
    """A normalized user verdict on a prediction."""

    flow_id: str
    verdict: str  # correct | wrong | unknown
    extracted: list[Extraction] = field(default_factory=list)


@dataclass
class FlowStore:
    """Historical flows plus the evolving training truth."""

    flows: dict[str, Flow] = field(default_factory=dict)
    truths: dict[str, GroundTruthLabel] = field(default_factory=dict)

    def add(self, flow: Flow, truth: Optional[GroundTruthLabel] = None) -> None:
        self.flows[flow.flow_id] = flow
        if truth is not None:
            self.truths[flow.flow_id] = truth
