"""Engine: configuration, stores, and the ingest/label/retrain orchestration
behind both the CLI and the HTTP service."""
from __future__ import annotations

import itertools
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .extractor import SuspiciousKeyTable
from .features import FeatureVocabulary, VocabularyConfig
from .flows import Flow, GroundTruthLabel, Os, parse_flow_record
from .registry import (
    ClassifierKey,
    Feedback,
    FlowStore,
    Metrics,
    ModelBundle,
    PredictionRecord,
    Registry,
    RegistryConfig,
)
from .rewriter import RewriteOutcome, RewriteRule, rewrite
from .tokenizer import TokenizerConfig, flow_text, prepare_flow
from .tree import TrainConfig, tree_from_json, tree_to_json


@dataclass
class EngineConfig:
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)
    vocabulary: VocabularyConfig = field(default_factory=VocabularyConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    registry: RegistryConfig = field(default_factory=RegistryConfig)
    extractor_threshold: float = 0.2
    retrain_schedule: str = "manual"  # manual | daily | weekly
    storage_dir: Optional[str] = None
    auth_token: Optional[str] = None

    def __post_init__(self):
        if self.retrain_schedule not in ("manual", "daily", "weekly"):
            raise ValueError("retrain_schedule must be manual, daily or weekly")

    def to_json(self) -> dict:
        return {
            "tokenizer": {
                "lowercase": self.tokenizer.lowercase,
                "hard_delimiters": "".join(sorted(self.tokenizer.hard_delimiters)),
                "ambiguous_delimiters": "".join(sorted(self.tokenizer.ambiguous_delimiters)),
            },
            "vocabulary": {
                "min_word_frequency": self.vocabulary.min_word_frequency,
                "stopword_tfidf_percentile": self.vocabulary.stopword_tfidf_percentile,
                "max_features": self.vocabulary.max_features,
            },
            "train": {
                "min_leaf_samples": self.train.min_leaf_samples,
                "pruning_confidence": self.train.pruning_confidence,
                "rng_seed": self.train.rng_seed,
            },
            "registry": {
                "pdao_min_samples": self.registry.pdao_min_samples,
                "pdao_min_positive": self.registry.pdao_min_positive,
                "general_negative_sampling": self.registry.general_negative_sampling,
                "kfold_k": self.registry.kfold_k,
                "rng_seed": self.registry.rng_seed,
            },
            "extractor_threshold": self.extractor_threshold,
            "retrain_schedule": self.retrain_schedule,
            "storage_dir": self.storage_dir,
            "auth_token": self.auth_token,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EngineConfig":
        tok = dict(obj.get("tokenizer", {}))
        for field_name in ("hard_delimiters", "ambiguous_delimiters"):
            if field_name in tok:
                tok[field_name] = frozenset(tok[field_name])
        return cls(
            tokenizer=TokenizerConfig(**tok),
            vocabulary=VocabularyConfig(**obj.get("vocabulary", {})),
            train=TrainConfig(**obj.get("train", {})),
            registry=RegistryConfig(**obj.get("registry", {})),
            extractor_threshold=obj.get("extractor_threshold", 0.2),
            retrain_schedule=obj.get("retrain_schedule", "manual"),
            storage_dir=obj.get("storage_dir"),
            auth_token=obj.get("auth_token"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "EngineConfig":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class LabelSubmission:
    prediction_id: str
    verdict: str  # Correct | Wrong | Unknown
    user: str
    timestamp: int


VERDICTS = {"correct", "wrong", "unknown"}


class UnknownPrediction(KeyError):
    pass


class Engine:
    """Owns the registry, the historical flow store, predictions, labels and
    rules. Reads are lock-free on immutable snapshots; mutations serialize
    through one writer lock."""

    def __init__(self, config: EngineConfig | None = None):
        self.config = config or EngineConfig()
        self.registry = Registry(
            cfg=self.config.registry,
            vocab_cfg=self.config.vocabulary,
            train_cfg=self.config.train,
            tokenizer_cfg=self.config.tokenizer,
            extractor_threshold=self.config.extractor_threshold,
        )
        self.store = FlowStore()
        self.predictions: dict[str, PredictionRecord] = {}
        self.prediction_ids: list[str] = []
        self.outcomes: dict[str, dict] = {}
        self.rules: dict[str, RewriteRule] = {}
        self.labels: dict[tuple[str, str], LabelSubmission] = {}
        self._pending: dict[tuple[str, str], Feedback] = {}
        self.latest_metrics: dict = {}
        self._writer = threading.Lock()
        self._seq = itertools.count(1)
        self._corpus_dirty = False
        self._storage = Path(self.config.storage_dir) if self.config.storage_dir else None
        if self._storage:
            self._storage.mkdir(parents=True, exist_ok=True)
            rules_path = self._storage / "rules.jsonl"
            if rules_path.exists():
                from .rewriter import read_rules

                for rule in read_rules(rules_path.read_text(encoding="utf-8").splitlines()):
                    self.rules[rule.rule_id] = rule

    # -- corpus / training ---------------------------------------------------

    def load_corpus(self, flows: list[Flow], truths: dict[str, GroundTruthLabel]) -> None:
        with self._writer:
            for flow in flows:
                self.store.add(flow, truths.get(flow.flow_id))
            self._corpus_dirty = True

    def training_flows(self) -> list[Flow]:
        # flows without a truth entry (unlabeled ingest traffic) never train
        return [f for f in self.store.flows.values() if f.flow_id in self.store.truths]

    def train(self) -> list[str]:
        trained = self.registry.train_all(self.training_flows(), self.store.truths)
        self._corpus_dirty = False
        return [key.name for key in trained]

    def evaluate(self, k: Optional[int] = None) -> dict[str, dict]:
        results = self.registry.kfold_evaluate(self.training_flows(), self.store.truths, k)
        metrics = {key.name: m.to_json() for key, m in sorted(
            results.items(), key=lambda kv: kv[0].name)}
        if results:
            # "overall" accuracy both ways: pooled over flows, and averaged
            # over classifiers
            tp = sum(m.tp for m in results.values())
            tn = sum(m.tn for m in results.values())
            fp = sum(m.fp for m in results.values())
            fn = sum(m.fn for m in results.values())
            total = tp + tn + fp + fn
            metrics["_overall"] = {
                "flow_weighted_ccr": (tp + tn) / total if total else 0.0,
                "classifier_weighted_ccr": sum(m.ccr for m in results.values())
                / len(results),
                "n_classifiers": len(results),
                "n_flows": total,
            }
        self.latest_metrics = metrics
        return self.latest_metrics

    # -- ingest ---------------------------------------------------------------

    def ingest_line(self, line: str) -> tuple[PredictionRecord, RewriteOutcome]:
        flow = parse_flow_record(line)
        return self.ingest_flow(flow)

    def ingest_flow(self, flow: Flow) -> tuple[PredictionRecord, RewriteOutcome]:
        if flow.tokenized is None:
            prepare_flow(flow, self.config.tokenizer)
        prediction = self.registry.classify_flow(flow)
        outcome = rewrite(flow, prediction, list(self.rules.values()))
        with self._writer:
            prediction.prediction_id = f"p{next(self._seq):08d}"
            self.store.flows.setdefault(flow.flow_id, flow)
            self.predictions[prediction.prediction_id] = prediction
            self.prediction_ids.append(prediction.prediction_id)
            self.outcomes[prediction.prediction_id] = {
                "decision": outcome.decision.value,
                "applied_rules": outcome.applied_rules,
            }
            if self._storage:
                row = prediction.to_json()
                row["outcome"] = self.outcomes[prediction.prediction_id]
                with (self._storage / "predictions.jsonl").open("a", encoding="utf-8") as f:
                    f.write(json.dumps(row, separators=(",", ":")) + "\n")
        return prediction, outcome

    # -- labels / feedback ------------------------------------------------------

    def submit_label(self, submission: LabelSubmission) -> dict:
        verdict = submission.verdict.lower()
        if verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {submission.verdict!r}")
        prediction = self.predictions.get(submission.prediction_id)
        if prediction is None:
            raise UnknownPrediction(submission.prediction_id)
        flow = self.store.flows.get(prediction.flow_id)
        if flow is None:
            raise UnknownPrediction(prediction.flow_id)
        backfill = 0
        if verdict == "correct":
            backfill = self._count_backfill(flow, prediction)
        with self._writer:
            key = (submission.user, submission.prediction_id)
            self.labels[key] = submission  # one active verdict per (user, prediction)
            self._pending[key] = Feedback(
                flow_id=prediction.flow_id,
                verdict=verdict,
                extracted=list(prediction.extracted),
            )
        return {"ok": True, "backfill": backfill, "verdict": verdict}

    def _count_backfill(self, flow: Flow, prediction: PredictionRecord) -> int:
        count = 0
        values = {e.value for e in prediction.extracted}
        for other in self.store.flows.values():
            if other.flow_id == flow.flow_id:
                continue
            if other.domain != flow.domain or other.os != flow.os:
                continue
            text = flow_text(other)
            if any(value in text for value in values):
                count += 1
        return count

    def retrain(self) -> dict:
        """Apply accumulated feedback, then rebuild anything the corpus made
        stale. With nothing pending and a clean corpus this is a no-op."""
        with self._writer:
            pending = list(self._pending.values())
            self._pending.clear()
        if not pending and not self._corpus_dirty:
            return {"retrained": [], "backfilled": 0, "deltas": {}}
        report = self.registry.apply_feedback(pending, self.store)
        if self._corpus_dirty:
            trained = self.registry.train_all(self.training_flows(), self.store.truths)
            report = dict(report)
            report["retrained"] = sorted(
                set(report["retrained"]) | {key.name for key in trained})
            self._corpus_dirty = False
        return report

    # -- rules -----------------------------------------------------------------

    def add_rule(self, rule: RewriteRule) -> RewriteRule:
        with self._writer:
            if not rule.rule_id:
                rule.rule_id = f"r{next(self._seq):06d}"
            if rule.rule_id in self.rules:
                raise ValueError(f"rule {rule.rule_id!r} already exists")
            self.rules[rule.rule_id] = rule
            self._persist_rules()
        return rule

    def delete_rule(self, rule_id: str) -> bool:
        with self._writer:
            existed = self.rules.pop(rule_id, None) is not None
            if existed:
                self._persist_rules()
            return existed

    def set_rule_enabled(self, rule_id: str, enabled: bool) -> RewriteRule:
        with self._writer:
            rule = self.rules[rule_id]
            rule.enabled = enabled
            self._persist_rules()
            return rule

    def _persist_rules(self) -> None:
        if not self._storage:
            return
        from .rewriter import serialize_rule

        lines = [serialize_rule(rule) for rule in self.rules.values()]
        (self._storage / "rules.jsonl").write_text(
            "\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")

    # -- queries -----------------------------------------------------------------

    def leaks(self, since: Optional[int] = None, domain: Optional[str] = None,
              pii: Optional[str] = None, offset: int = 0,
              limit: int = 100) -> tuple[list[dict], int]:
        wanted = pii.lower() if pii else None
        rows = []
        for pid in self.prediction_ids:
            record = self.predictions[pid]
            if not record.positive:
                continue
            if since is not None and record.timestamp < since:
                continue
            flow = self.store.flows.get(record.flow_id)
            if domain and (flow is None or flow.domain != domain.lower()):
                continue
            if wanted and not any(
                wanted in (e.pii.category.value.lower(), e.pii.kind.value.lower())
                for e in record.extracted
            ):
                continue
            row = record.to_json()
            if flow is not None:
                row["domain"] = flow.domain
                row["app"] = flow.app_id
                row["os"] = flow.os.value
            row["outcome"] = self.outcomes.get(pid, {})
            row["labels"] = [
                {"user": s.user, "verdict": s.verdict}
                for (user, spid), s in self.labels.items() if spid == pid
            ]
            rows.append(row)
        total = len(rows)
        return rows[offset : offset + limit], total

    def model_summaries(self) -> list[dict]:
        out = []
        for key, bundle in sorted(self.registry.models.items(), key=lambda kv: kv[0].name):
            out.append({
                "classifier": key.name,
                "domain": bundle.key.domain or None,
                "os": bundle.key.os.value if not bundle.key.is_general else None,
                "version": bundle.version,
                "vocab_size": len(bundle.vocab),
                "tree_depth": bundle.tree.depth(),
                "tree_leaves": bundle.tree.n_leaves(),
                "n_pos": bundle.tree.train_stats.get("n_pos"),
                "n_neg": bundle.tree.train_stats.get("n_neg"),
            })
        return out

    # -- model persistence -------------------------------------------------------

    def save_models(self, directory: str | Path) -> list[str]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for key, bundle in self.registry.models.items():
            name = "general" if key.is_general else f"{key.domain}__{key.os.value}"
            payload = {
                "classifier": key.name,
                "domain": key.domain or None,
                "os": None if key.is_general else key.os.value,
                "version": bundle.version,
                "seed": bundle.seed,
                "vocabulary": bundle.vocab.to_json(),
                "tree": tree_to_json(bundle.tree),
                "keys_seen": sorted(bundle.keys_seen),
                "positive_types": [
                    {"category": c, "kind": k}
                    for c, k in sorted(p.to_names() for p in bundle.positive_types)
                ],
            }
            path = directory / f"{name}.json"
            path.write_text(json.dumps(payload, indent=1), encoding="utf-8")
            written.append(str(path))
        table_path = directory / "suspicious_keys.json"
        table_path.write_text(json.dumps(self.registry.table.to_json(), indent=1),
                              encoding="utf-8")
        written.append(str(table_path))
        return written

    def load_models(self, directory: str | Path) -> int:
        from .pii import PiiType

        directory = Path(directory)
        models: dict[ClassifierKey, ModelBundle] = {}
        table = None
        for path in sorted(directory.glob("*.json")):
            if path.name == "suspicious_keys.json":
                table = SuspiciousKeyTable.from_json(
                    json.loads(path.read_text(encoding="utf-8")))
                continue
            obj = json.loads(path.read_text(encoding="utf-8"))
            key = ClassifierKey() if not obj.get("domain") else ClassifierKey(
                obj["domain"], Os(obj["os"]))
            models[key] = ModelBundle(
                key=key,
                vocab=FeatureVocabulary.from_json(obj["vocabulary"]),
                tree=tree_from_json(obj["tree"]),
                version=obj.get("version", 1),
                seed=obj.get("seed", 0),
                keys_seen=frozenset(obj.get("keys_seen", [])),
                positive_types=frozenset(
                    PiiType.from_names(p["category"], p["kind"])
                    for p in obj.get("positive_types", [])
                ),
            )
        self.registry.publish(models, table)
        return len(models)


def now_ms() -> int:
    return int(time.time() * 1000)
