import json
import time

import pytest

from leakwatch.engine import Engine, EngineConfig
from leakwatch.flows import Os
from leakwatch.rewriter import ActionType, RewriteRule, ScopeType
from leakwatch.service import start_retrain_scheduler
from leakwatch.synth import make_record
from leakwatch.tokenizer import TokenizerConfig


def test_engine_config_json_round_trip(tmp_path):
    config = EngineConfig(retrain_schedule="weekly", auth_token="t0k",
                          storage_dir=str(tmp_path / "store"))
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config.to_json()))
    again = EngineConfig.load(path)
    assert again.retrain_schedule == "weekly"
    assert again.auth_token == "t0k"
    assert again.tokenizer.hard_delimiters == TokenizerConfig().hard_delimiters
    assert again.vocabulary.min_word_frequency == 21
    assert again.registry.general_negative_sampling == 0.1
    assert again.extractor_threshold == 0.2


def test_engine_config_rejects_bad_schedule():
    with pytest.raises(ValueError):
        EngineConfig(retrain_schedule="hourly")


def test_rules_persist_across_engine_restart(tmp_path):
    storage = tmp_path / "store"
    engine = Engine(EngineConfig(storage_dir=str(storage)))
    engine.add_rule(RewriteRule(rule_id="keepme", scope_type=ScopeType.BY_DOMAIN,
                                scope_value="x.example", action=ActionType.BLOCK))
    engine.add_rule(RewriteRule(rule_id="dropme", scope_type=ScopeType.BY_DOMAIN,
                                scope_value="y.example", action=ActionType.REMOVE))
    engine.delete_rule("dropme")
    engine.set_rule_enabled("keepme", False)

    again = Engine(EngineConfig(storage_dir=str(storage)))
    assert list(again.rules) == ["keepme"]
    assert again.rules["keepme"].enabled is False


def test_predictions_appended_to_storage(tmp_path, small_corpus):
    flows, truths = small_corpus
    storage = tmp_path / "store"
    engine = Engine(EngineConfig(storage_dir=str(storage)))
    engine.load_corpus(list(flows), dict(truths))
    engine.train()
    line = make_record("st-1", "ads.tracknet.example", Os.ANDROID,
                       query_params=[("idfa", "c" * 32)], path="/2.0/ad",
                       app="TrackNetSDK")
    prediction, _ = engine.ingest_line(line)
    rows = [json.loads(l) for l in
            (storage / "predictions.jsonl").read_text().splitlines()]
    assert rows[-1]["prediction_id"] == prediction.prediction_id
    assert rows[-1]["outcome"]["decision"] == "pass"


def test_save_and_load_model_bundle_round_trip(trained_engine, tmp_path, small_corpus):
    flows, _truths = small_corpus
    written = trained_engine.save_models(tmp_path / "models")
    assert any(path.endswith("general.json") for path in written)
    assert any(path.endswith("suspicious_keys.json") for path in written)

    fresh = Engine(EngineConfig())
    n = fresh.load_models(tmp_path / "models")
    assert n == len(trained_engine.registry.models)
    for flow in flows[:40]:
        a = trained_engine.registry.classify_flow(flow)
        b = fresh.registry.classify_flow(flow)
        assert (a.positive, round(a.score, 12)) == (b.positive, round(b.score, 12))
        assert [e.key for e in a.extracted] == [e.key for e in b.extracted]


def test_overall_metrics_reported_both_ways(trained_engine):
    metrics = trained_engine.evaluate(k=5)
    overall = metrics["_overall"]
    assert 0.0 <= overall["flow_weighted_ccr"] <= 1.0
    assert 0.0 <= overall["classifier_weighted_ccr"] <= 1.0
    assert overall["n_classifiers"] == len(metrics) - 1


def test_retrain_scheduler_fires(small_corpus):
    flows, truths = small_corpus
    engine = Engine(EngineConfig(retrain_schedule="daily"))
    engine.load_corpus(list(flows), dict(truths))
    engine.train()
    # make the corpus dirty so a scheduled retrain has observable work
    engine.load_corpus([], {})
    versions_before = {k: b.version for k, b in engine.registry.models.items()}
    stop = start_retrain_scheduler(engine, interval_s=0.05)
    try:
        deadline = time.time() + 5
        while time.time() < deadline:
            versions_now = {k: b.version for k, b in engine.registry.models.items()}
            if versions_now != versions_before:
                break
            time.sleep(0.05)
        assert {k: b.version for k, b in engine.registry.models.items()} != versions_before
    finally:
        stop.set()


def test_manual_schedule_never_starts_a_thread(trained_engine):
    stop = start_retrain_scheduler(trained_engine)
    assert stop.is_set()
