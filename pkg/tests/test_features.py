import random

import numpy as np
import pytest

from leakwatch.features import (
    FeatureVocabulary,
    VocabularyConfig,
    build_vocabulary,
    oversample_rare_leaks,
    randomize_pii_values,
    randomized_value,
    vectorize,
)
from leakwatch.flows import GroundTruthLabel, Os, parse_flow_record
from leakwatch.pii import PiiKind, PiiType
from leakwatch.synth import make_record
from leakwatch.tokenizer import prepare_flow


def build_flow(flow_id, params, domain="d.example", os=Os.ANDROID, body=False):
    if body:
        line = make_record(flow_id, domain, os, body_params=params)
    else:
        line = make_record(flow_id, domain, os, query_params=params)
    return prepare_flow(parse_flow_record(line))


def truth(flow_id, kind, value):
    return GroundTruthLabel(flow_id=flow_id, leaks=[(PiiType(kind), value)])


# -- randomized_value ---------------------------------------------------------

def test_hex_value_stays_hex_same_length():
    rng = random.Random(1)
    out = randomized_value("ABCDEF", rng)
    assert len(out) == 6
    assert all(c in "0123456789ABCDEF" for c in out)


def test_digit_value_stays_digits():
    rng = random.Random(1)
    out = randomized_value("356938035643809", rng)
    assert len(out) == 15 and out.isdigit()


def test_mixed_value_keeps_punctuation_positions():
    # charset oracle: classify each output character against the input's class
    rng = random.Random(7)
    for _ in range(50):
        out = randomized_value("42.33", rng)
        assert len(out) == 5
        assert out[2] == "."
        assert all(out[i].isdigit() for i in (0, 1, 3, 4))
    out = randomized_value("bob@x.example", rng)
    assert out[3] == "@" and "." in out
    assert len(out) == len("bob@x.example")


# -- randomize_pii_values -------------------------------------------------------

def test_randomize_replaces_all_occurrences_and_updates_truths():
    flow = build_flow("r1", [("idfa", "DEADBEEF"), ("echo", "DEADBEEF")])
    truths = {"r1": truth("r1", PiiKind.ADVERTISER_ID, "DEADBEEF")}
    out_flows, out_truths = randomize_pii_values([flow], truths, random.Random(3))
    new_value = out_truths["r1"].leaks[0][1]
    assert new_value != "DEADBEEF" and len(new_value) == 8
    text = out_flows[0].kv_source_text
    assert "DEADBEEF" not in text
    assert text.count(new_value) == 2
    # keys and structure untouched
    assert [p.key for p in out_flows[0].kv_pairs] == [p.key for p in flow.kv_pairs]
    assert len(out_flows[0].kv_source_text) == len(flow.kv_source_text)


def test_randomize_without_truths_is_identity():
    flow = build_flow("r2", [("a", "1")])
    out_flows, out_truths = randomize_pii_values([flow], {}, random.Random(3))
    assert out_flows[0] is flow
    assert out_truths == {}


def test_randomize_missing_value_passes_through_with_warning(caplog):
    flow = build_flow("r3", [("a", "1")])
    truths = {"r3": truth("r3", PiiKind.IMEI, "999999999999999")}
    with caplog.at_level("WARNING"):
        out_flows, out_truths = randomize_pii_values([flow], truths, random.Random(3))
    assert out_flows[0] is flow
    assert out_truths["r3"].leaks[0][1] == "999999999999999"
    assert any("not found" in r.message for r in caplog.records)


def test_no_truth_value_survives_as_vocabulary_word(small_corpus):
    flows, truths = small_corpus
    rng = random.Random(11)
    out_flows, out_truths = randomize_pii_values(flows, truths, rng)
    out_flows, out_truths = oversample_rare_leaks(out_flows, out_truths,
                                                  VocabularyConfig(), rng)
    vocab = build_vocabulary(out_flows, out_truths, VocabularyConfig())
    original_values = {v.lower() for t in truths.values() for _, v in t.leaks}
    assert not (original_values & set(vocab.words))


# -- oversample_rare_leaks -------------------------------------------------------

def test_oversample_single_positive_reaches_threshold_plus_one():
    flow = build_flow("o1", [("auid", "356938035643809")], body=True)
    truths = {"o1": truth("o1", PiiKind.IMEI, "356938035643809")}
    cfg = VocabularyConfig(min_word_frequency=21)
    out_flows, out_truths = oversample_rare_leaks([flow], truths, cfg, random.Random(5))
    assert len(out_flows) == 1 + 21
    freq = sum(len(f.tokenized.word_positions.get("auid", [])) for f in out_flows)
    assert freq == 22
    # duplicates carry fresh randomized values
    dup_values = {out_truths[f.flow_id].leaks[0][1] for f in out_flows[1:]}
    assert "356938035643809" not in dup_values
    assert len(dup_values) > 1


def test_oversample_key_above_threshold_untouched():
    flows = [build_flow(f"o{i}", [("auid", f"35693803564380{i}")], body=True)
             for i in range(30)]
    truths = {f.flow_id: truth(f.flow_id, PiiKind.IMEI, f.kv_pairs[0].value)
              for f in flows}
    # rebuild truths with actual values
    truths = {f.flow_id: truth(f.flow_id, PiiKind.IMEI,
                               [p for p in f.kv_pairs if p.key == "auid"][0].value)
              for f in flows}
    cfg = VocabularyConfig(min_word_frequency=21)
    out_flows, _ = oversample_rare_leaks(flows, truths, cfg, random.Random(5))
    assert len(out_flows) == 30


def test_oversample_without_positives_is_identity():
    flows = [build_flow(f"n{i}", [("a", "1")]) for i in range(5)]
    out_flows, _ = oversample_rare_leaks(flows, {}, VocabularyConfig(), random.Random(5))
    assert out_flows == flows


def test_oversample_never_duplicates_negatives(small_corpus):
    flows, truths = small_corpus
    negatives = {f.flow_id for f in flows if not truths[f.flow_id].leaks}
    out_flows, _ = oversample_rare_leaks(list(flows), dict(truths),
                                         VocabularyConfig(), random.Random(5))
    out_negative_ids = [f.flow_id for f in out_flows if f.flow_id in negatives]
    assert len(out_negative_ids) == len(negatives)


# -- build_vocabulary -------------------------------------------------------------

def test_word_below_threshold_excluded():
    # 'seen' clears the frequency bar without being constant; 'onceN' words
    # appear exactly once each, like session keys, and must be dropped
    flows = [
        build_flow(f"v{i}", ([("seen", "x")] if i < 22 else []) + [(f"once{i}", "y")])
        for i in range(25)
    ]
    vocab = build_vocabulary(flows, {}, VocabularyConfig(min_word_frequency=21))
    assert "seen" in vocab.words
    assert not any(w.startswith("once") for w in vocab.words)


def test_boilerplate_header_word_becomes_stopword():
    # 'content-length' shows up in every flow and never beside a leak
    flows = []
    truths = {}
    for i in range(30):
        flow = build_flow(f"s{i}", [("auid", f"3569380356438{i:02d}")], body=True)
        flows.append(flow)
        truths[flow.flow_id] = truth(flow.flow_id, PiiKind.IMEI,
                                     [p for p in flow.kv_pairs if p.key == "auid"][0].value)
    vocab = build_vocabulary(flows, truths, VocabularyConfig(min_word_frequency=21))
    assert "content-length" in vocab.stopwords
    assert "content-length" not in vocab.words
    # the leak-adjacent key survives even though it is everywhere too
    assert "auid" in vocab.words


def test_max_features_cap():
    flows = [
        build_flow(f"c{i}", [(f"k{j}", "z") for j in range(40) if (i + j) % 9])
        for i in range(30)
    ]
    vocab = build_vocabulary(flows, {}, VocabularyConfig(min_word_frequency=21,
                                                         max_features=10))
    assert len(vocab.words) == 10


def test_vocabulary_sorted_and_deterministic(small_corpus):
    flows, truths = small_corpus
    a = build_vocabulary(flows, truths, VocabularyConfig())
    b = build_vocabulary(flows, truths, VocabularyConfig())
    assert a.words == sorted(a.words)
    assert a.words == b.words and a.stopwords == b.stopwords
    assert all(a.frequencies[w] >= a.config.min_word_frequency for w in a.words)
    assert not (set(a.words) & a.stopwords)


def test_empty_corpus_empty_vocabulary():
    vocab = build_vocabulary([], {}, VocabularyConfig())
    assert vocab.words == [] and len(vocab) == 0


def test_vocabulary_json_round_trip(small_corpus):
    flows, truths = small_corpus
    vocab = build_vocabulary(flows, truths, VocabularyConfig())
    again = FeatureVocabulary.from_json(vocab.to_json())
    assert again.words == vocab.words
    assert again.stopwords == vocab.stopwords
    assert again.vocab_hash == vocab.vocab_hash


# -- vectorize ---------------------------------------------------------------------

def test_vectorize_bits():
    vocab = FeatureVocabulary(words=["auid", "urid"], frequencies={}, stopwords=set())
    flow = build_flow("b1", [("auid", "x")], body=True)
    assert vectorize(flow, vocab).bits.tolist() == [1, 0]
    both = build_flow("b2", [("auid", "x"), ("urid", "y")], body=True)
    assert vectorize(both, vocab).bits.tolist() == [1, 1]
    neither = build_flow("b3", [("zz", "x")], body=True)
    assert vectorize(neither, vocab).bits.tolist() == [0, 0]


def test_vectorize_pure_function(small_corpus):
    flows, truths = small_corpus
    vocab = build_vocabulary(flows, truths, VocabularyConfig())
    for flow in flows[:20]:
        assert np.array_equal(vectorize(flow, vocab).bits, vectorize(flow, vocab).bits)
