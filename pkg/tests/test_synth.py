import json

from leakwatch.flows import Os
from leakwatch.synth import (
    CorpusSpec,
    DomainSpec,
    Pattern,
    default_spec,
    generate,
    generate_prepared,
)
from leakwatch.pii import PiiKind
from leakwatch.tokenizer import flow_text


def test_same_seed_byte_identical():
    spec = default_spec(seed=5)
    assert generate(spec) == generate(spec)


def test_different_seed_differs():
    assert generate(default_spec(seed=5)) != generate(default_spec(seed=6))


def test_spec_json_round_trip():
    spec = default_spec()
    again = CorpusSpec.from_json(json.loads(json.dumps(spec.to_json())))
    assert generate(again) == generate(spec)


def test_exact_positive_counts(small_spec, small_corpus):
    flows, truths = small_corpus
    by_domain = {}
    for flow in flows:
        if truths[flow.flow_id].leaks:
            by_domain[flow.domain] = by_domain.get(flow.domain, 0) + 1
    for domain in small_spec.domains:
        assert by_domain.get(domain.domain, 0) == domain.positives


def test_every_positive_value_appears_verbatim(small_corpus):
    flows, truths = small_corpus
    for flow in flows:
        for _pii, value in truths[flow.flow_id].leaks:
            assert value in flow_text(flow)


def test_labels_consistent_with_patterns(small_corpus, small_spec):
    flows, truths = small_corpus
    spec_by_domain = {d.domain: d for d in small_spec.domains}
    for flow in flows:
        spec = spec_by_domain[flow.domain]
        keys = {p.key.rsplit(".", 1)[-1] for p in flow.kv_pairs if p.key}
        positive = bool(truths[flow.flow_id].leaks)
        if spec.pattern is Pattern.BENIGN:
            assert not positive
        elif spec.pattern is Pattern.SIMPLE_KEY:
            assert positive == (spec.leak_key in keys)
        elif spec.pattern is Pattern.CONDITIONAL_ABSENCE:
            assert positive == (spec.leak_key in keys and spec.blocker_key not in keys)
        elif spec.pattern is Pattern.CONTEXTUAL_TERM:
            ctx = {k for k in spec.context_keys}
            assert positive == (spec.leak_key in keys and not (ctx & keys))


def test_conditional_absence_negative_with_both_keys(small_corpus):
    flows, truths = small_corpus
    both = [
        f for f in flows
        if f.domain == "metrics.apexmob.example"
        and {"auid", "urid"} <= {p.key for p in f.kv_pairs}
    ]
    assert both, "generator must emit key-plus-blocker negatives"
    assert all(not truths[f.flow_id].leaks for f in both)


def test_default_spec_has_mopub_scale_domains():
    spec = default_spec()
    big = [d for d in spec.domains if d.flows == 1276 and d.positives == 266]
    assert len(big) >= 3


def test_os_mix_respected(small_corpus):
    flows, _ = small_corpus
    seen = {f.os for f in flows}
    assert seen == {Os.ANDROID, Os.IOS}


def test_pii_values_have_expected_shapes():
    import random

    from leakwatch.synth import pii_value

    rng = random.Random(1)
    assert len(pii_value(PiiKind.IMEI, rng)) == 15
    assert pii_value(PiiKind.IMEI, rng).isdigit()
    assert "@" in pii_value(PiiKind.EMAIL_ADDRESS, rng)
    lat, lon = pii_value(PiiKind.GPS_COORDINATE, rng).split(",")
    float(lat), float(lon)
    assert pii_value(PiiKind.MAC_ADDRESS, rng).count(":") == 5
