import pytest

from leakwatch.extractor import (
    SuspiciousKeyTable,
    augment_with_roots,
    build_naive_key_map,
    build_table,
    extract,
    naive_extract,
    score_extraction,
    validates,
)
from leakwatch.flows import GroundTruthLabel, Os, parse_flow_record, slice_span
from leakwatch.pii import PiiKind, PiiType
from leakwatch.synth import make_record
from leakwatch.tokenizer import prepare_flow

IMEI = PiiType(PiiKind.IMEI)
EMAIL = PiiType(PiiKind.EMAIL_ADDRESS)
ADID = PiiType(PiiKind.ADVERTISER_ID)
GPS = PiiType(PiiKind.GPS_COORDINATE)
MAC = PiiType(PiiKind.MAC_ADDRESS)


def flow_of(flow_id, params, domain="d.example"):
    line = make_record(flow_id, domain, Os.ANDROID, query_params=params)
    return prepare_flow(parse_flow_record(line))


def leak(flow_id, pii, value):
    return GroundTruthLabel(flow_id=flow_id, leaks=[(pii, value)])


def build_small_corpus():
    flows, truths = [], {}
    # device_id carries an IMEI in 5 of the 10 flows containing it
    for i in range(5):
        value = f"35693803564380{i}"
        flow = flow_of(f"p{i}", [("device_id", value)])
        flows.append(flow)
        truths[flow.flow_id] = leak(flow.flow_id, IMEI, value)
    for i in range(5):
        flows.append(flow_of(f"n{i}", [("device_id", f"tok{i}")]))
    # q coincides with a leak exactly once across fifty flows
    gps = "42.3314,-71.0512"
    flow = flow_of("g0", [("q", gps), ("ll", gps)])
    flows.append(flow)
    truths["g0"] = leak("g0", GPS, gps)
    for i in range(49):
        flows.append(flow_of(f"q{i}", [("q", "weather")]))
    return flows, truths


def test_probability_formula():
    flows, truths = build_small_corpus()
    table = build_table(flows, truths)
    assert table.probability(IMEI, "device_id") == pytest.approx(0.5)
    assert table.counts[(IMEI, "device_id")] == (5, 10)
    assert table.suspicious_types("device_id")


def test_rare_coincidence_not_suspicious():
    flows, truths = build_small_corpus()
    table = build_table(flows, truths)
    assert table.probability(GPS, "q") == pytest.approx(1 / 50)
    assert table.suspicious_types("q") == []


def test_key_never_in_leaking_flows_has_zero_p():
    flows, truths = build_small_corpus()
    table = build_table(flows, truths)
    assert table.probability(EMAIL, "q") == 0.0


def test_p_monotonicity():
    flows, truths = build_small_corpus()
    base = build_table(flows, truths).probability(IMEI, "device_id")
    # one more leaking occurrence never decreases P
    extra = flow_of("p9", [("device_id", "356938035643999")])
    more_truths = dict(truths)
    more_truths["p9"] = leak("p9", IMEI, "356938035643999")
    up = build_table(flows + [extra], more_truths).probability(IMEI, "device_id")
    assert up >= base
    # one more non-leaking occurrence never increases it
    benign = flow_of("n9", [("device_id", "tok9")])
    down = build_table(flows + [benign], truths).probability(IMEI, "device_id")
    assert down <= base


def test_root_augmentation_inserts_bonus():
    table = SuspiciousKeyTable()
    augment_with_roots(table, [("idfa", {"idfa", "os"}, {ADID})])
    assert table.probability(ADID, "idfa") == 1.0
    # leaf-only tree (no root word) inserts nothing
    augment_with_roots(table, [(None, {"idfa"}, {ADID})])
    # root word that is not a key anywhere inserts nothing
    augment_with_roots(table, [("ghost", {"idfa"}, {ADID})])
    assert table.probability(ADID, "ghost") == 0.0
    assert len(table.entries) == 1


def test_root_augmentation_matches_dotted_keys():
    table = SuspiciousKeyTable()
    augment_with_roots(table, [("email", {"user.email"}, {EMAIL})])
    assert table.probability(EMAIL, "user.email") == 1.0


def test_extract_suspicious_pair():
    flows, truths = build_small_corpus()
    table = build_table(flows, truths)
    flow = flow_of("x1", [("device_id", "356938035643809"), ("q", "pizza")])
    got = extract(flow, table)
    assert len(got) == 1
    assert got[0].pii == IMEI and got[0].key == "device_id"
    assert slice_span(flow.kv_source_bytes, got[0].span).decode() == got[0].value


def test_extract_nothing_when_no_suspicious_keys():
    flows, truths = build_small_corpus()
    table = build_table(flows, truths)
    flow = flow_of("x2", [("q", "weather")])
    assert extract(flow, table) == []


def test_validators():
    assert validates(IMEI, "35693803564380")  # 14 digits
    assert validates(IMEI, "3569380356438090")  # 16
    assert not validates(IMEI, "12345")
    assert not validates(IMEI, "3569380356438o9x")
    assert validates(EMAIL, "a@b.example") and not validates(EMAIL, "12345")
    assert validates(GPS, "42.33,-71.05") and not validates(GPS, "boston")
    assert not validates(GPS, "42.33")
    assert validates(MAC, "02:00:00:00:00:00") and not validates(MAC, "02:00")
    assert validates(PiiType(PiiKind.USERNAME), "anything")  # no structural rule


def test_validator_vetoes_mismatched_value():
    table = SuspiciousKeyTable()
    table.entries[(EMAIL, "contact")] = 0.9
    flow = flow_of("x3", [("contact", "12345")])
    assert extract(flow, table) == []


def test_tied_bonus_falls_back_to_observed_counts():
    table = SuspiciousKeyTable()
    table.entries[(IMEI, "uid")] = 1.0
    table.entries[(PiiType(PiiKind.USERNAME), "uid")] = 1.0
    table.counts[(IMEI, "uid")] = (30, 42)
    table.counts[(PiiType(PiiKind.USERNAME), "uid")] = (12, 42)
    imei_flow = flow_of("x4", [("uid", "356938035643809")])
    assert extract(imei_flow, table)[0].pii == IMEI
    name_flow = flow_of("x5", [("uid", "frodo77")])
    # the IMEI candidate is vetoed structurally; the username survives
    assert extract(name_flow, table)[0].pii == PiiType(PiiKind.USERNAME)


def test_threshold_sweep_monotone():
    flows, truths = build_small_corpus()
    counts = []
    for threshold in (0.0, 0.1, 0.2, 0.4, 0.6, 0.9):
        table = build_table(flows, truths, threshold=threshold)
        total = sum(len(extract(f, table)) for f in flows)
        counts.append(total)
    assert counts == sorted(counts, reverse=True)


def test_table_json_round_trip():
    flows, truths = build_small_corpus()
    table = build_table(flows, truths)
    augment_with_roots(table, [("ll", {"ll"}, {GPS})])
    again = SuspiciousKeyTable.from_json(table.to_json())
    assert again.entries == table.entries
    assert again.counts == table.counts
    assert again.threshold == table.threshold


def test_naive_baseline_types_by_majority():
    flows, truths = build_small_corpus()
    key_map = build_naive_key_map(flows, truths)
    assert key_map["device_id"] == IMEI
    assert "q" in key_map  # equal treatment: one coincidence is enough
    flow = flow_of("x6", [("q", "coffee")])
    got = naive_extract(flow, key_map)
    assert got and got[0].pii == GPS  # mislabeled, as the baseline does


def test_score_extraction_counts():
    flows, truths = build_small_corpus()
    table = build_table(flows, truths)
    score = score_extraction(flows, truths, lambda f: extract(f, table))
    assert score.fn == 0 and score.fp == 0
    assert score.tp == sum(len(t.leaks) for t in truths.values())
