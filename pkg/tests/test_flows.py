import base64
import json

import pytest

from leakwatch.flows import (
    FlowParseError,
    KvSource,
    parse_flow_record,
    parse_label_record,
    serialize_flow_record,
    serialize_label_record,
    slice_span,
)
from leakwatch.pii import PiiKind, PiiType
from leakwatch.synth import make_record
from leakwatch.flows import Os
from leakwatch.tokenizer import prepare_flow


def record(**overrides):
    base = {
        "id": "f1",
        "ts_ms": 1470000000000,
        "os": "android",
        "app": "SomeApp",
        "method": "GET",
        "host": "tracker.example",
        "path": "/v1/t",
        "query": "a=1",
        "headers": [["Host", "tracker.example"], ["User-Agent", "SomeApp/1.0"]],
        "body_b64": "",
        "content_type": None,
        "content_encoding": None,
    }
    base.update(overrides)
    return json.dumps(base)


def test_domain_lowercased():
    flow = parse_flow_record(record(host="ApplovIn.CoM"))
    assert flow.domain == "applovin.com"


def test_missing_host_gives_empty_domain():
    flow = parse_flow_record(record(host=None))
    assert flow.domain == ""


def test_body_base64_round_trip():
    flow = parse_flow_record(record(
        body_b64=base64.b64encode(b"a=1").decode(),
        content_type="application/x-www-form-urlencoded"))
    assert flow.body == b"a=1"


def test_malformed_record_names_field():
    with pytest.raises(FlowParseError) as err:
        parse_flow_record(record(ts_ms="yesterday"))
    assert err.value.fieldname == "ts_ms"
    with pytest.raises(FlowParseError) as err:
        parse_flow_record(record(body_b64="!!!"))
    assert err.value.fieldname == "body_b64"
    with pytest.raises(FlowParseError):
        parse_flow_record("not json at all{")


def test_app_falls_back_to_user_agent_product():
    flow = parse_flow_record(record(app=None))
    assert flow.app_id == "SomeApp"


def test_round_trip_identity():
    line = make_record("rt-1", "site.example", Os.IOS,
                       query_params=[("q", "x")],
                       body_params=[("idfa", "AAAA-BBBB")], app="RtApp")
    flow = parse_flow_record(line)
    again = parse_flow_record(serialize_flow_record(flow))
    assert again == flow


def test_label_round_trip():
    label = parse_label_record(json.dumps({
        "id": "f9",
        "leaks": [{"category": "DeviceIdentifier", "kind": "Imei",
                   "value": "356938035643809"}],
    }))
    assert label.leaks == [(PiiType(PiiKind.IMEI), "356938035643809")]
    assert parse_label_record(serialize_label_record(label)) == label


def test_label_rejects_wrong_category():
    with pytest.raises(ValueError):
        parse_label_record(json.dumps({
            "id": "f9",
            "leaks": [{"category": "Location", "kind": "Imei", "value": "1" * 15}],
        }))


# -- key/value extraction ----------------------------------------------------

def prepared(**overrides):
    flow = parse_flow_record(record(**overrides))
    return prepare_flow(flow)


def kv_map(flow):
    return {p.key: p.value for p in flow.kv_pairs if p.key}


def test_query_pairs():
    flow = prepared(query="username=user007&device_id=X")
    assert kv_map(flow) == {"username": "user007", "device_id": "X"}


def test_json_dotted_paths():
    body = json.dumps({"a": {"idfa": "Z"}}).encode()
    flow = prepared(query="", body_b64=base64.b64encode(body).decode(),
                    content_type="application/json")
    assert kv_map(flow) == {"a.idfa": "Z"}
    pair = flow.kv_pairs[0]
    assert pair.source is KvSource.JSON_BODY


def test_json_array_elements_keep_parent_key():
    body = json.dumps({"ids": [{"imei": "1"}, {"imei": "2"}], "tags": ["x", "y"]}).encode()
    flow = prepared(query="", body_b64=base64.b64encode(body).decode(),
                    content_type="application/json")
    pairs = [(p.key, p.value) for p in flow.kv_pairs]
    assert ("ids.imei", "1") in pairs and ("ids.imei", "2") in pairs
    assert ("tags", "x") in pairs and ("tags", "y") in pairs


def test_arrow_delimiter_line():
    body = b"username => user007"
    flow = prepared(query="", body_b64=base64.b64encode(body).decode(),
                    content_type="text/plain")
    assert kv_map(flow) == {"username": "user007"}


def test_header_like_body_line():
    body = b"device: 356938035643809\nnothing structured here!"
    flow = prepared(query="", body_b64=base64.b64encode(body).decode(),
                    content_type="text/plain")
    pairs = {(p.key, p.value, p.source) for p in flow.kv_pairs}
    assert ("device", "356938035643809", KvSource.HEADER_LINE) in pairs
    # the unparseable line survives as a freeform pair with an empty key
    assert ("", "nothing structured here!", KvSource.FREEFORM) in pairs


def test_xml_elements_and_attributes():
    body = b'<user id="u77"><email>a@b.example</email></user>'
    flow = prepared(query="", body_b64=base64.b64encode(body).decode(),
                    content_type="text/xml")
    pairs = {(p.key, p.value) for p in flow.kv_pairs}
    assert ("id", "u77") in pairs
    assert ("email", "a@b.example") in pairs


def test_value_spans_slice_back_to_values():
    body = json.dumps({"u": {"mail": "bob@x.example"}, "n": 42}).encode()
    flow = prepared(query="idfa=AAAA-BBBB&flag",
                    body_b64=base64.b64encode(body).decode(),
                    content_type="application/json")
    blob = flow.kv_source_bytes
    assert flow.kv_pairs
    for pair in flow.kv_pairs:
        assert slice_span(blob, pair.value_span).decode("utf-8") == pair.value


def test_value_spans_with_non_ascii_text():
    body = json.dumps({"name": "Zoë", "city": "Tromsø"}, ensure_ascii=False).encode()
    flow = prepared(query="", body_b64=base64.b64encode(body).decode(),
                    content_type="application/json")
    blob = flow.kv_source_bytes
    for pair in flow.kv_pairs:
        assert slice_span(blob, pair.value_span).decode("utf-8") == pair.value


def test_freeform_query_token():
    flow = prepared(query="justatoken")
    pair = [p for p in flow.kv_pairs if p.source is KvSource.FREEFORM][0]
    assert pair.key == "" and pair.value == "justatoken"
