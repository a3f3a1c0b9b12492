"""Deterministic labeled corpus generator.

Emits the flow-log and label formats so tests and the acceptance suite never
depend on captured traffic. Domain patterns mirror the association shapes the
classifiers must learn: a plain tell-tale key, a key whose meaning flips when
a second key is present, and a term that only leaks when two context terms are
absent. Negatives share the header vocabulary of positives.
"""
from __future__ import annotations

import base64
import json
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .flows import Flow, GroundTruthLabel, Os, parse_flow_record, parse_label_record
from .pii import PiiKind, PiiType
from .tokenizer import TokenizerConfig, prepare_flow


class Pattern(Enum):
    SIMPLE_KEY = "simple_key"
    CONDITIONAL_ABSENCE = "conditional_absence"
    CONTEXTUAL_TERM = "contextual_term"
    BENIGN = "benign"


@dataclass
class DomainSpec:
    domain: str
    pattern: Pattern
    flows: int
    positives: int = 0
    pii_kind: Optional[PiiKind] = None
    leak_key: str = ""
    transport: str = "query"  # query | form | json
    path: str = "/v1/track"
    app: str = "GenericApp"
    blocker_key: str = "urid"
    context_keys: tuple[str, str] = ("session", "deviceId")
    decoy_query_key: str = ""  # e.g. a search box param present on every flow
    json_prefix: str = ""  # nest the leak key under this object in json bodies

    def to_json(self) -> dict:
        return {
            "domain": self.domain,
            "pattern": self.pattern.value,
            "flows": self.flows,
            "positives": self.positives,
            "pii_kind": self.pii_kind.value if self.pii_kind else None,
            "leak_key": self.leak_key,
            "transport": self.transport,
            "path": self.path,
            "app": self.app,
            "blocker_key": self.blocker_key,
            "context_keys": list(self.context_keys),
            "decoy_query_key": self.decoy_query_key,
            "json_prefix": self.json_prefix,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DomainSpec":
        return cls(
            domain=obj["domain"],
            pattern=Pattern(obj["pattern"]),
            flows=obj["flows"],
            positives=obj.get("positives", 0),
            pii_kind=PiiKind(obj["pii_kind"]) if obj.get("pii_kind") else None,
            leak_key=obj.get("leak_key", ""),
            transport=obj.get("transport", "query"),
            path=obj.get("path", "/v1/track"),
            app=obj.get("app", "GenericApp"),
            blocker_key=obj.get("blocker_key", "urid"),
            context_keys=tuple(obj.get("context_keys", ("session", "deviceId"))),
            decoy_query_key=obj.get("decoy_query_key", ""),
            json_prefix=obj.get("json_prefix", ""),
        )


@dataclass
class CorpusSpec:
    domains: list[DomainSpec]
    os_mix: dict[Os, float] = field(
        default_factory=lambda: {Os.ANDROID: 0.5, Os.IOS: 0.5})
    rng_seed: int = 1276

    def to_json(self) -> dict:
        return {
            "domains": [d.to_json() for d in self.domains],
            "os_mix": {os.value: p for os, p in self.os_mix.items()},
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CorpusSpec":
        return cls(
            domains=[DomainSpec.from_json(d) for d in obj["domains"]],
            os_mix={Os(k): v for k, v in obj.get("os_mix", {"android": 0.5, "ios": 0.5}).items()},
            rng_seed=obj.get("rng_seed", 1276),
        )


_FIRST = ["alice", "bob", "carol", "dmitri", "elena", "frodo", "grace", "hiro"]
_HOSTS = ["postbox", "mailster", "shire", "novamail"]
_QUERY_WORDS = ["weather", "pizza", "news", "shoes", "coffee", "traffic", "music"]
_UA = {
    Os.ANDROID: "Dalvik",
    Os.IOS: "CFNetwork",
    Os.WINDOWS: "WindowsPhone",
    Os.UNKNOWN: "Generic",
}


def pii_value(kind: PiiKind, rng: random.Random) -> str:
    hexd = "0123456789abcdef"
    if kind is PiiKind.IMEI:
        return "".join(rng.choice("0123456789") for _ in range(15))
    if kind is PiiKind.ADVERTISER_ID:
        raw = "".join(rng.choice(hexd.upper()) for _ in range(32))
        return f"{raw[:8]}-{raw[8:12]}-{raw[12:16]}-{raw[16:20]}-{raw[20:]}"
    if kind is PiiKind.ANDROID_ID:
        return "".join(rng.choice(hexd) for _ in range(16))
    if kind is PiiKind.MAC_ADDRESS:
        return ":".join("".join(rng.choice(hexd) for _ in range(2)) for _ in range(6))
    if kind is PiiKind.EMAIL_ADDRESS:
        return f"{rng.choice(_FIRST)}{rng.randrange(10, 99)}@{rng.choice(_HOSTS)}.example"
    if kind is PiiKind.GPS_COORDINATE:
        lat = rng.uniform(-80, 80)
        lon = rng.uniform(-170, 170)
        return f"{lat:.4f},{lon:.4f}"
    if kind is PiiKind.USERNAME:
        return f"{rng.choice(_FIRST)}{rng.randrange(10, 99)}"
    if kind is PiiKind.PASSWORD:
        return "".join(rng.choice("abcdefghjkmnpqrstuvwxyz23456789") for _ in range(10))
    if kind is PiiKind.ZIP_CODE:
        return f"{rng.randrange(10000, 99999)}"
    if kind is PiiKind.PHONE_NUMBER:
        return "".join(rng.choice("0123456789") for _ in range(10))
    if kind is PiiKind.ICCID:
        return "89" + "".join(rng.choice("0123456789") for _ in range(17))
    if kind is PiiKind.IMSI:
        return "".join(rng.choice("0123456789") for _ in range(15))
    # remaining kinds carry free-text values
    return f"{rng.choice(_FIRST)}-{rng.randrange(100, 999)}"


def make_record(
    flow_id: str,
    domain: str,
    os: Os,
    *,
    method: str = "GET",
    path: str = "/v1/track",
    query_params: Optional[list[tuple[str, str]]] = None,
    body_params: Optional[list[tuple[str, str]]] = None,
    json_body: Optional[dict] = None,
    app: str = "GenericApp",
    ts_ms: int = 1_470_000_000_000,
    extra_headers: Optional[list[tuple[str, str]]] = None,
) -> str:
    """One flow-log line. Bodies are form-encoded unless a json_body is given."""
    query = "&".join(f"{k}={v}" for k, v in (query_params or []))
    if json_body is not None:
        body = json.dumps(json_body, separators=(",", ":")).encode()
        ctype = "application/json"
    elif body_params:
        body = "&".join(f"{k}={v}" for k, v in body_params).encode()
        ctype = "application/x-www-form-urlencoded"
    else:
        body = b""
        ctype = None
    headers = [
        ["Host", domain],
        ["User-Agent", f"{app}/2.1 ({_UA[os]})"],
        ["Accept", "*/*"],
        ["Connection", "keep-alive"],
    ]
    if body:
        headers.append(["Content-Type", ctype])
        headers.append(["Content-Length", str(len(body))])
    for name, value in extra_headers or []:
        headers.append([name, value])
    record = {
        "id": flow_id,
        "ts_ms": ts_ms,
        "os": os.value,
        "app": app,
        "method": "POST" if body else method,
        "host": domain,
        "path": path,
        "query": query,
        "headers": headers,
        "body_b64": base64.b64encode(body).decode("ascii"),
        "content_type": ctype,
        "content_encoding": None,
    }
    return json.dumps(record, separators=(",", ":"))


def label_line(flow_id: str, leaks: list[tuple[PiiType, str]]) -> str:
    out = []
    for pii, value in leaks:
        category, kind = pii.to_names()
        out.append({"category": category, "kind": kind, "value": value})
    return json.dumps({"id": flow_id, "leaks": out}, separators=(",", ":"))


def _fillers(rng: random.Random, os: Os) -> list[tuple[str, str]]:
    # nonce length varies so body lengths (and their Content-Length tokens)
    # stay below the word-frequency filter instead of becoming features
    nonce_len = rng.randrange(8, 40)
    return [
        ("os", os.value),
        ("v", rng.choice(["3.2", "3.4", "4.0"])),
        ("sdk", rng.choice(["17", "19", "21"])),
        ("lang", "en-us"),
        ("fmt", "json"),
        ("nonce", "".join(rng.choice("0123456789abcdef") for _ in range(nonce_len))),
    ]


def _domain_flows(spec: DomainSpec, os_seq: list[Os], rng: random.Random,
                  base_ts: int) -> tuple[list[str], list[str]]:
    flow_lines: list[str] = []
    label_lines: list[str] = []
    positive_at = set(rng.sample(range(spec.flows), spec.positives)) if spec.positives else set()
    for i in range(spec.flows):
        flow_id = f"{spec.domain.split('.')[0]}-{i:05d}"
        os = os_seq[i]
        positive = i in positive_at
        leaks: list[tuple[PiiType, str]] = []
        params: list[tuple[str, str]] = []

        if spec.pattern is Pattern.SIMPLE_KEY:
            if positive:
                value = pii_value(spec.pii_kind, rng)
                params.append((spec.leak_key, value))
                leaks.append((PiiType(spec.pii_kind), value))
        elif spec.pattern is Pattern.CONDITIONAL_ABSENCE:
            if positive:
                value = pii_value(spec.pii_kind, rng)
                params.append((spec.leak_key, value))
                leaks.append((PiiType(spec.pii_kind), value))
            else:
                shape = rng.randrange(3)
                if shape == 0:  # leak key present but carrying an app token
                    params.append((spec.leak_key, "tok" + "".join(
                        rng.choice("abcdefghij") for _ in range(8))))
                    params.append((spec.blocker_key, "".join(
                        rng.choice("0123456789abcdef") for _ in range(10))))
                elif shape == 1:
                    params.append((spec.blocker_key, "".join(
                        rng.choice("0123456789abcdef") for _ in range(10))))
        elif spec.pattern is Pattern.CONTEXTUAL_TERM:
            ctx_a, ctx_b = spec.context_keys
            if positive:
                value = pii_value(spec.pii_kind, rng)
                params.append((spec.leak_key, value))
                leaks.append((PiiType(spec.pii_kind), value))
            else:
                if rng.random() < 0.92:  # term present without leaking
                    params.append((spec.leak_key, rng.choice(["login", "true", "news"])))
                shape = rng.randrange(4)
                if shape in (0, 1):
                    params.append((ctx_a, "".join(
                        rng.choice("0123456789abcdef") for _ in range(16))))
                if shape in (0, 2, 3):
                    params.append((ctx_b, "app" + "".join(
                        rng.choice("0123456789") for _ in range(6))))

        params.extend(_fillers(rng, os))
        query_params: list[tuple[str, str]] = []
        if spec.decoy_query_key:
            query_params.append((spec.decoy_query_key, rng.choice(_QUERY_WORDS)))

        if spec.transport == "json":
            body: dict = {}
            for key, value in params:
                if spec.json_prefix and key == spec.leak_key:
                    body.setdefault(spec.json_prefix, {})[key] = value
                else:
                    body[key] = value
            line = make_record(flow_id, spec.domain, os, path=spec.path,
                               query_params=query_params, json_body=body,
                               app=spec.app, ts_ms=base_ts + i)
        elif spec.transport == "form":
            line = make_record(flow_id, spec.domain, os, path=spec.path,
                               query_params=query_params, body_params=params,
                               app=spec.app, ts_ms=base_ts + i)
        else:
            line = make_record(flow_id, spec.domain, os, path=spec.path,
                               query_params=query_params + params,
                               app=spec.app, ts_ms=base_ts + i)
        flow_lines.append(line)
        label_lines.append(label_line(flow_id, leaks))
    return flow_lines, label_lines


def generate(spec: CorpusSpec) -> tuple[list[str], list[str]]:
    """Emit (flow-log lines, label lines); same spec and seed give
    byte-identical output."""
    flow_lines: list[str] = []
    label_lines: list[str] = []
    weights = list(spec.os_mix.items())
    base_ts = 1_470_000_000_000
    for n, domain in enumerate(spec.domains):
        rng = random.Random(f"{spec.rng_seed}:{domain.domain}")
        os_seq = [
            rng.choices([os for os, _ in weights], [w for _, w in weights])[0]
            for _ in range(domain.flows)
        ]
        lines, labels = _domain_flows(domain, os_seq, rng, base_ts + n * 1_000_000)
        flow_lines.extend(lines)
        label_lines.extend(labels)
    return flow_lines, label_lines


def generate_prepared(
    spec: CorpusSpec, tokenizer_cfg: Optional[TokenizerConfig] = None
) -> tuple[list[Flow], dict[str, GroundTruthLabel]]:
    """Generate, then run the emitted lines back through the real parser and
    enrichment pipeline."""
    flow_lines, label_lines = generate(spec)
    flows = [prepare_flow(parse_flow_record(line), tokenizer_cfg) for line in flow_lines]
    truths = {}
    for line in label_lines:
        label = parse_label_record(line)
        truths[label.flow_id] = label
    return flows, truths


def default_spec(seed: int = 1276) -> CorpusSpec:
    """Three qualifying domains at the scale of a large tracker (1,276 flows,
    266 leaking) plus a tail of small domains that feed the general classifier."""
    return CorpusSpec(
        rng_seed=seed,
        domains=[
            DomainSpec("ads.tracknet.example", Pattern.SIMPLE_KEY, 1276, 266,
                       PiiKind.ADVERTISER_ID, "idfa", transport="query",
                       path="/2.0/ad", app="TrackNetSDK"),
            DomainSpec("metrics.apexmob.example", Pattern.CONDITIONAL_ABSENCE, 1276, 266,
                       PiiKind.IMEI, "auid", transport="form",
                       path="/getImage.php5", app="ApexMetrics"),
            DomainSpec("profile.cloudsync.example", Pattern.CONTEXTUAL_TERM, 1276, 266,
                       PiiKind.EMAIL_ADDRESS, "email", transport="json",
                       path="/user/sync", app="CloudSync", json_prefix="user"),
            # below the per-domain sample bar: general classifier territory
            DomainSpec("cdn.pixelpush.example", Pattern.SIMPLE_KEY, 60, 18,
                       PiiKind.EMAIL_ADDRESS, "track_email", transport="query",
                       path="/px", app="PixelPush"),
            DomainSpec("api.beaconly.example", Pattern.SIMPLE_KEY, 80, 24,
                       PiiKind.ANDROID_ID, "beacon_id", transport="form",
                       path="/v1/beacon", app="Beaconly"),
            DomainSpec("geo.pinmaps.example", Pattern.SIMPLE_KEY, 50, 15,
                       PiiKind.GPS_COORDINATE, "ll", transport="query",
                       path="/pin", app="PinMaps", decoy_query_key="q"),
            DomainSpec("id.vaultsync.example", Pattern.SIMPLE_KEY, 60, 30,
                       PiiKind.IMEI, "uid", transport="form",
                       path="/sync", app="VaultSync"),
            DomainSpec("forum.chattr.example", Pattern.SIMPLE_KEY, 40, 12,
                       PiiKind.USERNAME, "uid", transport="query",
                       path="/session/open", app="Chattr"),
            DomainSpec("news.dailybyte.example", Pattern.BENIGN, 70, 0,
                       path="/feed", app="DailyByte"),
            DomainSpec("img.staticzone.example", Pattern.BENIGN, 60, 0,
                       path="/assets/logo", app="StaticZone"),
            DomainSpec("time.syncd.example", Pattern.BENIGN, 40, 0,
                       path="/now", app="Syncd"),
        ],
    )
