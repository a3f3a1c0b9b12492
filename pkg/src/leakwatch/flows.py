"""Flow records: the JSON-lines flow-log format, parsing, and key/value extraction.

A flow is one HTTP request. Key/value pairs are extracted from the query string
and the decoded body; their spans are byte offsets into the concatenation of
query + decoded body (``Flow.kv_source_bytes``), and always slice back to the
pair's value byte-for-byte.
"""
from __future__ import annotations

import base64
import binascii
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from json.decoder import scanstring
from typing import Iterable, Iterator, NamedTuple, Optional

from .pii import PiiType


class Os(Enum):
    ANDROID = "android"
    IOS = "ios"
    WINDOWS = "windows"
    UNKNOWN = "unknown"


class KvSource(Enum):
    QUERY_PARAM = "QueryParam"
    FORM_BODY = "FormBody"
    JSON_BODY = "JsonBody"
    XML_BODY = "XmlBody"
    HEADER_LINE = "HeaderLine"
    FREEFORM = "Freeform"


class Span(NamedTuple):
    offset: int
    length: int

    @property
    def end(self) -> int:
        return self.offset + self.length


def slice_span(data: bytes, span: Span) -> bytes:
    return data[span.offset : span.offset + span.length]


@dataclass
class KeyValuePair:
    key: str
    value: str
    source: KvSource
    value_span: Span
    # Extent of the whole "key=value" unit for query/form pairs; used by the
    # rewriter to drop an entire pair. None for sources where removal must
    # keep the surrounding structure valid (JSON, XML, ...).
    pair_span: Optional[Span] = None


@dataclass
class Flow:
    """One parsed HTTP request plus derived artifacts."""

    flow_id: str
    timestamp: int
    os: Os
    domain: str
    app_id: Optional[str]
    method: str
    path: str
    query: str
    headers: list[tuple[str, str]]
    body: bytes
    content_type: Optional[str] = None
    content_encoding: Optional[str] = None
    decoded_text: str = ""
    decode_degraded: bool = False
    kv_pairs: list[KeyValuePair] = field(default_factory=list)
    # filled by the tokenizer; kept on the flow so downstream steps can reuse it
    tokenized: Optional[object] = None

    @property
    def kv_source_text(self) -> str:
        return self.query + self.decoded_text

    @property
    def kv_source_bytes(self) -> bytes:
        return self.kv_source_text.encode("utf-8")

    def header(self, name: str) -> Optional[str]:
        lname = name.lower()
        for hname, hvalue in self.headers:
            if hname.lower() == lname:
                return hvalue
        return None


@dataclass
class GroundTruthLabel:
    flow_id: str
    leaks: list[tuple[PiiType, str]]


class FlowParseError(ValueError):
    """Raised for malformed flow-log records; names the offending field."""

    def __init__(self, fieldname: str, message: str):
        self.fieldname = fieldname
        super().__init__(f"{fieldname}: {message}")


# ---------------------------------------------------------------------------
# flow-log records
# ---------------------------------------------------------------------------

def parse_flow_record(line: str) -> Flow:
    """Parse one JSON-lines flow-log record into a Flow.

    decoded_text and kv_pairs are left empty; the decoder/tokenizer fills them.
    A missing host yields domain="" (routed to the general classifier later).
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FlowParseError("record", f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise FlowParseError("record", "record must be a JSON object")

    def req(name, types, what):
        if name not in obj:
            raise FlowParseError(name, "missing required field")
        value = obj[name]
        if not isinstance(value, types):
            raise FlowParseError(name, f"expected {what}")
        return value

    flow_id = req("id", str, "string")
    ts_ms = req("ts_ms", int, "integer")
    os_name = req("os", str, "string")
    try:
        os_value = Os(os_name)
    except ValueError:
        raise FlowParseError("os", f"unknown OS {os_name!r}") from None
    method = req("method", str, "string")
    path = req("path", str, "string")
    query = req("query", str, "string")
    headers_raw = req("headers", list, "list of [name, value] pairs")
    headers: list[tuple[str, str]] = []
    for item in headers_raw:
        if (
            not isinstance(item, (list, tuple))
            or len(item) != 2
            or not all(isinstance(part, str) for part in item)
        ):
            raise FlowParseError("headers", "each header must be a [name, value] string pair")
        headers.append((item[0], item[1]))
    body_b64 = req("body_b64", str, "base64 string")
    try:
        body = base64.b64decode(body_b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise FlowParseError("body_b64", f"invalid base64: {exc}") from exc

    host = obj.get("host")
    if host is not None and not isinstance(host, str):
        raise FlowParseError("host", "expected string or null")
    domain = host.strip().lower() if host else ""

    app = obj.get("app")
    if app is not None and not isinstance(app, str):
        raise FlowParseError("app", "expected string or null")
    app_id = app or _app_from_user_agent(headers)

    content_type = obj.get("content_type")
    if content_type is not None and not isinstance(content_type, str):
        raise FlowParseError("content_type", "expected string or null")
    content_encoding = obj.get("content_encoding")
    if content_encoding is not None and not isinstance(content_encoding, str):
        raise FlowParseError("content_encoding", "expected string or null")

    return Flow(
        flow_id=flow_id,
        timestamp=ts_ms,
        os=os_value,
        domain=domain,
        app_id=app_id,
        method=method,
        path=path,
        query=query,
        headers=headers,
        body=body,
        content_type=content_type,
        content_encoding=content_encoding,
    )


def _app_from_user_agent(headers: list[tuple[str, str]]) -> Optional[str]:
    # product token of the User-Agent, e.g. "WeatherApp/2.1 (...)" -> "WeatherApp"
    for name, value in headers:
        if name.lower() == "user-agent" and value.strip():
            return value.strip().split()[0].split("/")[0] or None
    return None


def serialize_flow_record(flow: Flow) -> str:
    record = {
        "id": flow.flow_id,
        "ts_ms": flow.timestamp,
        "os": flow.os.value,
        "app": flow.app_id,
        "method": flow.method,
        "host": flow.domain or None,
        "path": flow.path,
        "query": flow.query,
        "headers": [[name, value] for name, value in flow.headers],
        "body_b64": base64.b64encode(flow.body).decode("ascii"),
        "content_type": flow.content_type,
        "content_encoding": flow.content_encoding,
    }
    return json.dumps(record, separators=(",", ":"), sort_keys=False)


def parse_label_record(line: str) -> GroundTruthLabel:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FlowParseError("record", f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "id" not in obj:
        raise FlowParseError("id", "label record must be an object with an id")
    leaks = []
    for leak in obj.get("leaks", []):
        value = leak.get("value", "")
        if not isinstance(value, str) or not value:
            raise FlowParseError("leaks", "leak values must be non-empty strings")
        leaks.append((PiiType.from_names(leak["category"], leak["kind"]), value))
    return GroundTruthLabel(flow_id=obj["id"], leaks=leaks)


def serialize_label_record(label: GroundTruthLabel) -> str:
    leaks = []
    for pii, value in label.leaks:
        category, kind = pii.to_names()
        leaks.append({"category": category, "kind": kind, "value": value})
    return json.dumps({"id": label.flow_id, "leaks": leaks}, separators=(",", ":"))


def read_flow_log(lines: Iterable[str]) -> Iterator[Flow]:
    for line in lines:
        line = line.strip()
        if line:
            yield parse_flow_record(line)


def read_labels(lines: Iterable[str]) -> Iterator[GroundTruthLabel]:
    for line in lines:
        line = line.strip()
        if line:
            yield parse_label_record(line)


# ---------------------------------------------------------------------------
# key/value extraction
# ---------------------------------------------------------------------------

class _ByteOffsets:
    """Maps character offsets of a text to byte offsets of its UTF-8 encoding."""

    def __init__(self, text: str):
        self._ascii = text.isascii()
        if not self._ascii:
            self._prefix = [0]
            total = 0
            for ch in text:
                total += len(ch.encode("utf-8"))
                self._prefix.append(total)

    def at(self, char_offset: int) -> int:
        if self._ascii:
            return char_offset
        return self._prefix[char_offset]

    def span(self, char_start: int, char_end: int) -> Span:
        start = self.at(char_start)
        return Span(start, self.at(char_end) - start)


_HEADER_LINE_RE = re.compile(r"^([A-Za-z_][\w.\-]*):\s*(.*?)\s*$")
_ARROW_LINE_RE = re.compile(r"^([A-Za-z_][\w.\-]*)\s*=>\s*(.*?)\s*$")
_FORM_BODY_RE = re.compile(r"^[^&=\s]+=[^&\s]*(&[^&=\s]+=[^&\s]*)*$")
_XML_ATTR_RE = re.compile(r"([A-Za-z_][\w:.\-]*)\s*=\s*\"([^\"]*)\"")
_XML_LEAF_RE = re.compile(r"<([A-Za-z_][\w:.\-]*)(?:\s[^<>]*)?>([^<>]*)</\1\s*>")


def extract_kv_pairs(flow: Flow) -> list[KeyValuePair]:
    """Extract key/value pairs from the query string and decoded body.

    Populates and returns flow.kv_pairs. Unparseable body regions become
    Freeform pairs with an empty key; nothing raises.
    """
    text = flow.kv_source_text
    offsets = _ByteOffsets(text)
    pairs: list[KeyValuePair] = []

    if flow.query:
        _parse_form(flow.query, 0, KvSource.QUERY_PARAM, offsets, pairs)

    body = flow.decoded_text
    if body:
        base = len(flow.query)
        ctype = (flow.content_type or "").lower()
        stripped = body.lstrip()
        handled = False
        if "json" in ctype or stripped[:1] in ("{", "["):
            handled = _parse_json_body(body, base, offsets, pairs)
        if not handled and ("xml" in ctype or stripped.startswith("<")):
            handled = _parse_xml_body(body, base, offsets, pairs)
        if not handled and ("x-www-form-urlencoded" in ctype or _FORM_BODY_RE.match(body.strip())):
            _parse_form(body, base, KvSource.FORM_BODY, offsets, pairs)
            handled = True
        if not handled:
            _parse_lines(body, base, offsets, pairs)

    flow.kv_pairs = pairs
    return pairs


def _parse_form(text: str, base: int, source: KvSource, offsets: _ByteOffsets,
                pairs: list[KeyValuePair]) -> None:
    pos = 0
    for chunk in text.split("&"):
        if chunk:
            eq = chunk.find("=")
            if eq >= 0:
                key = chunk[:eq]
                value = chunk[eq + 1 :]
                vstart = base + pos + eq + 1
                pairs.append(
                    KeyValuePair(
                        key=key,
                        value=value,
                        source=source if key else KvSource.FREEFORM,
                        value_span=offsets.span(vstart, vstart + len(value)),
                        pair_span=offsets.span(base + pos, base + pos + len(chunk)),
                    )
                )
            else:
                pairs.append(
                    KeyValuePair(
                        key="",
                        value=chunk,
                        source=KvSource.FREEFORM,
                        value_span=offsets.span(base + pos, base + pos + len(chunk)),
                    )
                )
        pos += len(chunk) + 1


_JSON_WS = " \t\n\r"
_JSON_NUMBER_RE = re.compile(r"-?(?:0|[1-9]\d*)(?:\.\d+)?(?:[eE][+-]?\d+)?")


class _JsonWalk:
    """Minimal positional JSON reader: yields (dotted key, value, char span)."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.found: list[tuple[str, str, int, int]] = []

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in _JSON_WS:
            self.pos += 1

    def parse_value(self, prefix: str):
        self.skip_ws()
        if self.pos >= len(self.text):
            raise ValueError("truncated JSON")
        ch = self.text[self.pos]
        if ch == "{":
            self.parse_object(prefix)
        elif ch == "[":
            self.parse_array(prefix)
        elif ch == '"':
            decoded, end = scanstring(self.text, self.pos + 1)
            raw = self.text[self.pos + 1 : end - 1]
            # span covers the raw text between the quotes; when escapes make
            # the raw text differ from the decoded value, report the raw slice
            # so the span invariant holds
            value = decoded if raw == decoded else raw
            self.found.append((prefix, value, self.pos + 1, end - 1))
            self.pos = end
        else:
            match = _JSON_NUMBER_RE.match(self.text, self.pos)
            if match:
                self.found.append((prefix, match.group(), match.start(), match.end()))
                self.pos = match.end()
                return
            for literal in ("true", "false", "null"):
                if self.text.startswith(literal, self.pos):
                    self.found.append((prefix, literal, self.pos, self.pos + len(literal)))
                    self.pos += len(literal)
                    return
            raise ValueError(f"unexpected JSON at offset {self.pos}")

    def parse_object(self, prefix: str):
        self.pos += 1  # consume '{'
        self.skip_ws()
        if self.text[self.pos : self.pos + 1] == "}":
            self.pos += 1
            return
        while True:
            self.skip_ws()
            if self.text[self.pos : self.pos + 1] != '"':
                raise ValueError("object key must be a string")
            key, end = scanstring(self.text, self.pos + 1)
            self.pos = end
            self.skip_ws()
            if self.text[self.pos : self.pos + 1] != ":":
                raise ValueError("missing ':' in object")
            self.pos += 1
            self.parse_value(f"{prefix}.{key}" if prefix else key)
            self.skip_ws()
            ch = self.text[self.pos : self.pos + 1]
            if ch == ",":
                self.pos += 1
                continue
            if ch == "}":
                self.pos += 1
                return
            raise ValueError("missing ',' or '}' in object")

    def parse_array(self, prefix: str):
        # array elements keep the enclosing key; no indices in the path
        self.pos += 1
        self.skip_ws()
        if self.text[self.pos : self.pos + 1] == "]":
            self.pos += 1
            return
        while True:
            self.parse_value(prefix)
            self.skip_ws()
            ch = self.text[self.pos : self.pos + 1]
            if ch == ",":
                self.pos += 1
                continue
            if ch == "]":
                self.pos += 1
                return
            raise ValueError("missing ',' or ']' in array")


def _parse_json_body(body: str, base: int, offsets: _ByteOffsets,
                     pairs: list[KeyValuePair]) -> bool:
    walk = _JsonWalk(body)
    try:
        walk.parse_value("")
        walk.skip_ws()
        if walk.pos != len(body):
            return False
    except (ValueError, IndexError):
        return False
    for key, value, start, end in walk.found:
        pairs.append(
            KeyValuePair(
                key=key,
                value=value,
                source=KvSource.JSON_BODY if key else KvSource.FREEFORM,
                value_span=offsets.span(base + start, base + end),
            )
        )
    return True


def _parse_xml_body(body: str, base: int, offsets: _ByteOffsets,
                    pairs: list[KeyValuePair]) -> bool:
    found = False
    for match in _XML_ATTR_RE.finditer(body):
        # only attributes inside tags
        lt = body.rfind("<", 0, match.start())
        gt = body.rfind(">", 0, match.start())
        if lt < 0 or gt > lt:
            continue
        found = True
        pairs.append(
            KeyValuePair(
                key=match.group(1),
                value=match.group(2),
                source=KvSource.XML_BODY,
                value_span=offsets.span(base + match.start(2), base + match.end(2)),
            )
        )
    for match in _XML_LEAF_RE.finditer(body):
        value = match.group(2).strip()
        if not value:
            continue
        found = True
        vstart = match.start(2) + (len(match.group(2)) - len(match.group(2).lstrip()))
        pairs.append(
            KeyValuePair(
                key=match.group(1),
                value=value,
                source=KvSource.XML_BODY,
                value_span=offsets.span(base + vstart, base + vstart + len(value)),
            )
        )
    return found


def _parse_lines(body: str, base: int, offsets: _ByteOffsets,
                 pairs: list[KeyValuePair]) -> None:
    pos = 0
    for line in body.split("\n"):
        stripped = line.strip()
        if stripped:
            line_start = pos + line.find(stripped[0])
            match = _ARROW_LINE_RE.match(stripped)
            if match:
                vstart = base + line_start + match.start(2)
                pairs.append(
                    KeyValuePair(
                        key=match.group(1),
                        value=match.group(2),
                        source=KvSource.FREEFORM,
                        value_span=offsets.span(vstart, vstart + len(match.group(2))),
                    )
                )
            elif _HEADER_LINE_RE.match(stripped) and "=" not in stripped.split(":", 1)[0]:
                match = _HEADER_LINE_RE.match(stripped)
                vstart = base + line_start + match.start(2)
                pairs.append(
                    KeyValuePair(
                        key=match.group(1),
                        value=match.group(2),
                        source=KvSource.HEADER_LINE,
                        value_span=offsets.span(vstart, vstart + len(match.group(2))),
                    )
                )
            elif _FORM_BODY_RE.match(stripped):
                _parse_form(stripped, base + line_start, KvSource.FORM_BODY, offsets, pairs)
            else:
                pairs.append(
                    KeyValuePair(
                        key="",
                        value=stripped,
                        source=KvSource.FREEFORM,
                        value_span=offsets.span(
                            base + line_start, base + line_start + len(stripped)
                        ),
                    )
                )
        pos += len(line) + 1
