"""Payload decoding and word tokenization of flows.

Flows carry no standard token separator, so splitting uses a set of hard
delimiters plus contextual handling of ':' (kept inside MAC-address and
time-of-day shaped tokens, split otherwise) and of the '=>' arrow separator
some trackers use between keys and values.
"""
from __future__ import annotations

import gzip
import re
import urllib.parse
import zlib
from dataclasses import dataclass, field

from .flows import Flow, Span

HARD_DELIMITERS = set(",;/(){}[]") | set(" \t\r\n\v\f") | set("\"'") | set("&?=") | set("<>")
AMBIGUOUS_DELIMITERS = {":"}


@dataclass
class TokenizerConfig:
    hard_delimiters: frozenset[str] = frozenset(HARD_DELIMITERS)
    ambiguous_delimiters: frozenset[str] = frozenset(AMBIGUOUS_DELIMITERS)
    lowercase: bool = True

    def __post_init__(self):
        if self.hard_delimiters & self.ambiguous_delimiters:
            raise ValueError("hard and ambiguous delimiter sets must be disjoint")


@dataclass
class TokenizedFlow:
    flow_id: str
    words: set[str]
    word_positions: dict[str, list[Span]]
    # words in order of appearance; used for PII-adjacency checks
    ordered: list[str] = field(default_factory=list)


_MAC_RE = re.compile(r"^[0-9A-Fa-f]{2}(?::[0-9A-Fa-f]{2}){5}$")
_TIME_RE = re.compile(r"^\d{1,2}:\d{2}(?::\d{2})?$")


def decode_body(flow: Flow) -> str:
    """Decode the body per content-encoding/content-type into flow.decoded_text.

    gzip is inflated first, percent-encoding is undone for urlencoded content,
    and the result is read as UTF-8 with invalid bytes replaced. A corrupt
    gzip stream falls back to latin-1 over the raw bytes and marks the flow
    decode-degraded.
    """
    raw = flow.body
    encoding = (flow.content_encoding or "").lower()
    if encoding in ("gzip", "x-gzip", "deflate"):
        try:
            raw = gzip.decompress(raw) if encoding != "deflate" else zlib.decompress(raw)
        except (OSError, EOFError, zlib.error):
            flow.decoded_text = raw.decode("latin-1")
            flow.decode_degraded = True
            return flow.decoded_text
    text = raw.decode("utf-8", errors="replace")
    ctype = (flow.content_type or "").lower()
    if "x-www-form-urlencoded" in ctype:
        text = urllib.parse.unquote(text)
    flow.decoded_text = text
    return text


def flow_text(flow: Flow) -> str:
    """Canonical text rendering tokenized for features: request line, headers,
    query, then decoded body."""
    lines = [f"{flow.method} {flow.path}"]
    lines.extend(f"{name}: {value}" for name, value in flow.headers)
    lines.append(flow.query)
    lines.append(flow.decoded_text)
    return "\n".join(lines)


def tokenize(flow: Flow, cfg: TokenizerConfig | None = None) -> TokenizedFlow:
    cfg = cfg or TokenizerConfig()
    text = flow_text(flow)
    tokenized = tokenize_text(flow.flow_id, text, cfg)
    flow.tokenized = tokenized
    return tokenized


def tokenize_text(flow_id: str, text: str, cfg: TokenizerConfig | None = None) -> TokenizedFlow:
    cfg = cfg or TokenizerConfig()
    # '=>' acts as one compound separator; blank it out position-preservingly
    scan = text.replace("=>", "  ")
    ascii_only = scan.isascii()
    byte_prefix: list[int] | None = None
    if not ascii_only:
        byte_prefix = [0]
        total = 0
        for ch in scan:
            total += len(ch.encode("utf-8"))
            byte_prefix.append(total)

    words: set[str] = set()
    positions: dict[str, list[Span]] = {}
    ordered: list[str] = []
    hard = cfg.hard_delimiters

    start = None
    for i, ch in enumerate(scan + "\x00"):
        is_delim = ch in hard or ch == "\x00"
        if is_delim:
            if start is not None:
                _emit_segment(scan, start, i, cfg, words, positions, ordered,
                              ascii_only, byte_prefix)
                start = None
        elif start is None:
            start = i
    return TokenizedFlow(flow_id=flow_id, words=words, word_positions=positions,
                         ordered=ordered)


def _emit_segment(text: str, start: int, end: int, cfg: TokenizerConfig,
                  words: set[str], positions: dict[str, list[Span]],
                  ordered: list[str], ascii_only: bool,
                  byte_prefix: list[int] | None) -> None:
    segment = text[start:end]
    if ":" in segment and ":" in cfg.ambiguous_delimiters:
        if not (_MAC_RE.match(segment) or _TIME_RE.match(segment)):
            # the colon splits here (JSON-style key:value, header names, ...)
            pos = start
            for part in segment.split(":"):
                if part:
                    _emit_word(text, pos, pos + len(part), cfg, words, positions,
                               ordered, ascii_only, byte_prefix)
                pos += len(part) + 1
            return
    _emit_word(text, start, end, cfg, words, positions, ordered, ascii_only, byte_prefix)


def _emit_word(text: str, start: int, end: int, cfg: TokenizerConfig,
               words: set[str], positions: dict[str, list[Span]],
               ordered: list[str], ascii_only: bool,
               byte_prefix: list[int] | None) -> None:
    word = text[start:end]
    if cfg.lowercase:
        word = word.lower()
    if not word:
        return
    if ascii_only:
        span = Span(start, end - start)
    else:
        span = Span(byte_prefix[start], byte_prefix[end] - byte_prefix[start])
    words.add(word)
    positions.setdefault(word, []).append(span)
    ordered.append(word)


def prepare_flow(flow: Flow, cfg: TokenizerConfig | None = None) -> Flow:
    """Run the full enrichment pipeline on a freshly parsed flow:
    decode the body, extract key/value pairs, tokenize."""
    from .flows import extract_kv_pairs

    decode_body(flow)
    extract_kv_pairs(flow)
    tokenize(flow, cfg)
    return flow
