"""leakwatch: PII leak detection, extraction and control for HTTP flow logs."""

from .engine import Engine, EngineConfig
from .flows import Flow, GroundTruthLabel, KeyValuePair, Os, parse_flow_record
from .pii import PiiCategory, PiiKind, PiiType
from .registry import ClassifierKey, Metrics, PredictionRecord, Registry
from .rewriter import RewriteOutcome, RewriteRule
from .tokenizer import TokenizerConfig, prepare_flow

__version__ = "0.1.0"

__all__ = [
    "Engine",
    "EngineConfig",
    "Flow",
    "GroundTruthLabel",
    "KeyValuePair",
    "Os",
    "parse_flow_record",
    "PiiCategory",
    "PiiKind",
    "PiiType",
    "ClassifierKey",
    "Metrics",
    "PredictionRecord",
    "Registry",
    "RewriteOutcome",
    "RewriteRule",
    "TokenizerConfig",
    "prepare_flow",
    "__version__",
]
