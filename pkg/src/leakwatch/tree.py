"""C4.5 decision tree over binary word-presence features.

Features are binary, so splits are plain present/absent tests; the
continuous-threshold machinery of full C4.5 is not needed. Split selection
maximizes gain ratio among features with positive information gain, with ties
broken by lowest feature index so training is deterministic. Pruning is the
standard pessimistic (confidence-factor) subtree replacement.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Optional, Union

import numpy as np

from .features import FeatureVector, FeatureVocabulary, TrainingSet

_GAIN_EPS = 1e-12


@dataclass
class Leaf:
    predicted_positive: bool
    confidence: float  # Laplace-smoothed majority fraction
    n_train_samples: int
    n_errors: float = 0.0


@dataclass
class Internal:
    feature_index: int
    feature_word: str
    present_child: "TreeNode"
    absent_child: "TreeNode"


TreeNode = Union[Leaf, Internal]


@dataclass
class TrainConfig:
    min_leaf_samples: int = 2
    pruning_confidence: float = 0.25
    rng_seed: int = 0

    def __post_init__(self):
        if self.min_leaf_samples < 1:
            raise ValueError("min_leaf_samples must be >= 1")
        if not 0 < self.pruning_confidence < 1:
            raise ValueError("pruning_confidence must be in (0, 1)")


@dataclass
class DecisionTree:
    root: TreeNode
    vocab_hash: str
    train_stats: dict = field(default_factory=dict)

    def depth(self) -> int:
        def walk(node):
            if isinstance(node, Leaf):
                return 0
            return 1 + max(walk(node.present_child), walk(node.absent_child))

        return walk(self.root)

    def n_leaves(self) -> int:
        def walk(node):
            if isinstance(node, Leaf):
                return 1
            return walk(node.present_child) + walk(node.absent_child)

        return walk(self.root)


class VocabularyMismatch(ValueError):
    pass


def _entropy(pos: int, neg: int) -> float:
    n = pos + neg
    if n == 0 or pos == 0 or neg == 0:
        return 0.0
    pp = pos / n
    pn = neg / n
    return -(pp * math.log2(pp) + pn * math.log2(pn))


def gain_and_split_info(pos1: int, neg1: int, pos0: int, neg0: int) -> tuple[float, float]:
    """Information gain and split info of a present/absent partition.

    Shared by the learner and useful for brute-force verification; counts are
    (positives, negatives) on the present side and the absent side.
    """
    n1 = pos1 + neg1
    n0 = pos0 + neg0
    n = n1 + n0
    if n == 0 or n1 == 0 or n0 == 0:
        return 0.0, 0.0
    parent = _entropy(pos1 + pos0, neg1 + neg0)
    children = (n1 / n) * _entropy(pos1, neg1) + (n0 / n) * _entropy(pos0, neg0)
    split_info = -((n1 / n) * math.log2(n1 / n) + (n0 / n) * math.log2(n0 / n))
    return parent - children, split_info


def _best_feature(x: np.ndarray, y: np.ndarray, available: np.ndarray) -> Optional[int]:
    """Feature with the highest gain ratio among positive-gain candidates;
    ties go to the lowest index. None when nothing has positive gain."""
    n = len(y)
    n_pos = int(y.sum())
    best_index = None
    best_ratio = -1.0
    for j in range(x.shape[1]):
        if not available[j]:
            continue
        present = x[:, j] != 0
        n1 = int(present.sum())
        n0 = n - n1
        if n1 == 0 or n0 == 0:
            continue
        pos1 = int(y[present].sum())
        pos0 = n_pos - pos1
        gain, split_info = gain_and_split_info(pos1, n1 - pos1, pos0, n0 - pos0)
        if gain <= _GAIN_EPS or split_info <= 0.0:
            continue
        ratio = gain / split_info
        if ratio > best_ratio:
            best_ratio = ratio
            best_index = j
    return best_index


def _make_leaf(y: np.ndarray) -> Leaf:
    n = len(y)
    n_pos = int(y.sum())
    n_neg = n - n_pos
    positive = n_pos > n_neg  # exact tie predicts negative
    n_majority = max(n_pos, n_neg)
    return Leaf(
        predicted_positive=positive,
        confidence=(n_majority + 1) / (n + 2),
        n_train_samples=n,
        n_errors=float(n - n_majority),
    )


def _pessimistic_errors(n: float, e: float, cf: float) -> float:
    """Upper confidence bound on the error count of a leaf (C4.5 style)."""
    if n <= 0:
        return 0.0
    if e < 1:
        base = n * (1 - cf ** (1 / n))
        if e > 0:
            return base + e * (_pessimistic_errors(n, 1.0, cf) - base)
        return base
    if e + 0.5 >= n:
        return max(n - e, 0.0)
    z = NormalDist().inv_cdf(1 - cf)
    f = (e + 0.5) / n
    r = (f + z * z / (2 * n) + z * math.sqrt(f / n - f * f / n + z * z / (4 * n * n))) / (
        1 + z * z / n
    )
    return r * n - e


def _subtree_pessimistic(node: TreeNode, cf: float) -> float:
    if isinstance(node, Leaf):
        return node.n_errors + _pessimistic_errors(node.n_train_samples, node.n_errors, cf)
    return _subtree_pessimistic(node.present_child, cf) + _subtree_pessimistic(
        node.absent_child, cf
    )


def _grow(x: np.ndarray, y: np.ndarray, available: np.ndarray, cfg: TrainConfig) -> TreeNode:
    n = len(y)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == n or n < 2 * cfg.min_leaf_samples:
        return _make_leaf(y)
    j = _best_feature(x, y, available)
    if j is None:
        return _make_leaf(y)
    present = x[:, j] != 0
    child_available = available.copy()
    child_available[j] = False  # a binary feature is spent after one test
    node = Internal(
        feature_index=j,
        feature_word="",
        present_child=_grow(x[present], y[present], child_available, cfg),
        absent_child=_grow(x[~present], y[~present], child_available, cfg),
    )
    # pessimistic subtree-replacement pruning, bottom-up
    leaf = _make_leaf(y)
    leaf_est = leaf.n_errors + _pessimistic_errors(n, leaf.n_errors, cfg.pruning_confidence)
    subtree_est = _subtree_pessimistic(node, cfg.pruning_confidence)
    if leaf_est <= subtree_est + 1e-9:
        return leaf
    return node


def train(training_set: TrainingSet, cfg: TrainConfig | None = None,
          vocab: FeatureVocabulary | None = None) -> DecisionTree:
    """Train a tree; raises ValueError on an empty training set."""
    cfg = cfg or TrainConfig()
    x, y = training_set.matrix()
    if len(y) == 0:
        raise ValueError("cannot train on an empty training set")
    started = time.perf_counter()
    available = np.ones(x.shape[1], dtype=bool)
    root = _grow(x, y, available, cfg)
    if vocab is not None:
        _attach_words(root, vocab)
    millis = (time.perf_counter() - started) * 1000.0
    return DecisionTree(
        root=root,
        vocab_hash=vocab.vocab_hash if vocab is not None else "",
        train_stats={
            "n_pos": int(y.sum()),
            "n_neg": int(len(y) - y.sum()),
            "train_millis": millis,
        },
    )


def _attach_words(node: TreeNode, vocab: FeatureVocabulary) -> None:
    if isinstance(node, Internal):
        node.feature_word = vocab.words[node.feature_index]
        _attach_words(node.present_child, vocab)
        _attach_words(node.absent_child, vocab)


def predict(tree: DecisionTree, vector: FeatureVector,
            vocab_hash: str | None = None) -> tuple[bool, float]:
    """Walk the tree; returns (positive, positive-class score)."""
    if vocab_hash is not None and tree.vocab_hash and vocab_hash != tree.vocab_hash:
        raise VocabularyMismatch(
            f"vector vocabulary {vocab_hash} does not match tree {tree.vocab_hash}"
        )
    node = tree.root
    bits = vector.bits
    while isinstance(node, Internal):
        if node.feature_index >= len(bits):
            raise VocabularyMismatch("feature vector shorter than the tree expects")
        node = node.present_child if bits[node.feature_index] else node.absent_child
    score = node.confidence if node.predicted_positive else 1.0 - node.confidence
    return node.predicted_positive, score


def root_word(tree: DecisionTree) -> Optional[str]:
    if isinstance(tree.root, Internal):
        return tree.root.feature_word
    return None


# ---------------------------------------------------------------------------
# JSON persistence
# ---------------------------------------------------------------------------

def _node_to_json(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {
            "leaf": True,
            "positive": node.predicted_positive,
            "confidence": node.confidence,
            "n": node.n_train_samples,
            "errors": node.n_errors,
        }
    return {
        "leaf": False,
        "feature_index": node.feature_index,
        "word": node.feature_word,
        "present": _node_to_json(node.present_child),
        "absent": _node_to_json(node.absent_child),
    }


def _node_from_json(obj: dict) -> TreeNode:
    if obj["leaf"]:
        return Leaf(
            predicted_positive=obj["positive"],
            confidence=obj["confidence"],
            n_train_samples=obj["n"],
            n_errors=obj.get("errors", 0.0),
        )
    return Internal(
        feature_index=obj["feature_index"],
        feature_word=obj["word"],
        present_child=_node_from_json(obj["present"]),
        absent_child=_node_from_json(obj["absent"]),
    )


def tree_to_json(tree: DecisionTree) -> dict:
    return {
        "root": _node_to_json(tree.root),
        "vocab_hash": tree.vocab_hash,
        "stats": tree.train_stats,
    }


def tree_from_json(obj: dict) -> DecisionTree:
    return DecisionTree(
        root=_node_from_json(obj["root"]),
        vocab_hash=obj.get("vocab_hash", ""),
        train_stats=obj.get("stats", {}),
    )


def dump_tree(tree: DecisionTree) -> str:
    return json.dumps(tree_to_json(tree))


def load_tree(text: str) -> DecisionTree:
    return tree_from_json(json.loads(text))
