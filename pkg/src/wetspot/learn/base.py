"""Model container, balanced class weights, and model file round-tripping.

A trained model is a family tag, the ordered feature names it expects, the
train-set standardization statistics, and a family-specific parameter
payload. Serialization is a versioned JSON container whose floats are
written at full ``repr`` precision, so a reloaded model predicts
bit-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

MODEL_MAGIC = "wetspot.model"
MODEL_VERSION = 1

FAMILIES = ("logistic", "linear_svm", "random_forest", "extra_trees", "gradient_boosting")


class ModelFormatError(ValueError):
    """Model file is not a readable wetspot model container."""


class ConvergenceError(RuntimeError):
    """An iterative fit failed to reach its gradient tolerance."""


class ClassWeights(NamedTuple):
    w_pos: float
    w_neg: float


def balanced_weights(labels: np.ndarray) -> ClassWeights:
    """Class weights inversely proportional to class frequency.

    w_c = n_total / (2 * n_c), so each class contributes half the total
    weight regardless of imbalance.

    Raises:
        ValueError: only one class present.
    """
    y = np.asarray(labels)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("balanced weights need both classes present")
    n = n_pos + n_neg
    return ClassWeights(n / (2.0 * n_pos), n / (2.0 * n_neg))


def sample_weights(labels: np.ndarray, weights: ClassWeights) -> np.ndarray:
    """Per-row weights from class weights."""
    y = np.asarray(labels)
    return np.where(y == 1, weights.w_pos, weights.w_neg).astype(np.float64)


@dataclass
class TrainedModel:
    """A fitted classifier with its feature contract and scaler.

    ``params`` holds the family payload: weights and bias for the linear
    families, tree arrays plus learning rate and initial score for the
    ensembles. Standardization statistics always come from the training
    split and are applied inside prediction.
    """

    family: str
    feature_names: list[str]
    feature_means: np.ndarray
    feature_scales: np.ndarray
    params: dict

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")
        self.feature_means = np.asarray(self.feature_means, dtype=np.float64)
        self.feature_scales = np.asarray(self.feature_scales, dtype=np.float64)

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.feature_means) / self.feature_scales


def fit_standardizer(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and scales; zero-variance columns get unit scale."""
    x = np.asarray(features, dtype=np.float64)
    means = x.mean(axis=0)
    scales = x.std(axis=0)
    scales[scales == 0.0] = 1.0
    return means, scales


def _sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def tree_leaf_values(tree: dict, x: np.ndarray) -> np.ndarray:
    """Leaf payloads reached by the rows of ``x`` in one tree.

    Trees are stored as parallel node arrays; internal nodes have
    feature >= 0 and route left on value <= threshold.
    """
    feature = np.asarray(tree["feature"], dtype=np.int64)
    threshold = np.asarray(tree["threshold"], dtype=np.float64)
    left = np.asarray(tree["left"], dtype=np.int64)
    right = np.asarray(tree["right"], dtype=np.int64)
    value = np.asarray(tree["value"], dtype=np.float64)

    idx = np.zeros(len(x), dtype=np.int64)
    active = feature[idx] >= 0
    while active.any():
        ai = np.nonzero(active)[0]
        node = idx[ai]
        go_left = x[ai, feature[node]] <= threshold[node]
        idx[ai] = np.where(go_left, left[node], right[node])
        active[ai] = feature[idx[ai]] >= 0
    return value[idx]


def _raw_scores(model: TrainedModel, xs: np.ndarray) -> np.ndarray:
    p = model.params
    if model.family == "logistic":
        return xs @ np.asarray(p["coef"]) + p["bias"]
    if model.family == "linear_svm":
        return xs @ np.asarray(p["coef"]) + p["bias"]
    if model.family in ("random_forest", "extra_trees"):
        probs = np.zeros(len(xs))
        for tree in p["trees"]:
            probs += tree_leaf_values(tree, xs)
        return probs / len(p["trees"])
    if model.family == "gradient_boosting":
        score = np.full(len(xs), p["base_score"], dtype=np.float64)
        for tree in p["trees"]:
            score += p["learning_rate"] * tree_leaf_values(tree, xs)
        return score
    raise ValueError(f"unknown model family {model.family!r}")


def predict_proba(model: TrainedModel, feature_vector: np.ndarray) -> float | np.ndarray:
    """Positive-class probability for one feature vector or a matrix of them.

    Raises:
        ValueError: vector length does not match the model's feature names.
    """
    x = np.asarray(feature_vector, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != len(model.feature_names):
        raise ValueError(
            f"expected {len(model.feature_names)} features, got {x.shape[1]}"
        )
    xs = model.standardize(x)
    raw = _raw_scores(model, xs)
    if model.family in ("random_forest", "extra_trees"):
        probs = raw
    elif model.family == "linear_svm":
        p = model.params
        z = (raw - p["cal_mean"]) / p["cal_scale"]
        probs = _sigmoid(p["cal_a"] * z + p["cal_b"])
    else:
        probs = _sigmoid(raw)
    return float(probs[0]) if single else probs


def predict_label(model: TrainedModel, feature_vector: np.ndarray, threshold: float = 0.5):
    """Class prediction at a probability threshold (default 0.5)."""
    proba = predict_proba(model, feature_vector)
    if np.ndim(proba) == 0:
        return int(proba >= threshold)
    return (proba >= threshold).astype(np.int64)


def _to_jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    return obj


def save_model(model: TrainedModel, path) -> None:
    """Write the model as a versioned JSON container."""
    doc = {
        "magic": MODEL_MAGIC,
        "version": MODEL_VERSION,
        "family": model.family,
        "feature_names": list(model.feature_names),
        "feature_means": _to_jsonable(model.feature_means),
        "feature_scales": _to_jsonable(model.feature_scales),
        "params": _to_jsonable(model.params),
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_model(path) -> TrainedModel:
    """Read a model container written by save_model.

    Raises:
        ModelFormatError: truncated file, wrong magic, or unknown version.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: not a readable model file") from exc
    if not isinstance(doc, dict) or doc.get("magic") != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: missing model magic header")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported model version {doc.get('version')!r}")
    try:
        return TrainedModel(
            family=doc["family"],
            feature_names=list(doc["feature_names"]),
            feature_means=np.asarray(doc["feature_means"], dtype=np.float64),
            feature_scales=np.asarray(doc["feature_scales"], dtype=np.float64),
            params=doc["params"],
        )
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model payload") from exc
