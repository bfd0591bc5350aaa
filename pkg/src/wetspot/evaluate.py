"""Evaluation metrics and the test-time undersampling protocol.

ROC AUC is the exact Mann-Whitney rank statistic (ties counted half), so it
is invariant under any strictly increasing rescaling of the scores. The
confusion-derived metrics are computed at an explicit probability
threshold; undefined ratios (e.g. precision with no positive predictions)
are reported as NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sampling import FeatureTable


@dataclass
class EvalReport:
    """Confusion counts and derived metrics for one model on one test set."""

    tp: int
    fp: int
    tn: int
    fn: int
    recall: float
    precision: float
    specificity: float
    f1: float
    roc_auc: float = math.nan
    n_pos: int = 0
    n_neg: int = 0
    seed: int | None = None

    def format(self) -> str:
        lines = [
            "eval_report: 1",
            f"n_pos: {self.n_pos}",
            f"n_neg: {self.n_neg}",
            f"seed: {self.seed if self.seed is not None else 'none'}",
            f"tp: {self.tp}",
            f"fp: {self.fp}",
            f"tn: {self.tn}",
            f"fn: {self.fn}",
            f"roc_auc: {self.roc_auc!r}",
            f"recall: {self.recall!r}",
            f"precision: {self.precision!r}",
            f"specificity: {self.specificity!r}",
            f"f1: {self.f1!r}",
        ]
        return "\n".join(lines) + "\n"


def _tied_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties averaged."""
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.float64)
    xs = x[order]
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0  # mean of 1-based ranks i+1..j+1
        i = j + 1
    return ranks


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Exact ROC AUC via rank sums: P(score_pos > score_neg) + 0.5 P(tie).

    Raises:
        ValueError: only one class present.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC AUC needs both classes present")
    ranks = _tied_ranks(s)
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def confusion_metrics(predictions: np.ndarray, labels: np.ndarray) -> EvalReport:
    """Counts and ratio metrics from hard 0/1 predictions.

    Raises:
        ValueError: length mismatch.
    """
    pred = np.asarray(predictions)
    y = np.asarray(labels)
    if pred.shape != y.shape:
        raise ValueError(f"predictions and labels differ in shape: {pred.shape} vs {y.shape}")
    tp = int(((pred == 1) & (y == 1)).sum())
    fp = int(((pred == 1) & (y == 0)).sum())
    tn = int(((pred == 0) & (y == 0)).sum())
    fn = int(((pred == 0) & (y == 1)).sum())

    recall = tp / (tp + fn) if (tp + fn) > 0 else math.nan
    precision = tp / (tp + fp) if (tp + fp) > 0 else math.nan
    specificity = tn / (tn + fp) if (tn + fp) > 0 else math.nan
    if math.isfinite(precision) and math.isfinite(recall) and (precision + recall) > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1 = math.nan
    return EvalReport(
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        recall=recall,
        precision=precision,
        specificity=specificity,
        f1=f1,
        n_pos=tp + fn,
        n_neg=tn + fp,
    )


def evaluate_scores(
    scores: np.ndarray,
    labels: np.ndarray,
    threshold: float = 0.5,
    seed: int | None = None,
) -> EvalReport:
    """Full report: rank AUC plus threshold metrics at the given cut."""
    report = confusion_metrics((np.asarray(scores) >= threshold).astype(np.int64), labels)
    report.roc_auc = roc_auc(scores, labels)
    report.seed = seed
    return report


def roc_curve_points(scores: np.ndarray, labels: np.ndarray) -> list[tuple[float, float, float]]:
    """(threshold, false positive rate, true positive rate) at every distinct score.

    Emitted so any operating point can be recovered from the report files.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC curve needs both classes present")
    order = np.argsort(-s, kind="stable")
    points = [(math.inf, 0.0, 0.0)]
    tp = fp = 0
    i = 0
    s_sorted = s[order]
    y_sorted = y[order]
    while i < len(s_sorted):
        j = i
        while j + 1 < len(s_sorted) and s_sorted[j + 1] == s_sorted[i]:
            j += 1
        tp += int((y_sorted[i : j + 1] == 1).sum())
        fp += int((y_sorted[i : j + 1] == 0).sum())
        points.append((float(s_sorted[i]), fp / n_neg, tp / n_pos))
        i = j + 1
    return points


def undersample_negatives(table: FeatureTable, seed: int = 0) -> FeatureTable:
    """Balance a test table by uniformly subsampling negatives.

    Keeps every positive row and a seeded sample of exactly n_pos negatives
    (row order preserved, no duplication).

    Raises:
        ValueError: fewer negatives than positives.
    """
    n_pos, n_neg = table.n_pos, table.n_neg
    if n_neg < n_pos:
        raise ValueError(f"cannot undersample: {n_neg} negatives < {n_pos} positives")
    neg_idx = np.nonzero(table.labels == 0)[0]
    rng = np.random.default_rng(seed)
    keep_neg = rng.choice(neg_idx, size=n_pos, replace=False)
    keep = np.sort(np.concatenate([np.nonzero(table.labels == 1)[0], keep_neg]))
    return table.subset(keep)
