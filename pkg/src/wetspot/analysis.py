"""Feature screening: univariate logistic P-values, correlations, MI.

Each candidate feature gets a Wald P-value from a univariate logistic fit
and a mutual-information score against the labels; highly correlated pairs
(|Pearson r| above a cutoff) are thinned by keeping the member with the
higher MI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .sampling import FeatureTable

DEFAULT_R_THRESHOLD = 0.85
MI_BINS = 10

_IRLS_TOL = 1e-8
_IRLS_MAX_ITER = 100
# |slope| on a standardized feature beyond which the fit has effectively
# diverged, signalling perfect separation.
_SEPARATION_COEF = 30.0


class UnivariateResult(NamedTuple):
    coef: float
    stderr: float
    p_value: float
    separated: bool


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _normal_two_sided_p(z: float) -> float:
    return math.erfc(abs(z) / math.sqrt(2.0))


def univariate_logistic(feature_column: np.ndarray, labels: np.ndarray) -> UnivariateResult:
    """Wald test of one feature against binary labels.

    The feature is standardized, then intercept and slope are fitted by
    IRLS; the P-value is the two-sided normal tail of coef/stderr. A
    diverging slope is reported as separation with P = 0; a constant
    feature carries no information and gets P = 1.

    Raises:
        ValueError: fewer than two samples of either class.
    """
    x = np.asarray(feature_column, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("feature column and labels must be equal-length vectors")
    if (y == 1).sum() < 2 or (y == 0).sum() < 2:
        raise ValueError("need at least two samples of each class")

    sd = x.std()
    if sd == 0.0:
        return UnivariateResult(0.0, math.inf, 1.0, False)
    xs = (x - x.mean()) / sd

    design = np.column_stack([np.ones_like(xs), xs])
    beta = np.zeros(2)
    for _ in range(_IRLS_MAX_ITER):
        eta = design @ beta
        mu = _sigmoid(eta)
        w = mu * (1.0 - mu)
        grad = design.T @ (y - mu)
        hess = design.T @ (design * w[:, None])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        beta = beta + step
        if np.abs(step).max() < _IRLS_TOL:
            break

    coef = float(beta[1])
    if abs(coef) > _SEPARATION_COEF or not math.isfinite(coef):
        return UnivariateResult(coef, math.nan, 0.0, True)

    eta = design @ beta
    mu = _sigmoid(eta)
    w = mu * (1.0 - mu)
    hess = design.T @ (design * w[:, None])
    try:
        cov = np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        return UnivariateResult(coef, math.nan, 0.0, True)
    stderr = float(math.sqrt(max(cov[1, 1], 0.0)))
    if stderr == 0.0:
        return UnivariateResult(coef, 0.0, 0.0, True)
    z = coef / stderr
    return UnivariateResult(coef, stderr, _normal_two_sided_p(z), False)


def pearson_matrix(features: np.ndarray) -> np.ndarray:
    """Sample Pearson correlations between columns.

    Entries involving a zero-variance column are NaN.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need a 2-D matrix with at least two rows")
    centered = x - x.mean(axis=0)
    norms = np.sqrt((centered * centered).sum(axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = centered / norms
        corr = unit.T @ unit
    corr[norms == 0.0, :] = np.nan
    corr[:, norms == 0.0] = np.nan
    ok = norms > 0.0
    corr[np.ix_(ok, ok)] = np.clip(corr[np.ix_(ok, ok)], -1.0, 1.0)
    np.fill_diagonal(corr, np.where(ok, 1.0, np.nan))
    return corr


def _equal_frequency_bins(x: np.ndarray, bins: int) -> np.ndarray:
    """Bin index per sample from <= bins equal-frequency bins, ties merged."""
    edges = np.quantile(x, np.linspace(0.0, 1.0, bins + 1)[1:-1])
    edges = np.unique(edges)
    return np.searchsorted(edges, x, side="right")


def mutual_information(feature_column: np.ndarray, labels: np.ndarray, bins: int = MI_BINS) -> float:
    """Mutual information (nats) between a discretized feature and labels.

    The feature is cut into at most ``bins`` equal-frequency bins (tied
    quantiles merged); zero for a constant feature.
    """
    x = np.asarray(feature_column, dtype=np.float64)
    y = np.asarray(labels)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("need equal-length vectors with at least two rows")
    b = _equal_frequency_bins(x, bins)
    n = len(x)
    mi = 0.0
    for bv in np.unique(b):
        in_b = b == bv
        p_b = in_b.sum() / n
        for yv in (0, 1):
            p_by = (in_b & (y == yv)).sum() / n
            if p_by == 0.0:
                continue
            p_y = (y == yv).sum() / n
            mi += p_by * math.log(p_by / (p_b * p_y))
    return max(mi, 0.0)


def redundancy_filter(
    table: FeatureTable,
    labels: np.ndarray | None = None,
    r_threshold: float = DEFAULT_R_THRESHOLD,
) -> list[str]:
    """Thin out highly correlated features, keeping the higher-MI member.

    Pairs with |r| above the threshold are visited in order of descending
    |r|; in each pair still fully alive the member with the lower mutual
    information against the labels is dropped. Survivors come back in the
    table's original feature order.
    """
    y = table.labels if labels is None else np.asarray(labels)
    names = table.feature_names
    corr = pearson_matrix(table.features)
    mi = [mutual_information(table.features[:, i], y) for i in range(len(names))]

    pairs = []
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            r = corr[i, j]
            if math.isfinite(r) and abs(r) > r_threshold:
                pairs.append((-abs(r), i, j))
    pairs.sort()

    alive = [True] * len(names)
    for _, i, j in pairs:
        if not (alive[i] and alive[j]):
            continue
        if mi[i] < mi[j]:
            alive[i] = False
        elif mi[j] < mi[i]:
            alive[j] = False
        else:
            alive[j] = False  # deterministic tie rule: keep the earlier column
    return [n for n, a in zip(names, alive) if a]


@dataclass
class ScreeningReport:
    """Per-feature screening statistics plus the surviving feature list."""

    feature_names: list[str]
    coefs: list[float]
    stderrs: list[float]
    p_values: list[float]
    separated: list[bool]
    mi_scores: list[float]
    pearson: np.ndarray
    selected: list[str]

    def format(self) -> str:
        """Key-value text rendering for audit files."""
        lines = ["screening_report: 1"]
        for i, name in enumerate(self.feature_names):
            lines.append(f"feature: {name}")
            lines.append(f"  coef: {self.coefs[i]!r}")
            lines.append(f"  stderr: {self.stderrs[i]!r}")
            lines.append(f"  p_value: {self.p_values[i]!r}")
            lines.append(f"  separated: {str(self.separated[i]).lower()}")
            lines.append(f"  mutual_information: {self.mi_scores[i]!r}")
        lines.append("pearson_matrix:")
        for i, name in enumerate(self.feature_names):
            row = " ".join(f"{v:.6f}" for v in self.pearson[i])
            lines.append(f"  {name}: {row}")
        lines.append(f"selected: {','.join(self.selected)}")
        return "\n".join(lines) + "\n"


def screen_features(
    table: FeatureTable,
    p_threshold: float | None = 0.05,
    r_threshold: float = DEFAULT_R_THRESHOLD,
    forced_features: list[str] | None = None,
) -> ScreeningReport:
    """Full screening pass over a feature table.

    Computes univariate statistics for every feature, then selects either
    the forced list (reproduction runs) or the features passing the
    P-value threshold, thinned by the redundancy filter.
    """
    names = table.feature_names
    results = [univariate_logistic(table.features[:, i], table.labels) for i in range(len(names))]
    mi = [mutual_information(table.features[:, i], table.labels) for i in range(len(names))]
    corr = pearson_matrix(table.features)

    if forced_features is not None:
        unknown = [f for f in forced_features if f not in names]
        if unknown:
            raise ValueError(f"forced features not in table: {unknown}")
        selected = list(forced_features)
    else:
        keep = [
            n
            for n, res in zip(names, results)
            if p_threshold is None or res.p_value <= p_threshold
        ]
        if keep:
            idx = [names.index(n) for n in keep]
            sub = FeatureTable(keep, table.xy, table.labels, table.features[:, idx])
            selected = redundancy_filter(sub, table.labels, r_threshold)
        else:
            selected = []

    return ScreeningReport(
        feature_names=list(names),
        coefs=[r.coef for r in results],
        stderrs=[r.stderr for r in results],
        p_values=[r.p_value for r in results],
        separated=[r.separated for r in results],
        mi_scores=mi,
        pearson=corr,
        selected=selected,
    )
