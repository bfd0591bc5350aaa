"""Tree ensembles: random forest, extra trees, gradient boosting.

Per-tree randomness derives deterministically from (master seed, tree
index), so ensembles are reproducible and trees could train concurrently
without changing the result. Forest and extra-trees probabilities are the
mean of leaf probabilities; boosting sums Newton-step leaf values on the
log-odds scale.
"""

from __future__ import annotations

import math

import numpy as np

from ..sampling import FeatureTable
from .base import (
    ClassWeights,
    TrainedModel,
    _sigmoid,
    balanced_weights,
    fit_standardizer,
    sample_weights,
)
from .tree import TreeParams, build_tree

N_TREES = 200
GB_DEPTH = 3
GB_LEARNING_RATE = 0.1


def _tree_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def _sqrt_features(n_features: int) -> int:
    return max(1, int(math.sqrt(n_features)))


def fit_random_forest(
    table: FeatureTable,
    weights: ClassWeights | None = None,
    n_trees: int = N_TREES,
    max_features: int | str = "sqrt",
    seed: int = 0,
    max_depth: int | None = None,
    min_samples_leaf: int = 1,
) -> TrainedModel:
    """Random forest: Gini CART trees on bootstrap resamples with per-split
    feature subsampling."""
    if weights is None:
        weights = balanced_weights(table.labels)
    means, scales = fit_standardizer(table.features)
    xs = (table.features - means) / scales
    y = table.labels.astype(np.float64)
    sw = sample_weights(table.labels, weights)
    n = len(y)

    if max_features == "sqrt":
        max_features = _sqrt_features(xs.shape[1])
    params = TreeParams(
        max_depth=max_depth,
        min_samples_leaf=min_samples_leaf,
        max_features=max_features,
        split_mode="midpoint",
        criterion="gini",
    )

    trees = []
    for i in range(n_trees):
        rng = _tree_rng(seed, i)
        boot = rng.integers(0, n, size=n)
        counts = np.bincount(boot, minlength=n).astype(np.float64)
        rows = np.nonzero(counts > 0)[0]
        tree = build_tree(xs[rows], y[rows], sw[rows] * counts[rows], params, rng)
        trees.append(tree.as_params())

    return TrainedModel(
        family="random_forest",
        feature_names=list(table.feature_names),
        feature_means=means,
        feature_scales=scales,
        params={"trees": trees},
    )


def fit_extra_trees(
    table: FeatureTable,
    weights: ClassWeights | None = None,
    n_trees: int = N_TREES,
    seed: int = 0,
    max_depth: int | None = None,
    min_samples_leaf: int = 1,
) -> TrainedModel:
    """Extra trees: no bootstrap, random thresholds per candidate feature."""
    if weights is None:
        weights = balanced_weights(table.labels)
    means, scales = fit_standardizer(table.features)
    xs = (table.features - means) / scales
    y = table.labels.astype(np.float64)
    sw = sample_weights(table.labels, weights)

    params = TreeParams(
        max_depth=max_depth,
        min_samples_leaf=min_samples_leaf,
        max_features=_sqrt_features(xs.shape[1]),
        split_mode="random",
        random_thresholds=1,
        criterion="gini",
    )
    trees = []
    for i in range(n_trees):
        tree = build_tree(xs, y, sw, params, _tree_rng(seed, i))
        trees.append(tree.as_params())

    return TrainedModel(
        family="extra_trees",
        feature_names=list(table.feature_names),
        feature_means=means,
        feature_scales=scales,
        params={"trees": trees},
    )


def fit_gradient_boosting(
    table: FeatureTable,
    weights: ClassWeights | None = None,
    n_trees: int = N_TREES,
    depth: int = GB_DEPTH,
    learning_rate: float = GB_LEARNING_RATE,
    seed: int = 0,
    min_samples_leaf: int = 1,
) -> TrainedModel:
    """Gradient boosting on the binomial deviance.

    Starts from the weighted log-odds; each stage fits a variance-split
    tree to the residuals (y - p) and replaces leaf values with a Newton
    step sum(w*(y-p)) / sum(w*p*(1-p)). The per-stage weighted training
    deviance is recorded in the model parameters.
    """
    if weights is None:
        weights = balanced_weights(table.labels)
    means, scales = fit_standardizer(table.features)
    xs = (table.features - means) / scales
    y = table.labels.astype(np.float64)
    sw = sample_weights(table.labels, weights)

    w_pos = float((sw * y).sum())
    w_neg = float((sw * (1.0 - y)).sum())
    if w_pos == 0.0 or w_neg == 0.0:
        raise ValueError("gradient boosting needs both classes present")
    base_score = math.log(w_pos / w_neg)

    params = TreeParams(
        max_depth=depth,
        min_samples_leaf=min_samples_leaf,
        split_mode="midpoint",
        criterion="variance",
    )

    score = np.full(len(y), base_score)
    trees = []
    staged_deviance = []
    for i in range(n_trees):
        p = _sigmoid(score)
        resid = y - p
        tree = build_tree(xs, resid, sw, params, _tree_rng(seed, i))
        # Newton step per leaf on the log-odds scale.
        hess = sw * p * (1.0 - p)
        grad = sw * resid
        for leaf in tree.leaf_ids:
            rows = tree.leaf_of_row == leaf
            denom = float(hess[rows].sum())
            tree.value[leaf] = float(grad[rows].sum()) / max(denom, 1e-12)
        score = score + learning_rate * np.asarray(tree.value)[tree.leaf_of_row]
        trees.append(tree.as_params())
        staged_deviance.append(float((sw * (np.logaddexp(0.0, score) - y * score)).sum()))

    return TrainedModel(
        family="gradient_boosting",
        feature_names=list(table.feature_names),
        feature_means=means,
        feature_scales=scales,
        params={
            "trees": trees,
            "learning_rate": learning_rate,
            "base_score": base_score,
            "staged_deviance": staged_deviance,
        },
    )
