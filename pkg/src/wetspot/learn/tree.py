"""CART decision trees with weighted Gini or variance split criteria.

The builder produces flat node arrays (feature, threshold, left, right,
value) that serialize directly and predict vectorized. Internal nodes route
left on value <= threshold. Split candidates are midpoints of sorted unique
values, or uniformly random thresholds per feature in extra-trees mode.

Zero-gain splits are allowed: a node stops only at max depth, the minimum
leaf size, zero impurity, or when no feature offers a valid cut. That is
what lets depth-2 trees separate XOR-style interactions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TreeParams:
    max_depth: int | None = None
    min_samples_leaf: int = 1
    max_features: int | None = None  # features tried per split; None = all
    split_mode: str = "midpoint"  # "midpoint" or "random"
    random_thresholds: int = 1  # thresholds drawn per feature in random mode
    criterion: str = "gini"  # "gini" or "variance"


@dataclass
class BuiltTree:
    """Flat node arrays plus, at fit time, the leaf index of each training row."""

    feature: list[int]
    threshold: list[float]
    left: list[int]
    right: list[int]
    value: list[float]
    leaf_of_row: np.ndarray

    def as_params(self) -> dict:
        return {
            "feature": list(self.feature),
            "threshold": list(self.threshold),
            "left": list(self.left),
            "right": list(self.right),
            "value": list(self.value),
        }

    @property
    def leaf_ids(self) -> np.ndarray:
        return np.nonzero(np.asarray(self.feature) < 0)[0]


def _best_split_score(prefix_w, prefix_a, prefix_b, total_w, total_a, total_b, criterion):
    """Score of each prefix cut; larger is better.

    For gini the score is sum over sides of (Wpos^2 + Wneg^2)/W, for
    variance sum of (sum w*g)^2 / W; both differ from the true impurity
    decrease only by a per-node constant.
    """
    wl = prefix_w
    wr = total_w - wl
    if criterion == "gini":
        al, bl = prefix_a, prefix_b
        ar, br = total_a - al, total_b - bl
        return (al * al + bl * bl) / wl + (ar * ar + br * br) / wr
    sl = prefix_a
    sr = total_a - sl
    return sl * sl / wl + sr * sr / wr


def build_tree(
    x: np.ndarray,
    targets: np.ndarray,
    weights: np.ndarray,
    params: TreeParams,
    rng: np.random.Generator,
) -> BuiltTree:
    """Grow one tree.

    For the gini criterion ``targets`` are 0/1 labels and leaves carry the
    weighted positive fraction; for variance they are regression targets
    and leaves carry the weighted mean (callers may overwrite leaf values,
    e.g. with Newton steps).
    """
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    n, n_features = x.shape

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    leaf_of_row = np.full(n, -1, dtype=np.int64)

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    def leaf_payload(idx: np.ndarray) -> float:
        # Weighted positive fraction (gini) or weighted target mean (variance).
        wi = w[idx]
        return float((wi * t[idx]).sum() / wi.sum())

    def is_pure(idx: np.ndarray) -> bool:
        ti = t[idx]
        return bool(ti.min() == ti.max())

    def find_split(idx: np.ndarray):
        wi = w[idx]
        total_w = wi.sum()
        if params.criterion == "gini":
            a_row = wi * t[idx]
            b_row = wi * (1.0 - t[idx])
        else:
            a_row = wi * t[idx]
            b_row = None
        total_a = a_row.sum()
        total_b = b_row.sum() if b_row is not None else 0.0

        if params.max_features is not None and params.max_features < n_features:
            feats = rng.choice(n_features, size=params.max_features, replace=False)
        else:
            feats = np.arange(n_features)

        best = None  # (score, feature, threshold)
        min_leaf = params.min_samples_leaf
        for f in feats:
            xf = x[idx, f]
            if params.split_mode == "midpoint":
                order = np.argsort(xf, kind="stable")
                xs = xf[order]
                ws = wi[order]
                as_ = a_row[order]
                bs = b_row[order] if b_row is not None else None
                cut = np.nonzero(xs[:-1] < xs[1:])[0]  # boundary after position k
                if len(cut) == 0:
                    continue
                sizes = cut + 1
                ok = (sizes >= min_leaf) & (len(idx) - sizes >= min_leaf)
                cut = cut[ok]
                if len(cut) == 0:
                    continue
                pw = np.cumsum(ws)[cut]
                pa = np.cumsum(as_)[cut]
                pb = np.cumsum(bs)[cut] if bs is not None else np.zeros_like(pa)
                scores = _best_split_score(pw, pa, pb, total_w, total_a, total_b, params.criterion)
                k = int(np.argmax(scores))
                cand = (float(scores[k]), int(f), float((xs[cut[k]] + xs[cut[k] + 1]) / 2.0))
                if best is None or cand[0] > best[0]:
                    best = cand
            else:
                lo, hi = xf.min(), xf.max()
                if lo == hi:
                    continue
                for thr in rng.uniform(lo, hi, size=params.random_thresholds):
                    go_left = xf <= thr
                    nl = int(go_left.sum())
                    if nl < min_leaf or len(idx) - nl < min_leaf:
                        continue
                    pw = wi[go_left].sum()
                    pa = a_row[go_left].sum()
                    pb = b_row[go_left].sum() if b_row is not None else 0.0
                    score = _best_split_score(pw, pa, pb, total_w, total_a, total_b, params.criterion)
                    cand = (float(score), int(f), float(thr))
                    if best is None or cand[0] > best[0]:
                        best = cand
        return best

    root = new_node()
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        stop = (
            (params.max_depth is not None and depth >= params.max_depth)
            or len(idx) < 2 * params.min_samples_leaf
            or is_pure(idx)
        )
        split = None if stop else find_split(idx)
        if split is None:
            value[node] = leaf_payload(idx)
            leaf_of_row[idx] = node
            continue
        _, f, thr = split
        go_left = x[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        lnode, rnode = new_node(), new_node()
        left[node] = lnode
        right[node] = rnode
        stack.append((rnode, idx[~go_left], depth + 1))
        stack.append((lnode, idx[go_left], depth + 1))

    return BuiltTree(feature, threshold, left, right, value, leaf_of_row)


def fit_tree(
    x: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray,
    params: TreeParams | None = None,
    rng: np.random.Generator | None = None,
) -> BuiltTree:
    """Fit a single classification tree (weighted Gini).

    Leaves carry the weighted positive fraction of the rows routed there.
    """
    if params is None:
        params = TreeParams()
    if rng is None:
        rng = np.random.default_rng(0)
    return build_tree(x, labels, weights, params, rng)
