"""Weighted logistic regression (IRLS/Newton) and a linear SVM (seeded SGD).

Both take a feature table, standardize with train-set statistics, and fall
back to balanced class weights when none are given. The SVM's probability
output is a logistic calibration of its decision scores fitted on the
training data, so only its threshold metrics - not its ranking - depend on
the calibration.
"""

from __future__ import annotations

import numpy as np

from ..sampling import FeatureTable
from .base import (
    ClassWeights,
    ConvergenceError,
    TrainedModel,
    _sigmoid,
    balanced_weights,
    fit_standardizer,
    sample_weights,
)

LOGISTIC_L2 = 1e-4
LOGISTIC_TOL = 1e-8
LOGISTIC_MAX_ITER = 200


def logistic_objective(
    params: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    sw: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray]:
    """Penalized weighted negative log-likelihood and its gradient.

    ``params`` packs [bias, coef...]; the bias is not penalized. Exposed so
    tests can check the analytic gradient against finite differences.
    """
    bias, coef = params[0], params[1:]
    eta = x @ coef + bias
    # log(1 + exp(eta)) - y*eta, computed stably.
    nll = float((sw * (np.logaddexp(0.0, eta) - y * eta)).sum())
    value = nll + 0.5 * l2 * float(coef @ coef)
    mu = _sigmoid(eta)
    resid = sw * (mu - y)
    grad = np.concatenate([[resid.sum()], x.T @ resid + l2 * coef])
    return value, grad


def _newton_logistic(
    x: np.ndarray,
    y: np.ndarray,
    sw: np.ndarray,
    l2: float,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, float, bool]:
    """Newton minimization of the penalized weighted NLL.

    Returns (params, final gradient norm, converged). Steps are halved when
    they fail to decrease the objective.
    """
    n_features = x.shape[1]
    params = np.zeros(n_features + 1)
    value, grad = logistic_objective(params, x, y, sw, l2)
    for _ in range(max_iter):
        gnorm = float(np.abs(grad).max())
        if gnorm < tol:
            return params, gnorm, True
        eta = x @ params[1:] + params[0]
        mu = _sigmoid(eta)
        w = sw * mu * (1.0 - mu)
        design = np.column_stack([np.ones(len(x)), x])
        hess = design.T @ (design * w[:, None])
        hess[1:, 1:] += l2 * np.eye(n_features)
        # Tiny jitter keeps the solve well-posed under saturation.
        hess += 1e-12 * np.eye(n_features + 1)
        step = np.linalg.solve(hess, grad)
        scale = 1.0
        for _ in range(30):
            cand = params - scale * step
            cand_value, cand_grad = logistic_objective(cand, x, y, sw, l2)
            if cand_value <= value:
                break
            scale *= 0.5
        params, value, grad = cand, cand_value, cand_grad
    gnorm = float(np.abs(grad).max())
    return params, gnorm, gnorm < tol


def fit_logistic(
    table: FeatureTable,
    weights: ClassWeights | None = None,
    l2: float = LOGISTIC_L2,
    tol: float = LOGISTIC_TOL,
    max_iter: int = LOGISTIC_MAX_ITER,
) -> TrainedModel:
    """Weighted L2-regularized logistic regression via Newton/IRLS.

    Raises:
        ConvergenceError: gradient tolerance not reached within max_iter.
    """
    if weights is None:
        weights = balanced_weights(table.labels)
    means, scales = fit_standardizer(table.features)
    xs = (table.features - means) / scales
    y = table.labels.astype(np.float64)
    sw = sample_weights(table.labels, weights)

    params, gnorm, converged = _newton_logistic(xs, y, sw, l2, tol, max_iter)
    if not converged:
        raise ConvergenceError(
            f"logistic fit did not converge: gradient norm {gnorm:.3e} after {max_iter} iterations"
        )
    return TrainedModel(
        family="logistic",
        feature_names=list(table.feature_names),
        feature_means=means,
        feature_scales=scales,
        params={"coef": params[1:].tolist(), "bias": float(params[0])},
    )


SVM_L2 = 1e-4
SVM_EPOCHS = 40
SVM_ETA0 = 0.5


def svm_objective(coef: np.ndarray, bias: float, x, y_pm, alpha, l2) -> float:
    """Weighted mean hinge loss plus the L2 penalty."""
    margins = y_pm * (x @ coef + bias)
    hinge = np.maximum(0.0, 1.0 - margins)
    return 0.5 * l2 * float(coef @ coef) + float((alpha * hinge).mean())


def fit_linear_svm(
    table: FeatureTable,
    weights: ClassWeights | None = None,
    l2: float = SVM_L2,
    epochs: int = SVM_EPOCHS,
    seed: int = 0,
    eta0: float = SVM_ETA0,
) -> TrainedModel:
    """Linear SVM by deterministic seeded stochastic subgradient descent.

    The returned weights are the running average of the iterates, which
    settles the objective even with a noisy update stream. Probabilities
    are a Platt-style logistic calibration of the training scores.
    """
    if weights is None:
        weights = balanced_weights(table.labels)
    means, scales = fit_standardizer(table.features)
    xs = (table.features - means) / scales
    y_pm = np.where(table.labels == 1, 1.0, -1.0)
    sw = sample_weights(table.labels, weights)
    alpha = sw * len(sw) / sw.sum()  # importance weights with mean 1

    rng = np.random.default_rng(seed)
    n, n_features = xs.shape
    coef = np.zeros(n_features)
    bias = 0.0
    avg_coef = np.zeros(n_features)
    avg_bias = 0.0
    n_avg = 0
    t = 0
    objective_path = []
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = eta0 / (1.0 + eta0 * l2 * t)
            margin = y_pm[i] * (xs[i] @ coef + bias)
            coef *= 1.0 - eta * l2
            if margin < 1.0:
                coef += eta * alpha[i] * y_pm[i] * xs[i]
                bias += eta * alpha[i] * y_pm[i]
            avg_coef += coef
            avg_bias += bias
            n_avg += 1
        objective_path.append(svm_objective(avg_coef / n_avg, avg_bias / n_avg, xs, y_pm, alpha, l2))

    coef = avg_coef / n_avg
    bias = avg_bias / n_avg

    # Platt-style calibration on standardized training scores; the small
    # ridge keeps separable data from diverging.
    scores = xs @ coef + bias
    s_mean = float(scores.mean())
    s_scale = float(scores.std()) or 1.0
    zs = ((scores - s_mean) / s_scale)[:, None]
    cal_params, _, _ = _newton_logistic(zs, table.labels.astype(np.float64), sw, 1e-3, 1e-8, 100)

    return TrainedModel(
        family="linear_svm",
        feature_names=list(table.feature_names),
        feature_means=means,
        feature_scales=scales,
        params={
            "coef": coef.tolist(),
            "bias": float(bias),
            "cal_a": float(cal_params[1]),
            "cal_b": float(cal_params[0]),
            "cal_mean": s_mean,
            "cal_scale": s_scale,
            "objective_path": [float(v) for v in objective_path],
        },
    )
