"""Classifier families with balanced class weighting and probability output."""

from .base import (
    ClassWeights,
    ConvergenceError,
    ModelFormatError,
    TrainedModel,
    balanced_weights,
    load_model,
    predict_label,
    predict_proba,
    sample_weights,
    save_model,
)
from .ensemble import fit_extra_trees, fit_gradient_boosting, fit_random_forest
from .linear import fit_linear_svm, fit_logistic, logistic_objective, svm_objective
from .tree import BuiltTree, TreeParams, build_tree, fit_tree

FIT_FUNCTIONS = {
    "logistic": fit_logistic,
    "linear_svm": fit_linear_svm,
    "random_forest": fit_random_forest,
    "extra_trees": fit_extra_trees,
    "gradient_boosting": fit_gradient_boosting,
}

__all__ = [
    "ClassWeights",
    "ConvergenceError",
    "ModelFormatError",
    "TrainedModel",
    "BuiltTree",
    "TreeParams",
    "FIT_FUNCTIONS",
    "balanced_weights",
    "sample_weights",
    "build_tree",
    "fit_tree",
    "fit_logistic",
    "fit_linear_svm",
    "fit_random_forest",
    "fit_extra_trees",
    "fit_gradient_boosting",
    "logistic_objective",
    "svm_objective",
    "predict_proba",
    "predict_label",
    "save_model",
    "load_model",
]
