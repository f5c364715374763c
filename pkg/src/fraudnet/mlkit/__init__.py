"""Supervised modelling: resampling, logistic regression, validation, metrics."""

from fraudnet.mlkit.dataset import LabeledDataset, make_targets
from fraudnet.mlkit.logistic import ModelFit, fit_logistic, stepwise_select
from fraudnet.mlkit.metrics import MetricsReport, aupr, auroc, evaluate, tdl
from fraudnet.mlkit.smote import SmoteResult, smote
from fraudnet.mlkit.splits import stratified_folds, stratified_split
from fraudnet.mlkit.validation import (
    CVResult,
    ResampleSpec,
    cross_validate,
    permutation_importance,
)

__all__ = [
    "LabeledDataset",
    "make_targets",
    "ModelFit",
    "fit_logistic",
    "stepwise_select",
    "MetricsReport",
    "auroc",
    "aupr",
    "tdl",
    "evaluate",
    "SmoteResult",
    "smote",
    "stratified_split",
    "stratified_folds",
    "CVResult",
    "ResampleSpec",
    "cross_validate",
    "permutation_importance",
]
