"""
Learners Package

In-house classifiers and the train-side standardizer:
- standardizer: Continuous-feature standardization
- trees: Histogram regression trees
- logistic, mlp, forest, gbm: The four model families
- registry: TrainedModel, train_model, predict_proba
"""

from turntaking.learners.registry import (
    NonFiniteInput,
    SchemaMismatch,
    TrainedModel,
    predict_proba,
    train_gbm,
    train_logistic,
    train_mlp,
    train_model,
    train_random_forest,
)
from turntaking.learners.standardizer import EmptyTrainingSet, Standardizer, fit_standardizer

__all__ = [
    "NonFiniteInput",
    "SchemaMismatch",
    "TrainedModel",
    "predict_proba",
    "train_gbm",
    "train_logistic",
    "train_mlp",
    "train_model",
    "train_random_forest",
    "EmptyTrainingSet",
    "Standardizer",
    "fit_standardizer",
]
