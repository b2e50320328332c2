"""ROC-AUC as the Mann-Whitney pair statistic."""

import numpy as np
from scipy.stats import rankdata

from turntaking.exceptions import PipelineInputError


class SingleClassInput(PipelineInputError):
    """AUC needs at least one positive and one negative label."""
    pass


def auc_roc(scores: np.ndarray, labels: np.ndarray) -> float:
    """
    P(score_pos > score_neg) + 0.5 * P(tie), via average ranks.

    Raises:
        SingleClassInput: If only one class is present
        ValueError: If scores and labels differ in length
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError(f"scores {scores.shape} and labels {labels.shape} differ")
    positive = labels == 1
    n_pos = int(positive.sum())
    n_neg = int(positive.shape[0] - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise SingleClassInput(f"AUC needs both classes; got {n_pos} positive, {n_neg} negative")
    ranks = rankdata(scores)
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
