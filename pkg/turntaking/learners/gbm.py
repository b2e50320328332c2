"""
Gradient boosting on the binomial log-loss.

The model starts from the training log-odds. Each stage fits a depth-limited
regression tree to the residuals y - p (the negative gradient); leaves hold
the mean residual and the stage is added with the learning rate. With
subsample < 1 every stage sees a random subset of rows drawn without
replacement.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np
from scipy.special import expit, logit

from turntaking.config import GBMConfig
from turntaking.learners.trees import BinMapper, RegressionTree, grow_tree
from turntaking.logging_config import get_logger

logger = get_logger(__name__)

# Keeps the initial log-odds finite for single-class training data
PROBABILITY_CLIP = 1e-12


def log_loss(y: np.ndarray, raw: np.ndarray) -> float:
    """Mean binomial log-loss of raw (log-odds) predictions."""
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


@dataclass
class GBMModel:
    """Initial log-odds plus scaled stage trees."""
    init: float
    learning_rate: float
    trees: List[RegressionTree] = field(default_factory=list)
    train_loss: List[float] = field(default_factory=list)

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, cfg: GBMConfig) -> "GBMModel":
        """Run cfg.n_estimators boosting stages."""
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n_rows = X.shape[0]
        mapper = BinMapper(max_bins=cfg.max_bins).fit(X)
        binned = mapper.transform(X)
        rng = np.random.default_rng(cfg.seed)

        prior = float(np.clip(np.mean(y), PROBABILITY_CLIP, 1.0 - PROBABILITY_CLIP))
        model = cls(init=float(logit(prior)), learning_rate=cfg.learning_rate)
        raw = np.full(n_rows, model.init)
        model.train_loss.append(log_loss(y, raw))

        for _ in range(cfg.n_estimators):
            residual = y - expit(raw)
            weight = np.ones(n_rows)
            if cfg.subsample < 1.0:
                size = max(1, int(round(cfg.subsample * n_rows)))
                weight = np.zeros(n_rows)
                weight[rng.choice(n_rows, size=size, replace=False)] = 1.0
            tree = grow_tree(
                mapper,
                binned,
                residual,
                weight=weight,
                max_depth=cfg.max_depth,
                min_samples_split=cfg.min_samples_split,
                min_samples_leaf=cfg.min_samples_leaf,
            )
            model.trees.append(tree)
            raw = raw + cfg.learning_rate * tree.predict(X)
            model.train_loss.append(log_loss(y, raw))

        logger.debug(
            "Boosting finished",
            stages=len(model.trees),
            initial_loss=model.train_loss[0],
            final_loss=model.train_loss[-1],
        )
        return model

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        """Log-odds: init + learning_rate * sum of stage predictions."""
        X = np.asarray(X, dtype=np.float64)
        raw = np.full(X.shape[0], self.init)
        for tree in self.trees:
            raw += self.learning_rate * tree.predict(X)
        return raw

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Probability of the positive class."""
        return expit(self.decision_function(X))

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready parameters."""
        return {
            "init": self.init,
            "learning_rate": self.learning_rate,
            "trees": [tree.to_dict() for tree in self.trees],
            "train_loss": self.train_loss,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "GBMModel":
        """Inverse of to_dict."""
        return cls(
            init=float(payload["init"]),
            learning_rate=float(payload["learning_rate"]),
            trees=[RegressionTree.from_dict(t) for t in payload["trees"]],
            train_loss=[float(v) for v in payload.get("train_loss", [])],
        )
