"""
Random forest of Gini trees.

Each tree is grown to purity on a bootstrap sample (drawn as per-row counts
used as weights) with sqrt(d) candidate features per node. The probability
is the mean over trees of the leaf's positive-class frequency.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from turntaking.config import ForestConfig
from turntaking.learners.trees import BinMapper, RegressionTree, grow_tree
from turntaking.logging_config import get_logger

logger = get_logger(__name__)


def resolve_max_features(setting: object, n_features: int) -> Optional[int]:
    """Features per node: 'sqrt', 'all' or an explicit count."""
    if setting == "all":
        return None
    if setting == "sqrt":
        return max(1, int(np.sqrt(n_features)))
    return max(1, min(int(setting), n_features))  # type: ignore[call-overload]


@dataclass
class ForestModel:
    """A fitted forest."""
    trees: List[RegressionTree] = field(default_factory=list)

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, cfg: ForestConfig) -> "ForestModel":
        """Grow cfg.n_estimators trees."""
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n_rows, n_features = X.shape
        mapper = BinMapper(max_bins=cfg.max_bins).fit(X)
        binned = mapper.transform(X)
        max_features = resolve_max_features(cfg.max_features, n_features)

        trees: List[RegressionTree] = []
        for index in range(cfg.n_estimators):
            rng = np.random.default_rng([cfg.seed, index])
            if cfg.bootstrap:
                weight = np.bincount(rng.integers(0, n_rows, n_rows), minlength=n_rows)
            else:
                weight = np.ones(n_rows)
            trees.append(
                grow_tree(
                    mapper,
                    binned,
                    y,
                    weight=weight.astype(np.float64),
                    max_depth=cfg.max_depth,
                    min_samples_split=cfg.min_samples_split,
                    min_samples_leaf=cfg.min_samples_leaf,
                    max_features=max_features,
                    rng=rng,
                )
            )

        logger.debug(
            "Forest grown",
            trees=len(trees),
            mean_leaves=float(np.mean([t.n_leaves for t in trees])),
        )
        return cls(trees=trees)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Mean leaf frequency over trees."""
        X = np.asarray(X, dtype=np.float64)
        return np.mean([tree.predict(X) for tree in self.trees], axis=0)

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready parameters."""
        return {"trees": [tree.to_dict() for tree in self.trees]}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ForestModel":
        """Inverse of to_dict."""
        return cls(trees=[RegressionTree.from_dict(t) for t in payload["trees"]])
