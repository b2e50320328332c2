"""
Histogram regression trees shared by the forest and boosting learners.

Features are binned once per ensemble. A split sends a row left when its
value is <= the split threshold; thresholds are midpoints between adjacent
distinct training values (quantile edges for columns with more distinct
values than max_bins).

A node's split maximizes

    SL^2 / NL + SR^2 / NR - S^2 / N

with S the weighted target sum and N the weight sum of a side. For 0/1
targets this is half the Gini impurity decrease; for real targets it is the
squared-error decrease. Leaves predict S / N (class frequency or mean
residual). Ties go to the lowest feature index, then the lowest threshold.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

# Gains at or below this are not worth a split
MIN_GAIN = 1e-12

LEAF = -1


# =============================================================================
# Binning
# =============================================================================

@dataclass
class BinMapper:
    """Per-feature split thresholds and the binned view of a matrix."""
    max_bins: int = 256
    edges: List[np.ndarray] = field(default_factory=list)

    def fit(self, X: np.ndarray) -> "BinMapper":
        """Learn thresholds from training rows."""
        self.edges = []
        for column in np.asarray(X, dtype=np.float64).T:
            distinct = np.unique(column)
            if distinct.shape[0] <= self.max_bins:
                edges = (distinct[:-1] + distinct[1:]) / 2.0
            else:
                quantiles = np.quantile(column, np.linspace(0.0, 1.0, self.max_bins + 1)[1:-1])
                edges = np.unique(quantiles)
                edges = edges[edges < distinct[-1]]
            self.edges.append(edges)
        return self

    @property
    def n_bins(self) -> int:
        """Width of the bin axis (largest edge count + 1)."""
        return max((e.shape[0] for e in self.edges), default=0) + 1

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Bin index per value: the number of thresholds strictly below it."""
        X = np.asarray(X, dtype=np.float64)
        binned = np.empty(X.shape, dtype=np.int32)
        for j, edges in enumerate(self.edges):
            binned[:, j] = np.searchsorted(edges, X[:, j], side="left")
        return binned


# =============================================================================
# Tree
# =============================================================================

@dataclass
class RegressionTree:
    """
    Array-encoded binary tree.

    Node i is a leaf when left[i] == -1; otherwise rows with
    x[feature[i]] <= threshold[i] go to left[i], the rest to right[i].
    """
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        """Total number of nodes."""
        return int(self.value.shape[0])

    @property
    def n_leaves(self) -> int:
        """Number of leaves."""
        return int(np.sum(self.left == LEAF))

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Leaf value of every row."""
        X = np.asarray(X, dtype=np.float64)
        nodes = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.left[nodes] != LEAF
        while np.any(active):
            current = nodes[active]
            go_left = X[rows[active], self.feature[current]] <= self.threshold[current]
            nodes[active] = np.where(go_left, self.left[current], self.right[current])
            active = self.left[nodes] != LEAF
        return self.value[nodes]

    def used_features(self) -> List[int]:
        """Features used by at least one split."""
        return sorted({int(f) for f, l in zip(self.feature, self.left) if l != LEAF})

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready arrays."""
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "RegressionTree":
        """Inverse of to_dict."""
        return cls(
            feature=np.array(payload["feature"], dtype=np.int64),
            threshold=np.array(payload["threshold"], dtype=np.float64),
            left=np.array(payload["left"], dtype=np.int64),
            right=np.array(payload["right"], dtype=np.int64),
            value=np.array(payload["value"], dtype=np.float64),
        )


@dataclass
class _Split:
    feature: int
    bin: int
    gain: float


def _best_split(
    binned: np.ndarray,
    rows: np.ndarray,
    target: np.ndarray,
    weight: np.ndarray,
    features: np.ndarray,
    n_bins: int,
    min_samples_leaf: int,
) -> Optional[_Split]:
    """Best split of one node over candidate features (sorted ascending)."""
    n_features = features.shape[0]
    offsets = np.arange(n_features) * n_bins
    flat = (binned[np.ix_(rows, features)] + offsets).ravel()
    size = n_features * n_bins
    hist_s = np.bincount(flat, weights=np.repeat(weight * target, n_features), minlength=size)
    hist_n = np.bincount(flat, weights=np.repeat(weight, n_features), minlength=size)
    hist_s = hist_s.reshape(n_features, n_bins)
    hist_n = hist_n.reshape(n_features, n_bins)

    left_s = np.cumsum(hist_s, axis=1)[:, :-1]
    left_n = np.cumsum(hist_n, axis=1)[:, :-1]
    total_s = float(np.sum(weight * target))
    total_n = float(np.sum(weight))
    right_s = total_s - left_s
    right_n = total_n - left_n

    valid = (left_n >= min_samples_leaf) & (right_n >= min_samples_leaf)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = left_s ** 2 / left_n + right_s ** 2 / right_n - total_s ** 2 / total_n
    gain = np.where(valid, gain, -np.inf)

    best: Optional[_Split] = None
    for i, feature in enumerate(features):
        k = int(np.argmax(gain[i]))
        if gain[i, k] > MIN_GAIN and (best is None or gain[i, k] > best.gain):
            best = _Split(feature=int(feature), bin=k, gain=float(gain[i, k]))
    return best


def grow_tree(
    mapper: BinMapper,
    binned: np.ndarray,
    target: np.ndarray,
    weight: Optional[np.ndarray] = None,
    max_depth: Optional[int] = None,
    min_samples_split: int = 2,
    min_samples_leaf: int = 1,
    max_features: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> RegressionTree:
    """
    Grow a tree on binned rows.

    Args:
        mapper: Fitted bin mapper (provides thresholds)
        binned: (n, d) bin indices from mapper.transform
        target: (n,) targets (0/1 labels or residuals)
        weight: (n,) non-negative row weights (bootstrap counts); default ones
        max_depth: Depth limit; None grows until leaves are pure
        min_samples_split: Minimum weight to attempt a split
        min_samples_leaf: Minimum weight on each side of a split
        max_features: Features sampled per node; None uses all
        rng: Generator for feature sampling

    Returns:
        RegressionTree
    """
    target = np.asarray(target, dtype=np.float64)
    weight = np.ones_like(target) if weight is None else np.asarray(weight, dtype=np.float64)
    n_features = binned.shape[1]
    n_bins = mapper.n_bins
    rng = rng or np.random.default_rng(0)

    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []

    def new_node(rows: np.ndarray) -> int:
        w = weight[rows]
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(np.sum(w * target[rows]) / np.sum(w)))
        return len(value) - 1

    root_rows = np.flatnonzero(weight > 0)
    stack = [(new_node(root_rows), root_rows, 0)]
    while stack:
        node, rows, depth = stack.pop()
        if max_depth is not None and depth >= max_depth:
            continue
        if np.sum(weight[rows]) < min_samples_split or np.ptp(target[rows]) == 0.0:
            continue

        if max_features is None or max_features >= n_features:
            candidates = np.arange(n_features)
        else:
            candidates = np.sort(rng.choice(n_features, size=max_features, replace=False))

        split = _best_split(
            binned, rows, target[rows], weight[rows], candidates, n_bins, min_samples_leaf
        )
        if split is None:
            continue

        goes_left = binned[rows, split.feature] <= split.bin
        left_rows, right_rows = rows[goes_left], rows[~goes_left]
        feature[node] = split.feature
        threshold[node] = float(mapper.edges[split.feature][split.bin])
        left[node] = new_node(left_rows)
        right[node] = new_node(right_rows)
        stack.append((right[node], right_rows, depth + 1))
        stack.append((left[node], left_rows, depth + 1))

    return RegressionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.float64),
    )


def fit_decision_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: Optional[int] = None,
    min_samples_split: int = 2,
    min_samples_leaf: int = 1,
    max_bins: int = 256,
) -> RegressionTree:
    """A single Gini tree on all rows and all features."""
    mapper = BinMapper(max_bins=max_bins).fit(X)
    return grow_tree(
        mapper,
        mapper.transform(X),
        np.asarray(y, dtype=np.float64),
        max_depth=max_depth,
        min_samples_split=min_samples_split,
        min_samples_leaf=min_samples_leaf,
    )
