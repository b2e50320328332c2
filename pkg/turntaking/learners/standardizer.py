"""
Feature standardization fitted on training rows only.

Continuous columns are shifted to zero mean and scaled to unit population
standard deviation. Binary and one-hot columns, and continuous columns with
zero variance on the training rows, pass through unchanged.
"""

from dataclasses import dataclass
from typing import Any, Dict, List

import numpy as np

from turntaking.exceptions import PipelineInputError
from turntaking.models import FeatureSchema

# Standard deviations below this count as zero variance
MIN_STD = 1e-12


class EmptyTrainingSet(PipelineInputError):
    """Fewer than two training rows."""
    pass


@dataclass(frozen=True)
class Standardizer:
    """Per-column affine transform (x - mean) / scale."""
    mean: np.ndarray
    scale: np.ndarray
    zero_variance: np.ndarray

    @property
    def flagged(self) -> List[int]:
        """Continuous columns left unscaled because they were constant."""
        return [int(i) for i in np.flatnonzero(self.zero_variance)]

    def apply(self, rows: np.ndarray) -> np.ndarray:
        """Transform rows (returns a new array)."""
        return (np.asarray(rows, dtype=np.float64) - self.mean) / self.scale

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready parameters."""
        return {
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "zero_variance": self.flagged,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "Standardizer":
        """Inverse of to_dict."""
        mean = np.array(payload["mean"], dtype=np.float64)
        zero_variance = np.zeros(mean.shape[0], dtype=bool)
        zero_variance[payload["zero_variance"]] = True
        return cls(
            mean=mean,
            scale=np.array(payload["scale"], dtype=np.float64),
            zero_variance=zero_variance,
        )


def fit_standardizer(train_rows: np.ndarray, schema: FeatureSchema) -> Standardizer:
    """
    Fit on training rows.

    Raises:
        EmptyTrainingSet: Fewer than two rows
    """
    rows = np.asarray(train_rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise EmptyTrainingSet(f"Standardizer needs at least 2 rows, got {rows.shape[0]}")

    continuous = np.array(schema.continuous_mask(), dtype=bool)
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    zero_variance = continuous & (std < MIN_STD)
    scaled = continuous & ~zero_variance

    return Standardizer(
        mean=np.where(scaled, mean, 0.0),
        scale=np.where(scaled, std, 1.0),
        zero_variance=zero_variance,
    )


def apply(standardizer: Standardizer, rows: np.ndarray) -> np.ndarray:
    """Apply a fitted standardizer."""
    return standardizer.apply(rows)
