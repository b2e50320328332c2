"""
Partial Dependence Module

One- and two-feature partial dependence: overwrite the feature(s) in every
row with each grid value and average the predicted probabilities. Grids are
evenly spaced over the empirical [low, high] percentile range of the
feature (the median for a single-point grid).

The two-feature surface carries per-axis negation flags used only when the
grid is displayed, so that larger displayed values can mean faster motion
in the opposite direction.
"""

from typing import List, Tuple

import numpy as np
import pandas as pd

from turntaking.exceptions import PipelineInputError
from turntaking.learners.registry import TrainedModel, predict_proba
from turntaking.models import DependenceCurve, DependenceSurface, FeatureKind
from turntaking.services.dataset_builder import LabeledDataset


class NonContinuousFeature(PipelineInputError):
    """Partial dependence is only defined here for continuous features."""
    pass


def feature_grid(
    values: np.ndarray,
    grid_size: int,
    percentiles: Tuple[float, float] = (0.05, 0.95),
) -> np.ndarray:
    """Evenly spaced grid between two empirical quantiles."""
    if grid_size == 1:
        return np.array([np.median(values)])
    low, high = np.quantile(values, percentiles)
    return np.linspace(low, high, grid_size)


def _continuous_column(dataset: LabeledDataset, feature: str) -> int:
    try:
        spec = dataset.schema.spec_of(feature)
    except KeyError as e:
        raise NonContinuousFeature(f"Unknown feature {feature!r}") from e
    if spec.kind != FeatureKind.CONTINUOUS:
        raise NonContinuousFeature(f"Feature {feature!r} is {spec.kind.value}, not continuous")
    return dataset.schema.index_of(feature)


def _mean_probability(model: TrainedModel, dataset: LabeledDataset, X: np.ndarray) -> float:
    return float(np.mean(predict_proba(model, X, dataset.schema_hash)))


def partial_dependence(
    model: TrainedModel,
    dataset: LabeledDataset,
    feature: str,
    grid_size: int = 20,
    percentiles: Tuple[float, float] = (0.05, 0.95),
) -> DependenceCurve:
    """
    Mean predicted probability as one feature sweeps its grid.

    Raises:
        NonContinuousFeature: If the feature is not continuous
    """
    column = _continuous_column(dataset, feature)
    grid = feature_grid(dataset.X[:, column], grid_size, percentiles)
    X = dataset.X.copy()
    means: List[float] = []
    for value in grid:
        X[:, column] = value
        means.append(_mean_probability(model, dataset, X))
    return DependenceCurve(feature=feature, grid=grid.tolist(), mean_probability=means)


def partial_dependence_2d(
    model: TrainedModel,
    dataset: LabeledDataset,
    feature_a: str,
    feature_b: str,
    grid_size: int = 20,
    percentiles: Tuple[float, float] = (0.05, 0.95),
    negate_a: bool = False,
    negate_b: bool = False,
) -> DependenceSurface:
    """
    Mean predicted probability over the product of two feature grids.

    surface[i][j] holds the mean with feature_a = grid_a[i] and
    feature_b = grid_b[j].

    Raises:
        NonContinuousFeature: If either feature is not continuous
    """
    column_a = _continuous_column(dataset, feature_a)
    column_b = _continuous_column(dataset, feature_b)
    grid_a = feature_grid(dataset.X[:, column_a], grid_size, percentiles)
    grid_b = feature_grid(dataset.X[:, column_b], grid_size, percentiles)

    X = dataset.X.copy()
    surface: List[List[float]] = []
    for a in grid_a:
        X[:, column_a] = a
        row: List[float] = []
        for b in grid_b:
            X[:, column_b] = b
            row.append(_mean_probability(model, dataset, X))
        surface.append(row)

    return DependenceSurface(
        feature_a=feature_a,
        feature_b=feature_b,
        grid_a=grid_a.tolist(),
        grid_b=grid_b.tolist(),
        negate_a=negate_a,
        negate_b=negate_b,
        surface=surface,
    )


def curve_to_frame(curve: DependenceCurve) -> pd.DataFrame:
    """Grid-value table of a curve."""
    return pd.DataFrame(
        {"feature": curve.feature, "value": curve.grid, "mean_probability": curve.mean_probability}
    )


def surface_to_frame(surface: DependenceSurface) -> pd.DataFrame:
    """Long-format grid table of a surface, with display values."""
    display_a = surface.display_grid_a
    display_b = surface.display_grid_b
    return pd.DataFrame(
        [
            {
                "feature_a": surface.feature_a,
                "feature_b": surface.feature_b,
                "value_a": a,
                "value_b": b,
                "display_a": display_a[i],
                "display_b": display_b[j],
                "mean_probability": surface.surface[i][j],
            }
            for i, a in enumerate(surface.grid_a)
            for j, b in enumerate(surface.grid_b)
        ]
    )
