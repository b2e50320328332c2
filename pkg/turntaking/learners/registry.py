"""
Model Registry

Uniform entry points for the four classifier families and the TrainedModel
bundle: estimator + fitted standardizer + feature schema hash.

Design Decisions:
- Standardization is part of the model; callers always pass raw feature rows
- predict_proba refuses rows built under a different feature schema
- Models persist as self-describing JSON documents (family, cfg, schema hash,
  standardizer, parameters)
"""

from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Protocol, Type

import numpy as np

from turntaking.config import ModelsConfig
from turntaking.exceptions import PipelineInputError
from turntaking.learners.forest import ForestModel
from turntaking.learners.gbm import GBMModel
from turntaking.learners.logistic import LogisticModel
from turntaking.learners.mlp import MLPModel
from turntaking.learners.standardizer import Standardizer, fit_standardizer
from turntaking.logging_config import get_logger
from turntaking.models import FeatureSchema, ModelFamily

logger = get_logger(__name__)

MODEL_FORMAT_VERSION = 1


class NonFiniteInput(PipelineInputError):
    """Training or prediction input contains NaN or infinity."""
    pass


class SchemaMismatch(PipelineInputError):
    """Rows were built under a different feature schema than the model."""
    pass


class Estimator(Protocol):
    """What every family implements."""

    def predict_proba(self, X: np.ndarray) -> np.ndarray: ...

    def to_dict(self) -> Dict[str, Any]: ...


_ESTIMATORS: Dict[ModelFamily, Type[Any]] = {
    ModelFamily.LOGISTIC: LogisticModel,
    ModelFamily.MLP: MLPModel,
    ModelFamily.RANDOM_FOREST: ForestModel,
    ModelFamily.GBM: GBMModel,
}


@dataclass
class TrainedModel:
    """A fitted estimator with its standardizer and schema hash."""
    family: ModelFamily
    estimator: Estimator
    standardizer: Standardizer
    schema_hash: str
    cfg: Dict[str, Any]

    def predict_proba(self, X: np.ndarray, schema_hash: Optional[str] = None) -> np.ndarray:
        """See predict_proba."""
        return predict_proba(self, X, schema_hash)

    def to_document(self) -> Dict[str, Any]:
        """Self-describing JSON document."""
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "family": self.family.value,
            "cfg": self.cfg,
            "schema_hash": self.schema_hash,
            "standardizer": self.standardizer.to_dict(),
            "parameters": self.estimator.to_dict(),
        }

    @classmethod
    def from_document(cls, document: Dict[str, Any]) -> "TrainedModel":
        """Inverse of to_document."""
        family = ModelFamily(document["family"])
        return cls(
            family=family,
            estimator=_ESTIMATORS[family].from_dict(document["parameters"]),
            standardizer=Standardizer.from_dict(document["standardizer"]),
            schema_hash=str(document["schema_hash"]),
            cfg=dict(document.get("cfg", {})),
        )


def _check_finite(X: np.ndarray, y: Optional[np.ndarray] = None) -> None:
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("Feature matrix contains NaN or infinite values")
    if y is not None and not np.all(np.isfinite(y)):
        raise NonFiniteInput("Labels contain NaN or infinite values")


def family_config(family: ModelFamily, config: ModelsConfig, seed: Optional[int] = None) -> Any:
    """The config section of one family, optionally reseeded."""
    section = {
        ModelFamily.LOGISTIC: config.logistic,
        ModelFamily.MLP: config.mlp,
        ModelFamily.RANDOM_FOREST: config.rf,
        ModelFamily.GBM: config.gbm,
    }[family]
    if seed is not None and "seed" in type(section).model_fields:
        section = section.model_copy(update={"seed": seed})
    return section


def train_model(
    family: ModelFamily,
    X: np.ndarray,
    y: np.ndarray,
    schema: FeatureSchema,
    config: Optional[ModelsConfig] = None,
    seed: Optional[int] = None,
) -> TrainedModel:
    """
    Standardize on the training rows and fit one family.

    Raises:
        NonFiniteInput: NaN or infinity in X or y
        EmptyTrainingSet: Fewer than two rows
    """
    config = config or ModelsConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_finite(X, y)
    if X.shape[1] != schema.width:
        raise SchemaMismatch(f"Rows have {X.shape[1]} columns, schema has {schema.width}")

    standardizer = fit_standardizer(X, schema)
    cfg = family_config(family, config, seed)
    estimator = _ESTIMATORS[family].fit(standardizer.apply(X), y, cfg)
    logger.debug("Trained model", family=family.value, rows=X.shape[0])
    return TrainedModel(
        family=family,
        estimator=estimator,
        standardizer=standardizer,
        schema_hash=schema.schema_hash,
        cfg=cfg.model_dump(mode="json"),
    )


def predict_proba(
    model: TrainedModel, X: np.ndarray, schema_hash: Optional[str] = None
) -> np.ndarray:
    """
    Positive-class probability of every row.

    Raises:
        SchemaMismatch: If schema_hash differs from the model's or the width is wrong
        NonFiniteInput: NaN or infinity in X
    """
    X = np.asarray(X, dtype=np.float64)
    if schema_hash is not None and schema_hash != model.schema_hash:
        raise SchemaMismatch(
            f"Rows use schema {schema_hash[:12]}, model expects {model.schema_hash[:12]}"
        )
    if X.ndim != 2 or X.shape[1] != model.standardizer.mean.shape[0]:
        raise SchemaMismatch(
            f"Rows have shape {X.shape}, model expects {model.standardizer.mean.shape[0]} columns"
        )
    _check_finite(X)
    return np.clip(model.estimator.predict_proba(model.standardizer.apply(X)), 0.0, 1.0)


def _trainer(family: ModelFamily) -> Callable[..., TrainedModel]:
    def train(
        X: np.ndarray,
        y: np.ndarray,
        schema: FeatureSchema,
        config: Optional[ModelsConfig] = None,
        seed: Optional[int] = None,
    ) -> TrainedModel:
        return train_model(family, X, y, schema, config, seed)

    train.__name__ = f"train_{family.name.lower()}"
    train.__doc__ = f"Train a {family.value} model (see train_model)."
    return train


train_logistic = _trainer(ModelFamily.LOGISTIC)
train_mlp = _trainer(ModelFamily.MLP)
train_random_forest = _trainer(ModelFamily.RANDOM_FOREST)
train_gbm = _trainer(ModelFamily.GBM)
