"""
Pipeline Configuration

Two layers of configuration:

- Settings: environment-level knobs loaded with Pydantic Settings (paths and
  logging only). Prefix TURNS_, optional .env file.
- PipelineConfig: every analysis constant (labeling thresholds, window length,
  visual shared space distances, model hyperparameters, CV scheme, seeds).
  It is serialized next to each artifact and hashed into config_hash.

Design Decisions:
- Validate configuration at load (fail-fast approach)
- Defaults are the reference analysis constants (0.1 volume threshold, 1 s window)
- A single master seed; each stage derives its own seed from it
"""

import hashlib
import json
from functools import lru_cache
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from turntaking.exceptions import InvalidConfig
from turntaking.models import CVScheme


class Settings(BaseSettings):
    """
    Environment settings.

    Only paths and logging live here; analysis constants belong to
    PipelineConfig so that they are hashed into every artifact.
    """

    model_config = SettingsConfigDict(
        env_prefix="TURNS_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    # =========================================================================
    # Paths
    # =========================================================================
    data_dir: Path = Field(
        default=Path("data"),
        description="Directory holding session recordings (one sub-directory per session)"
    )

    output_dir: Path = Field(
        default=Path("output"),
        description="Directory receiving artifacts"
    )

    # =========================================================================
    # Logging Configuration
    # =========================================================================
    log_level: str = Field(
        default="INFO",
        description="Logging level"
    )

    log_json_format: bool = Field(
        default=False,
        description="Enable JSON logging format"
    )

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Ensure log level is valid."""
        valid_levels = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}
        v_upper = v.upper()
        if v_upper not in valid_levels:
            raise ValueError(f"Invalid log level: {v}. Must be one of {valid_levels}")
        return v_upper


@lru_cache()
def get_settings() -> Settings:
    """
    Get cached environment settings.

    Returns:
        Settings instance
    """
    return Settings()


# =============================================================================
# Pipeline Configuration
# =============================================================================

class _Section(BaseModel):
    """Base for config sections: unknown keys are errors."""
    model_config = ConfigDict(extra="forbid", frozen=True)


class LabelingConfig(_Section):
    """Speech labeling and recording ingest constants."""
    volume_threshold: float = Field(default=0.1, gt=0.0, lt=1.0)
    max_gap: float = Field(default=0.5, ge=0.0, description="Same-user smoothing gap (s)")
    min_event_duration: float = Field(default=0.323, ge=0.0, description="Noise filter (s)")
    frame_rate: float = Field(default=30.0, gt=0.0)
    align_tolerance: float = Field(default=1.0 / 60.0, gt=0.0)
    gap_warning: float = Field(default=0.1, gt=0.0, description="Clock gap report threshold (s)")

    @property
    def frame_period(self) -> float:
        """Nominal seconds between frames."""
        return 1.0 / self.frame_rate


class FeatureConfig(_Section):
    """Feature extraction constants."""
    window: float = Field(default=1.0, gt=0.0, description="Window before the moment (s)")
    vs_lengths: Tuple[float, ...] = Field(default=(1.0, 5.0, 10.0))
    fov_degrees: float = Field(default=104.0, gt=0.0, lt=180.0)

    @field_validator("vs_lengths")
    @classmethod
    def validate_vs_lengths(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        """Triangle side lengths are positive and unique."""
        if not v or any(length <= 0 for length in v) or len(set(v)) != len(v):
            raise ValueError("vs_lengths must be unique positive lengths")
        return v


class DatasetConfig(_Section):
    """Task dataset construction constants."""
    timing_offsets: Tuple[float, ...] = Field(default=(2.0, 4.0, 6.0, 8.0, 10.0, 12.0))


class LogisticConfig(_Section):
    """L2-regularized logistic regression."""
    C: float = Field(default=1.0, gt=0.0, description="Inverse regularization strength")
    max_iter: int = Field(default=100, ge=1)
    tol: float = Field(default=1e-6, gt=0.0, description="Gradient-norm stopping tolerance")


class MLPConfig(_Section):
    """One-hidden-layer perceptron trained with Adam."""
    hidden_units: int = Field(default=100, ge=1)
    alpha: float = Field(default=1e-4, ge=0.0, description="L2 penalty")
    learning_rate: float = Field(default=1e-3, gt=0.0)
    batch_size: int = Field(default=200, ge=1)
    max_iter: int = Field(default=200, ge=1, description="Epochs")
    tol: float = Field(default=1e-4, ge=0.0)
    n_iter_no_change: int = Field(default=10, ge=1)
    beta_1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta_2: float = Field(default=0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(default=1e-8, gt=0.0)
    seed: int = 0


class ForestConfig(_Section):
    """Bootstrap forest of Gini trees."""
    n_estimators: int = Field(default=100, ge=1)
    max_features: Union[Literal["sqrt", "all"], int] = "sqrt"
    max_depth: Optional[int] = Field(default=None, ge=1)
    min_samples_split: int = Field(default=2, ge=2)
    min_samples_leaf: int = Field(default=1, ge=1)
    bootstrap: bool = True
    max_bins: int = Field(default=256, ge=2)
    seed: int = 0


class GBMConfig(_Section):
    """Gradient boosting on binomial log-loss."""
    n_estimators: int = Field(default=100, ge=1)
    max_depth: int = Field(default=3, ge=1)
    learning_rate: float = Field(default=0.1, gt=0.0)
    subsample: float = Field(default=1.0, gt=0.0, le=1.0)
    min_samples_split: int = Field(default=2, ge=2)
    min_samples_leaf: int = Field(default=1, ge=1)
    max_bins: int = Field(default=256, ge=2)
    seed: int = 0


class ModelsConfig(_Section):
    """Per-family hyperparameters."""
    logistic: LogisticConfig = LogisticConfig()
    mlp: MLPConfig = MLPConfig()
    rf: ForestConfig = ForestConfig()
    gbm: GBMConfig = GBMConfig()


class EvaluationConfig(_Section):
    """Cross-validation and interpretation constants."""
    scheme: CVScheme = CVScheme.SESSION
    n_folds: int = Field(default=10, ge=2)
    mda_repetitions: int = Field(default=5, ge=1)
    pd_grid_size: int = Field(default=20, ge=1)
    pd_percentiles: Tuple[float, float] = (0.05, 0.95)
    feature_groups: str = Field(
        default="headline",
        description="'headline', 'full', or a path to a feature-group JSON file"
    )

    @field_validator("pd_percentiles")
    @classmethod
    def validate_percentiles(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        """Percentile range is ordered and inside [0, 1]."""
        low, high = v
        if not 0.0 <= low < high <= 1.0:
            raise ValueError("pd_percentiles must satisfy 0 <= low < high <= 1")
        return v


class PipelineConfig(_Section):
    """Every analysis constant, hashed into each artifact."""
    schema_version: int = 1
    seed: int = 0
    labeling: LabelingConfig = LabelingConfig()
    features: FeatureConfig = FeatureConfig()
    dataset: DatasetConfig = DatasetConfig()
    models: ModelsConfig = ModelsConfig()
    evaluation: EvaluationConfig = EvaluationConfig()

    @property
    def config_hash(self) -> str:
        """sha256 of the canonical JSON form."""
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def canonical_json(self) -> str:
        """Sorted-key compact JSON used for hashing."""
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def with_seed(self, seed: int) -> "PipelineConfig":
        """Copy with a different master seed."""
        return self.model_copy(update={"seed": seed})

    def stage_seed(self, stage: str) -> int:
        """Seed for one pipeline stage, derived from the master seed."""
        return derive_seed(self.seed, stage)


def derive_seed(seed: int, stage: str) -> int:
    """
    Derive a stage seed from the master seed.

    The derivation is sha256("<seed>:<stage>") truncated to 8 hex digits, so
    every stage's randomness can be audited from the master seed alone.
    """
    digest = hashlib.sha256(f"{seed}:{stage}".encode("utf-8")).hexdigest()
    return int(digest[:8], 16)


def load_pipeline_config(path: Optional[Path] = None) -> PipelineConfig:
    """
    Load a PipelineConfig from JSON, or the defaults when no path is given.

    Raises:
        InvalidConfig: If the document does not validate
        FileNotFoundError: If the path does not exist
    """
    if path is None:
        return PipelineConfig()
    text = Path(path).read_text(encoding="utf-8")
    try:
        return PipelineConfig.model_validate_json(text)
    except ValidationError as e:
        raise InvalidConfig(f"Invalid pipeline config {path}: {e}") from e


def dump_pipeline_config(config: PipelineConfig) -> str:
    """Human-readable JSON for sidecars (sorted keys, stable)."""
    return json.dumps(config.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"
