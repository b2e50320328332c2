"""
Data Models Module

This module defines the Pydantic models used throughout the pipeline.
Strong typing keeps the contracts between stages explicit: recordings are
validated once at ingest, and every later stage exchanges these models (or the
array containers built from them) instead of raw files.

Design Decisions:
- Use Pydantic models for every document that crosses a file boundary
- Reject invalid values at the boundary, never clamp them
- Keep bulk numeric data (frame streams, feature matrices) in numpy arrays
  inside dataclass containers next to the code that owns them
- Aliases match the compact on-disk keys (t, user, left, right, vol, o/c/e/a/n)
"""

import hashlib
import json
import math
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# =============================================================================
# Enums
# =============================================================================

class TransitionCategory(str, Enum):
    """Turn-transition behaviours derived from the main-speaker timeline."""
    CLEAN_TURN_TAKING = "CleanTurnTaking"
    OVERLAP_TURN_TAKING = "OverlapTurnTaking"
    BACKCHANNEL = "Backchannel"
    CONTINUING_SPEECH = "ContinuingSpeech"


class Task(str, Enum):
    """Binary prediction tasks."""
    TURN_VS_CONTINUE = "turn"
    NEXT_SPEAKER = "next"
    TIMING = "timing"


class ModelFamily(str, Enum):
    """Classifier families."""
    LOGISTIC = "logistic"
    MLP = "mlp"
    RANDOM_FOREST = "rf"
    GBM = "gbm"


class CVScheme(str, Enum):
    """Cross-validation partitioning schemes."""
    SESSION = "session"
    GROUP = "group"
    WEEK = "week"
    WEEK4 = "week4"


class FeatureGroup(str, Enum):
    """Top-level feature groups of the schema."""
    SPEECH = "speech"
    TRAITS = "traits"
    EGOCENTRIC = "egocentric"
    DYADIC = "dyadic"
    GROUP_REL = "group_rel"


class FeatureKind(str, Enum):
    """How a feature column is encoded (drives standardization)."""
    CONTINUOUS = "continuous"
    BINARY = "binary"
    ONEHOT = "onehot"


# =============================================================================
# Recording Models
# =============================================================================

DEVICE_NAMES: Tuple[str, ...] = ("root", "head", "left_hand", "right_hand")
DOF_NAMES: Tuple[str, ...] = ("x", "y", "z", "roll", "pitch", "yaw")
BIG5_TRAITS: Tuple[str, ...] = (
    "openness", "conscientiousness", "extraversion", "agreeableness", "neuroticism"
)


class DevicePose(BaseModel):
    """
    Six-DOF pose of one tracked device.

    Positions are metres, angles degrees. Vertical axis is y; the horizontal
    plane is x-z. Positive pitch means the device rotates downward.
    """
    model_config = ConfigDict(frozen=True)

    x: float
    y: float
    z: float
    roll: float
    pitch: float
    yaw: float

    @model_validator(mode="after")
    def check_ranges(self) -> "DevicePose":
        """Reject non-finite values and out-of-range angles."""
        for name in DOF_NAMES:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} is not finite")
        if not -180.0 < self.yaw <= 180.0:
            raise ValueError(f"yaw {self.yaw} outside (-180, 180]")
        if not -90.0 <= self.pitch <= 90.0:
            raise ValueError(f"pitch {self.pitch} outside [-90, 90]")
        return self

    def as_tuple(self) -> Tuple[float, ...]:
        """Values in canonical DOF order."""
        return (self.x, self.y, self.z, self.roll, self.pitch, self.yaw)


class UserFrame(BaseModel):
    """One user's tracked devices and voice volume at a timestamp."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    timestamp: float = Field(alias="t")
    user_id: str = Field(alias="user", min_length=1)
    root: DevicePose
    head: DevicePose
    left_hand: DevicePose = Field(alias="left")
    right_hand: DevicePose = Field(alias="right")
    volume: float = Field(alias="vol")

    @field_validator("timestamp")
    @classmethod
    def validate_timestamp(cls, v: float) -> float:
        """Timestamps must be finite."""
        if not math.isfinite(v):
            raise ValueError("timestamp is not finite")
        return v

    @field_validator("volume")
    @classmethod
    def validate_volume(cls, v: float) -> float:
        """Volume is a unitless level in [0, 1]."""
        if not (math.isfinite(v) and 0.0 <= v <= 1.0):
            raise ValueError(f"volume {v} outside [0, 1]")
        return v


class Big5(BaseModel):
    """TIPI Big-5 trait scores, each in [1, 7]."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    openness: float = Field(alias="o", ge=1.0, le=7.0)
    conscientiousness: float = Field(alias="c", ge=1.0, le=7.0)
    extraversion: float = Field(alias="e", ge=1.0, le=7.0)
    agreeableness: float = Field(alias="a", ge=1.0, le=7.0)
    neuroticism: float = Field(alias="n", ge=1.0, le=7.0)

    def as_tuple(self) -> Tuple[float, ...]:
        """Trait values in canonical order."""
        return tuple(getattr(self, name) for name in BIG5_TRAITS)


class ManifestUser(BaseModel):
    """One roster entry of a session manifest."""
    model_config = ConfigDict(frozen=True)

    user_id: str = Field(min_length=1)
    big5: Big5


class SessionManifest(BaseModel):
    """
    Session-level metadata: ids, week and the user roster.

    Group size (3 or 4) is enforced by the recording loader so that the
    distinct GroupTooSmall / GroupTooLarge errors can be raised.
    """
    model_config = ConfigDict(frozen=True)

    session_id: str = Field(min_length=1)
    group_id: str = Field(min_length=1)
    week: int = Field(ge=1, le=4)
    users: List[ManifestUser]

    @field_validator("users")
    @classmethod
    def validate_unique_users(cls, v: List[ManifestUser]) -> List[ManifestUser]:
        """User ids must be unique within a session."""
        ids = [u.user_id for u in v]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate user_id in manifest")
        return v

    @property
    def user_ids(self) -> List[str]:
        """Roster order of user ids."""
        return [u.user_id for u in self.users]

    @property
    def group_size(self) -> int:
        """Number of users in the session."""
        return len(self.users)

    def traits_of(self, user_id: str) -> Big5:
        """Big-5 scores of one user (KeyError if absent)."""
        for user in self.users:
            if user.user_id == user_id:
                return user.big5
        raise KeyError(user_id)


class ClockGap(BaseModel):
    """A stretch of missing frames on the shared clock."""
    start: float = Field(description="Timestamp of the last frame before the gap")
    duration: float = Field(gt=0, description="Missing time in seconds")


class ValidationReport(BaseModel):
    """Report-only summary of a loaded recording."""
    session_id: str
    frame_counts: Dict[str, int]
    gaps: List[ClockGap] = []
    speech_fraction: Dict[str, float]
    overall_speech_fraction: float
    dropped_frames: Dict[str, int] = Field(
        default_factory=dict,
        description="Frames removed per user by clock alignment"
    )
    duration_seconds: float

    @property
    def gap_warnings(self) -> int:
        """Number of clock gaps above the warning threshold."""
        return len(self.gaps)


class CorpusSummary(BaseModel):
    """Size of a set of sessions."""
    sessions: int
    groups: int
    users: int
    weeks: List[int]
    total_minutes: float
    mean_minutes: float
    std_minutes: float


# =============================================================================
# Speech Labeling Models
# =============================================================================

class SpeechEvent(BaseModel):
    """A stretch of speech activity by a single user."""
    model_config = ConfigDict(frozen=True)

    user_id: str
    start: float
    end: float

    @model_validator(mode="after")
    def check_order(self) -> "SpeechEvent":
        """Events have positive duration."""
        if not self.end > self.start:
            raise ValueError(f"event end {self.end} must exceed start {self.start}")
        return self

    @property
    def duration(self) -> float:
        """Event length in seconds."""
        return self.end - self.start


class TimelineSegment(BaseModel):
    """
    A main-speaker segment.

    event_start/event_end describe the speech event the segment came from; the
    segment start can be later than event_start when it was clipped to the end
    of the previous main speaker.
    """
    model_config = ConfigDict(frozen=True)

    speaker_id: str
    start: float
    end: float
    event_start: float
    event_end: float


class MainSpeakerTimeline(BaseModel):
    """Ordered, non-overlapping main-speaker segments (silence allowed)."""
    segments: List[TimelineSegment] = []

    @model_validator(mode="after")
    def check_segments(self) -> "MainSpeakerTimeline":
        """Segments are time ordered and never overlap."""
        for prev, cur in zip(self.segments, self.segments[1:]):
            if cur.start < prev.end - 1e-9:
                raise ValueError("timeline segments overlap")
        return self

    def speaker_at(self, t: float) -> Optional[str]:
        """Main speaker whose segment covers t, if any."""
        for seg in self.segments:
            if seg.start <= t < seg.end:
                return seg.speaker_id
        return None


class TransitionEvent(BaseModel):
    """A categorized turn transition."""
    model_config = ConfigDict(frozen=True)

    category: TransitionCategory
    onset: float
    new_speaker_id: str
    previous_speaker_id: Optional[str] = None
    trigger_duration: float = Field(
        default=0.0,
        ge=0.0,
        description="Duration of the speech event that triggered the transition"
    )

    @model_validator(mode="after")
    def check_speakers(self) -> "TransitionEvent":
        """Turn taking changes speaker; continuing speech keeps it."""
        if self.category in (
            TransitionCategory.CLEAN_TURN_TAKING,
            TransitionCategory.OVERLAP_TURN_TAKING,
        ) and self.new_speaker_id == self.previous_speaker_id:
            raise ValueError("turn taking requires a speaker change")
        if (
            self.category == TransitionCategory.CONTINUING_SPEECH
            and self.new_speaker_id != self.previous_speaker_id
        ):
            raise ValueError("continuing speech keeps the same speaker")
        return self

    @property
    def is_turn_taking(self) -> bool:
        """True for clean and overlap turn taking."""
        return self.category in (
            TransitionCategory.CLEAN_TURN_TAKING,
            TransitionCategory.OVERLAP_TURN_TAKING,
        )


# =============================================================================
# Feature Models
# =============================================================================

class FeatureSpec(BaseModel):
    """One named column of the feature schema."""
    model_config = ConfigDict(frozen=True)

    name: str
    group: FeatureGroup
    kind: FeatureKind


class FeatureSchema(BaseModel):
    """Ordered feature columns, identical for every sample."""
    model_config = ConfigDict(frozen=True)

    features: List[FeatureSpec]

    @field_validator("features")
    @classmethod
    def validate_unique_names(cls, v: List[FeatureSpec]) -> List[FeatureSpec]:
        """Feature names are unique."""
        names = [f.name for f in v]
        if len(set(names)) != len(names):
            raise ValueError("duplicate feature name in schema")
        return v

    @property
    def names(self) -> List[str]:
        """Column names in order."""
        return [f.name for f in self.features]

    @property
    def width(self) -> int:
        """Number of columns."""
        return len(self.features)

    @property
    def schema_hash(self) -> str:
        """Stable sha256 over (name, group, kind) triples."""
        payload = json.dumps(
            [[f.name, f.group.value, f.kind.value] for f in self.features],
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def index_of(self, name: str) -> int:
        """Column index of a feature (KeyError if unknown)."""
        for i, feature in enumerate(self.features):
            if feature.name == name:
                return i
        raise KeyError(name)

    def spec_of(self, name: str) -> FeatureSpec:
        """Spec of a feature (KeyError if unknown)."""
        return self.features[self.index_of(name)]

    def indices_of_group(self, group: FeatureGroup) -> List[int]:
        """Column indices belonging to a top-level group."""
        return [i for i, f in enumerate(self.features) if f.group == group]

    def continuous_mask(self) -> List[bool]:
        """True for columns that get standardized."""
        return [f.kind == FeatureKind.CONTINUOUS for f in self.features]


class SampleProvenance(BaseModel):
    """Where a feature row came from."""
    model_config = ConfigDict(frozen=True)

    session_id: str
    group_id: str
    week: int
    onset: float
    main_user: str
    reference_user: str


# =============================================================================
# Evaluation Models
# =============================================================================

class FoldResult(BaseModel):
    """Test AUC of one fold; None when the test rows hold a single class."""
    fold: int
    auc: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    n_train: int
    n_test: int
    test_entities: List[str] = []


class EvalReport(BaseModel):
    """Cross-validated AUC for one (task, family, scheme)."""
    task: Task
    family: ModelFamily
    scheme: CVScheme
    folds: List[FoldResult]
    mean_auc: float
    std_auc: float
    skipped_folds: List[int] = []
    config_hash: str = ""
    schema_hash: str = ""


class ImportanceRow(BaseModel):
    """Mean AUC change after shuffling one feature group."""
    group: str
    n_features: int
    mean_delta_auc: float
    std_delta_auc: float
    n_evaluations: int


class ImportanceTable(BaseModel):
    """Grouped permutation importance (negative delta = accuracy drop)."""
    task: Task
    family: ModelFamily
    scheme: CVScheme
    repetitions: int
    baseline_auc: float
    rows: List[ImportanceRow]
    skipped_folds: List[int] = []

    def ranked(self) -> List[ImportanceRow]:
        """Rows ordered from largest accuracy drop to smallest."""
        return sorted(self.rows, key=lambda r: (r.mean_delta_auc, r.group))


class DependenceCurve(BaseModel):
    """One-feature partial dependence."""
    feature: str
    grid: List[float]
    mean_probability: List[float]


class DependenceSurface(BaseModel):
    """Two-feature partial dependence; surface[i][j] pairs grid_a[i] with grid_b[j]."""
    feature_a: str
    feature_b: str
    grid_a: List[float]
    grid_b: List[float]
    negate_a: bool = False
    negate_b: bool = False
    surface: List[List[float]]

    @property
    def display_grid_a(self) -> List[float]:
        """Axis values as presented (negated when requested)."""
        return [-v for v in self.grid_a] if self.negate_a else list(self.grid_a)

    @property
    def display_grid_b(self) -> List[float]:
        """Axis values as presented (negated when requested)."""
        return [-v for v in self.grid_b] if self.negate_b else list(self.grid_b)
