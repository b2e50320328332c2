"""
Feature Extraction Module

Builds the fixed feature vector describing a moment t for a pair of users:
the main user (whose behaviour is predicted) and the reference user (the
previous speaker).

Feature groups (383 columns):
- speech (43): one-hot speaker sequence of the 10 preceding turns and the
  main user's speech recency
- traits (16): Big-5 of main user, reference user and group mean, group size
- egocentric (216): head and controllers x 6 DOF x raw/velocity x
  mean/min/max, for main and reference user
- dyadic (36): gaze both ways, distance and visual shared space at each
  triangle length, raw/velocity x mean/min/max
- group_rel (72): the same measures between main/reference user and the
  remaining members, averaged per pair and summarized across pairs

Design Decisions:
- The motion window is [t - window, t): only frames strictly before t
- Raw egocentric values come from the centered body space, velocities from
  the uncentered body space, yaw velocities from world yaw differences
- Never-spoken main users get a staleness sentinel instead of missing values
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from turntaking.config import FeatureConfig, PipelineConfig
from turntaking.exceptions import PipelineInputError, PipelineInvariantError
from turntaking.logging_config import get_logger
from turntaking.models import (
    BIG5_TRAITS,
    DOF_NAMES,
    FeatureGroup,
    FeatureKind,
    FeatureSchema,
    FeatureSpec,
    MainSpeakerTimeline,
    SampleProvenance,
    SessionManifest,
)
from turntaking.services.geometry import (
    WindowGeometry,
    body_space_transform,
    velocity_series,
    world_poses,
    yaw_velocity_series,
)
from turntaking.services.recording import (
    BODY_DEVICE_NAMES,
    FrameWindow,
    SessionRecording,
    UnknownUser,
    slice_window,
)

logger = get_logger(__name__)

SEQUENCE_LENGTH = 10
SEQUENCE_SYMBOLS: Tuple[str, ...] = ("u", "a", "b", "c")
ROLES: Tuple[str, ...] = ("main", "ref")
STATS: Tuple[str, ...] = ("mean", "min", "max")
MEASUREMENTS: Tuple[str, ...] = ("raw", "vel")


class InvalidSamplePair(PipelineInputError):
    """Main and reference user must be two different roster members."""
    pass


@dataclass(frozen=True)
class FeatureVector:
    """Feature values aligned to a schema, with provenance."""
    values: np.ndarray
    provenance: SampleProvenance
    schema_hash: str


# =============================================================================
# Schema
# =============================================================================

def vss_label(vs_l: float) -> str:
    """Column token of one triangle length (1.0 -> 'vss1')."""
    return f"vss{vs_l:g}"


def dyadic_measures(vs_lengths: Sequence[float]) -> List[str]:
    """Dyadic measure tokens in column order."""
    return ["gaze_main_to_ref", "gaze_ref_to_main", "ipd"] + [vss_label(v) for v in vs_lengths]


def group_measures(vs_lengths: Sequence[float]) -> List[str]:
    """Group-relationship measure tokens in column order."""
    measures: List[str] = []
    for role in ROLES:
        measures += [f"gaze_{role}_to_others", f"gaze_others_to_{role}", f"ipd_{role}"]
        measures += [f"{vss_label(v)}_{role}" for v in vs_lengths]
    return measures


def _summary_names(prefix: str) -> List[str]:
    return [f"{prefix}_{m}_{s}" for m in MEASUREMENTS for s in STATS]


@lru_cache(maxsize=8)
def _schema_for(vs_lengths: Tuple[float, ...]) -> FeatureSchema:
    specs: List[FeatureSpec] = []

    def add(names: Sequence[str], group: FeatureGroup, kind: FeatureKind) -> None:
        specs.extend(FeatureSpec(name=n, group=group, kind=kind) for n in names)

    add(
        [f"seq_{i}_{s}" for i in range(1, SEQUENCE_LENGTH + 1) for s in SEQUENCE_SYMBOLS],
        FeatureGroup.SPEECH,
        FeatureKind.ONEHOT,
    )
    add(
        ["main_turns_since_last_speech", "main_time_since_last_speech_end"],
        FeatureGroup.SPEECH,
        FeatureKind.CONTINUOUS,
    )
    add(["main_has_spoken"], FeatureGroup.SPEECH, FeatureKind.BINARY)

    add(
        [f"{who}_{trait}" for who in ("main", "ref", "group_mean") for trait in BIG5_TRAITS]
        + ["group_size"],
        FeatureGroup.TRAITS,
        FeatureKind.CONTINUOUS,
    )

    add(
        [
            name
            for role in ROLES
            for device in BODY_DEVICE_NAMES
            for dof in DOF_NAMES
            for name in _summary_names(f"{role}_{device}_{dof}")
        ],
        FeatureGroup.EGOCENTRIC,
        FeatureKind.CONTINUOUS,
    )
    add(
        [n for m in dyadic_measures(vs_lengths) for n in _summary_names(f"dyad_{m}")],
        FeatureGroup.DYADIC,
        FeatureKind.CONTINUOUS,
    )
    add(
        [n for m in group_measures(vs_lengths) for n in _summary_names(f"group_{m}")],
        FeatureGroup.GROUP_REL,
        FeatureKind.CONTINUOUS,
    )
    return FeatureSchema(features=specs)


def build_feature_schema(config: Optional[FeatureConfig] = None) -> FeatureSchema:
    """The feature schema for a feature configuration (shared, read-only)."""
    config = config or FeatureConfig()
    return _schema_for(tuple(float(v) for v in config.vs_lengths))


def trivial_egocentric_features() -> List[str]:
    """Egocentric columns that are identically zero after centering."""
    return [
        name
        for role in ROLES
        for dof in ("x", "z", "yaw")
        for name in _summary_names(f"{role}_head_{dof}")
        if "_raw_" in name
    ]


# =============================================================================
# Speech
# =============================================================================

@dataclass(frozen=True)
class Turn:
    """A run of consecutive timeline segments of one speaker."""
    speaker_id: str
    start: float
    end: float


def turns_before(timeline: MainSpeakerTimeline, t: float) -> List[Turn]:
    """
    Turns that started before t, most recent first.

    Consecutive segments of the same speaker form one turn.
    """
    turns: List[Turn] = []
    for seg in timeline.segments:
        if not seg.start < t:
            break
        if turns and turns[-1].speaker_id == seg.speaker_id:
            turns[-1] = Turn(seg.speaker_id, turns[-1].start, seg.end)
        else:
            turns.append(Turn(seg.speaker_id, seg.start, seg.end))
    return turns[::-1]


def speech_sequence_symbols(
    timeline: MainSpeakerTimeline, main_user: str, t: float
) -> List[Optional[str]]:
    """
    Symbols of the 10 preceding turns, most recent first.

    The main user is 'u'; other speakers get 'a', 'b', 'c' in order of first
    encounter walking backward; missing turns are None.
    """
    letters: Dict[str, str] = {}
    symbols: List[Optional[str]] = []
    for turn in turns_before(timeline, t)[:SEQUENCE_LENGTH]:
        if turn.speaker_id == main_user:
            symbols.append("u")
            continue
        if turn.speaker_id not in letters:
            if len(letters) >= len(SEQUENCE_SYMBOLS) - 1:
                raise PipelineInvariantError("More than three other speakers in a group")
            letters[turn.speaker_id] = SEQUENCE_SYMBOLS[len(letters) + 1]
        symbols.append(letters[turn.speaker_id])
    return symbols + [None] * (SEQUENCE_LENGTH - len(symbols))


def speech_sequence_features(
    timeline: MainSpeakerTimeline, main_user: str, t: float
) -> np.ndarray:
    """One-hot encoding (10 x {u, a, b, c}) of the preceding speaker sequence."""
    values = np.zeros((SEQUENCE_LENGTH, len(SEQUENCE_SYMBOLS)), dtype=np.float64)
    for i, symbol in enumerate(speech_sequence_symbols(timeline, main_user, t)):
        if symbol is not None:
            values[i, SEQUENCE_SYMBOLS.index(symbol)] = 1.0
    return values.ravel()


def speech_recency_features(
    timeline: MainSpeakerTimeline,
    main_user: str,
    t: float,
    session_start: float = 0.0,
) -> Dict[str, float]:
    """
    Main user's speech recency at t.

    turns_since_last_speech counts turns backward from t, starting at 1 for
    the immediately preceding turn. time_since_last_speech_end is measured
    from the end of that turn (0 while it is still going). A main user who
    never spoke gets elapsed session time and total turns + 1.
    """
    turns = turns_before(timeline, t)
    for index, turn in enumerate(turns, start=1):
        if turn.speaker_id == main_user:
            return {
                "turns_since_last_speech": float(index),
                "time_since_last_speech_end": t - min(turn.end, t),
                "has_spoken": 1.0,
            }
    return {
        "turns_since_last_speech": float(len(turns) + 1),
        "time_since_last_speech_end": max(t - session_start, 0.0),
        "has_spoken": 0.0,
    }


# =============================================================================
# Traits
# =============================================================================

def trait_features(manifest: SessionManifest, main_user: str, ref_user: str) -> np.ndarray:
    """
    Big-5 of main and reference user, group mean Big-5, group size.

    Raises:
        UnknownUser: If either user is not in the manifest
    """
    for uid in (main_user, ref_user):
        if uid not in manifest.user_ids:
            raise UnknownUser(f"User {uid!r} not in manifest {manifest.session_id}")
    group = np.array([u.big5.as_tuple() for u in manifest.users], dtype=np.float64)
    return np.concatenate(
        [
            manifest.traits_of(main_user).as_tuple(),
            manifest.traits_of(ref_user).as_tuple(),
            group.mean(axis=0),
            [float(manifest.group_size)],
        ]
    )


# =============================================================================
# Motion
# =============================================================================

def _summarize(series: np.ndarray) -> List[float]:
    """mean, min, max over the first axis."""
    return [float(np.mean(series)), float(np.min(series)), float(np.max(series))]


def egocentric_features(window: FrameWindow, user: str) -> np.ndarray:
    """
    108 egocentric values for one user.

    Order: head, left, right; per device x, y, z, roll, pitch, yaw; per DOF
    raw mean/min/max then velocity mean/min/max.
    """
    centered = body_space_transform(window, user, centered=True).poses
    uncentered = body_space_transform(window, user, centered=False).poses
    world_yaw = world_poses(window.poses[user])[:, 1:, 5]
    rate = window.frame_rate

    values: List[float] = []
    for slot in range(3):
        for dof in range(len(DOF_NAMES)):
            if dof == 5:
                velocity = yaw_velocity_series(world_yaw[:, slot], rate)
            else:
                velocity = velocity_series(uncentered[:, slot, dof], rate)
            values += _summarize(centered[:, slot, dof])
            values += _summarize(velocity)
    return np.array(values, dtype=np.float64)


def _raw_and_velocity(series: np.ndarray, rate: float) -> List[float]:
    return _summarize(series) + _summarize(velocity_series(series, rate))


def dyadic_features(geometry: WindowGeometry, main_user: str, ref_user: str) -> np.ndarray:
    """36 dyadic values between main and reference user."""
    rate = geometry.frame_rate
    values: List[float] = []
    values += _raw_and_velocity(geometry.gaze(main_user, ref_user), rate)
    values += _raw_and_velocity(geometry.gaze(ref_user, main_user), rate)
    values += _raw_and_velocity(geometry.distance(main_user, ref_user), rate)
    for vs_l in geometry.vs_lengths:
        values += _raw_and_velocity(geometry.shared_space(main_user, ref_user, vs_l), rate)
    return np.array(values, dtype=np.float64)


def _pair_summary(
    series_per_pair: Sequence[np.ndarray], rate: float
) -> List[float]:
    """Per-pair window means of raw and velocity, summarized across pairs."""
    raw = np.array([np.mean(s) for s in series_per_pair])
    vel = np.array([np.mean(velocity_series(s, rate)) for s in series_per_pair])
    return _summarize(raw) + _summarize(vel)


def group_relationship_features(
    geometry: WindowGeometry, main_user: str, ref_user: str
) -> np.ndarray:
    """
    72 values relating main and reference user to the remaining members.

    Raises:
        InvalidSamplePair: If no remaining member exists
    """
    others = sorted(uid for uid in geometry.heads if uid not in (main_user, ref_user))
    if not others:
        raise InvalidSamplePair("Group features need at least one remaining member")

    rate = geometry.frame_rate
    values: List[float] = []
    for role_user in (main_user, ref_user):
        measures: List[Callable[[str], np.ndarray]] = [
            lambda o: geometry.gaze(role_user, o),
            lambda o: geometry.gaze(o, role_user),
            lambda o: geometry.distance(role_user, o),
        ]
        measures += [
            (lambda o, v=vs_l: geometry.shared_space(role_user, o, v))
            for vs_l in geometry.vs_lengths
        ]
        for measure in measures:
            values += _pair_summary([measure(o) for o in others], rate)
    return np.array(values, dtype=np.float64)


# =============================================================================
# Samples
# =============================================================================

def extract_sample(
    rec: SessionRecording,
    timeline: MainSpeakerTimeline,
    t: float,
    main_user: str,
    ref_user: str,
    config: Optional[FeatureConfig] = None,
) -> FeatureVector:
    """
    Full feature vector for (t, main user, reference user).

    Raises:
        InvalidSamplePair: If main and reference user coincide
        UnknownUser: If either user is not in the session
        WindowOutOfRange / WindowTooSparse: If [t - window, t) is not usable
    """
    config = config or FeatureConfig()
    if main_user == ref_user:
        raise InvalidSamplePair(f"Main and reference user are both {main_user!r}")
    schema = build_feature_schema(config)

    speech = speech_recency_features(timeline, main_user, t, session_start=rec.start)
    traits = trait_features(rec.manifest, main_user, ref_user)
    window = slice_window(rec, t - config.window, config.window)
    geometry = WindowGeometry(window, tuple(config.vs_lengths), config.fov_degrees)

    values = np.concatenate(
        [
            speech_sequence_features(timeline, main_user, t),
            [
                speech["turns_since_last_speech"],
                speech["time_since_last_speech_end"],
                speech["has_spoken"],
            ],
            traits,
            egocentric_features(window, main_user),
            egocentric_features(window, ref_user),
            dyadic_features(geometry, main_user, ref_user),
            group_relationship_features(geometry, main_user, ref_user),
        ]
    )
    if values.shape[0] != schema.width:
        raise PipelineInvariantError(
            f"Feature vector has {values.shape[0]} values, schema has {schema.width}"
        )
    if not np.all(np.isfinite(values)):
        raise PipelineInvariantError(f"Non-finite feature at t={t} in {rec.session_id}")

    provenance = SampleProvenance(
        session_id=rec.session_id,
        group_id=rec.manifest.group_id,
        week=rec.manifest.week,
        onset=t,
        main_user=main_user,
        reference_user=ref_user,
    )
    return FeatureVector(values=values, provenance=provenance, schema_hash=schema.schema_hash)


@dataclass(frozen=True)
class SampleRequest:
    """A moment to featurize with its pair of users."""
    onset: float
    main_user: str
    ref_user: str


def extract_samples(
    rec: SessionRecording,
    timeline: MainSpeakerTimeline,
    requests: Sequence[SampleRequest],
    config: Optional[PipelineConfig] = None,
    jobs: int = 1,
) -> List[FeatureVector]:
    """Featurize many moments of one session, in request order."""
    config = config or PipelineConfig()
    if jobs == 1 or len(requests) < 2:
        return [
            extract_sample(rec, timeline, r.onset, r.main_user, r.ref_user, config.features)
            for r in requests
        ]
    return Parallel(n_jobs=jobs)(
        delayed(extract_sample)(rec, timeline, r.onset, r.main_user, r.ref_user, config.features)
        for r in requests
    )
