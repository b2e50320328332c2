"""
Test Configuration

Pytest configuration and fixtures for the test suite: hand-built recordings,
synthetic sessions and labeled datasets.
"""

import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pytest

from turntaking.config import LabelingConfig, PipelineConfig
from turntaking.models import Big5, ManifestUser, SampleProvenance, SessionManifest, Task
from turntaking.services.dataset_builder import LabeledDataset
from turntaking.services.features import build_feature_schema
from turntaking.services.recording import (
    HEAD,
    LEFT_HAND,
    RIGHT_HAND,
    ROOT,
    SessionRecording,
    build_recording,
)
from turntaking.services.synth import (
    GroundTruth,
    SynthConfig,
    SynthSession,
    generate_corpus,
    generate_session,
)

RATE = 30.0
SPEAKING = 0.5

Spans = Sequence[Tuple[float, float]]


def make_manifest(
    user_ids: Sequence[str] = ("a", "b", "c"),
    session_id: str = "s01",
    group_id: str = "g01",
    week: int = 1,
) -> SessionManifest:
    """Manifest with neutral personalities except a rising extraversion."""
    users = [
        ManifestUser(
            user_id=uid,
            big5=Big5(o=4.0, c=4.0, e=2.0 + k, a=4.0, n=4.0),
        )
        for k, uid in enumerate(user_ids)
    ]
    return SessionManifest(session_id=session_id, group_id=group_id, week=week, users=users)


def circle_poses(n: int, index: int, group_size: int, radius: float = 1.2) -> np.ndarray:
    """Static poses of a user standing on a circle and facing its centre."""
    angle = 2.0 * math.pi * index / group_size
    yaw = math.degrees(angle) + 180.0
    yaw = yaw - 360.0 if yaw > 180.0 else yaw
    poses = np.zeros((n, 4, 6))
    poses[:, ROOT, 0] = radius * math.sin(angle)
    poses[:, ROOT, 2] = radius * math.cos(angle)
    poses[:, ROOT, 5] = yaw
    poses[:, HEAD, 1] = 1.6
    poses[:, LEFT_HAND] = (-0.25, 1.1, 0.3, 0.0, 0.0, 0.0)
    poses[:, RIGHT_HAND] = (0.25, 1.1, 0.3, 0.0, 0.0, 0.0)
    return poses


def volume_track(n: int, spans: Spans, rate: float = RATE, level: float = SPEAKING) -> np.ndarray:
    """Silence with speech over [start, end) second spans."""
    volume = np.zeros(n)
    for start, end in spans:
        volume[int(round(start * rate)):int(round(end * rate))] = level
    return volume


def make_recording(
    speech: Dict[str, Spans],
    duration: float = 20.0,
    poses: Optional[Dict[str, np.ndarray]] = None,
    rate: float = RATE,
    **manifest_fields: object,
) -> SessionRecording:
    """Recording of static users on a circle with scripted speech spans."""
    user_ids = list(speech)
    n = int(round(duration * rate))
    timestamps = np.arange(n) / rate
    poses = poses or {}
    streams = {
        uid: (
            timestamps.copy(),
            poses.get(uid, circle_poses(n, k, len(user_ids))),
            volume_track(n, speech[uid], rate),
        )
        for k, uid in enumerate(user_ids)
    }
    manifest = make_manifest(user_ids, **manifest_fields)  # type: ignore[arg-type]
    return build_recording(manifest, streams, LabelingConfig(frame_rate=rate))


def make_dataset(
    n_sessions: int = 10,
    rows_per_session: int = 20,
    signal: Optional[str] = "main_head_y_vel_mean",
    strength: float = 2.0,
    seed: int = 0,
    task: Task = Task.NEXT_SPEAKER,
) -> LabeledDataset:
    """
    Balanced dataset on the real feature schema with Gaussian columns.

    The signal column is shifted by +strength for positives; without a
    signal the labels are independent of the features.
    """
    schema = build_feature_schema()
    rng = np.random.default_rng(seed)
    n = n_sessions * rows_per_session
    y = np.tile(np.arange(rows_per_session) % 2, n_sessions).astype(np.int64)
    X = rng.normal(size=(n, schema.width))
    if signal is not None:
        X[:, schema.index_of(signal)] += strength * y
    provenance = [
        SampleProvenance(
            session_id=f"s{s:02d}",
            group_id=f"g{s % 5:02d}",
            week=s % 4 + 1,
            onset=float(r),
            main_user=f"s{s:02d}-u{r % 3}",
            reference_user=f"s{s:02d}-u{(r + 1) % 3}",
        )
        for s in range(n_sessions)
        for r in range(rows_per_session)
    ]
    return LabeledDataset(
        task=task,
        X=X,
        y=y,
        provenance=provenance,
        schema=schema,
        header={"task": task.value, "seed": seed},
    )


@pytest.fixture
def config() -> PipelineConfig:
    """Default pipeline configuration."""
    return PipelineConfig()


@pytest.fixture
def recording_factory() -> Callable[..., SessionRecording]:
    """Build recordings from speech spans (see make_recording)."""
    return make_recording


@pytest.fixture
def dataset_factory() -> Callable[..., LabeledDataset]:
    """Build Gaussian datasets on the feature schema (see make_dataset)."""
    return make_dataset


@pytest.fixture
def four_users() -> SessionRecording:
    """Four static users; a and b alternate turns, c backchannels, d is silent."""
    return make_recording(
        {
            "a": [(1.0, 4.0), (9.0, 12.0)],
            "b": [(4.8, 8.0), (13.0, 16.0)],
            "c": [(2.0, 2.6)],
            "d": [],
        },
        duration=20.0,
    )


@pytest.fixture(scope="session")
def synth_session() -> Tuple[SessionRecording, GroundTruth]:
    """One 60 s synthetic session with every cue enabled."""
    return generate_session(SynthConfig(duration=60.0, seed=3))


@pytest.fixture(scope="session")
def tiny_corpus() -> List[SynthSession]:
    """Four groups meeting twice, 60 s per session."""
    return generate_corpus(
        seed=5, n_groups=4, sessions_per_group=2, template=SynthConfig(duration=60.0)
    )
