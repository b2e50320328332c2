"""
Recording Model Module

This module loads, validates, aligns, slices and writes session recordings.

On disk a session is two files:
- manifest.json: {session_id, group_id, week, users: [{user_id, big5: {o,c,e,a,n}}]}
- frames.jsonl: one UserFrame per line,
  {"t", "user", "root": {x,y,z,roll,pitch,yaw}, "head", "left", "right", "vol"}

Head and controller poses are expressed in the user's root coordinate system;
the root carries the user's placement in the virtual environment.

Design Decisions:
- Validate every frame with the pydantic UserFrame model at ingest; invalid
  values are rejected with the line number, never clamped
- Hold frame streams as numpy arrays on one shared clock after ingest
- Align users onto the first roster user's clock by nearest timestamp within
  a tolerance; frames that cannot be matched are dropped and reported
- Canonical serialization (timestamp order, then roster order, fixed key order,
  shortest round-trip floats) so that load -> serialize reproduces the input
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from turntaking.config import LabelingConfig
from turntaking.exceptions import PipelineInputError
from turntaking.logging_config import get_logger
from turntaking.models import (
    DOF_NAMES,
    ClockGap,
    SessionManifest,
    UserFrame,
    ValidationReport,
)

logger = get_logger(__name__)

# Device slots of the (n_frames, 4, 6) pose arrays
ROOT, HEAD, LEFT_HAND, RIGHT_HAND = 0, 1, 2, 3
DEVICE_KEYS: Tuple[str, ...] = ("root", "head", "left", "right")
# Column tokens of the tracked points summarized by egocentric features
BODY_DEVICE_NAMES: Tuple[str, ...] = ("head", "lh", "rh")

MIN_GROUP_SIZE = 3
MAX_GROUP_SIZE = 4

# Tolerance for comparing frame timestamps against window boundaries
TIME_EPS = 1e-9

MANIFEST_FILENAME = "manifest.json"
FRAMES_FILENAME = "frames.jsonl"


# =============================================================================
# Exceptions
# =============================================================================

class RecordingError(PipelineInputError):
    """Base exception for recording ingest failures."""
    pass


class MalformedRecord(RecordingError):
    """A line or document does not parse or violates a type invariant."""
    pass


class VolumeOutOfRange(MalformedRecord):
    """A frame carries a volume outside [0, 1]."""
    pass


class UnknownUser(RecordingError):
    """A frame references a user that is not in the manifest."""
    pass


class UserMismatch(RecordingError):
    """Manifest roster and frame streams disagree."""
    pass


class GroupTooSmall(RecordingError):
    """Sessions with fewer than three users are excluded."""
    pass


class GroupTooLarge(RecordingError):
    """Sessions with more than four users are not supported."""
    pass


class NonMonotonicTimestamps(RecordingError):
    """A user's timestamps are not strictly increasing."""
    pass


class WindowOutOfRange(RecordingError):
    """A requested window leaves the recording span."""
    pass


class WindowTooSparse(RecordingError):
    """A window holds fewer than two frames for some user."""
    pass


# =============================================================================
# Containers
# =============================================================================

@dataclass(frozen=True)
class UserStream:
    """
    One user's aligned frame stream.

    Attributes:
        user_id: Roster id
        poses: (n_frames, 4, 6) array; device slots root/head/left/right,
            DOF order x, y, z, roll, pitch, yaw
        volume: (n_frames,) voice volume in [0, 1]
    """
    user_id: str
    poses: np.ndarray
    volume: np.ndarray


@dataclass(frozen=True)
class SessionRecording:
    """
    A validated session: manifest plus per-user streams on one shared clock.

    Immutable after construction; the arrays are flagged read-only so the
    recording can be shared across workers.
    """
    manifest: SessionManifest
    timestamps: np.ndarray
    streams: Dict[str, UserStream]
    frame_rate: float = 30.0
    dropped_frames: Dict[str, int] = field(default_factory=dict)

    @property
    def session_id(self) -> str:
        """Session identifier."""
        return self.manifest.session_id

    @property
    def user_ids(self) -> List[str]:
        """Users in roster order."""
        return self.manifest.user_ids

    @property
    def n_frames(self) -> int:
        """Frames on the shared clock."""
        return int(self.timestamps.shape[0])

    @property
    def frame_period(self) -> float:
        """Nominal seconds between frames."""
        return 1.0 / self.frame_rate

    @property
    def start(self) -> float:
        """Timestamp of the first frame."""
        return float(self.timestamps[0])

    @property
    def end(self) -> float:
        """End of the last frame (last timestamp plus one frame period)."""
        return float(self.timestamps[-1]) + self.frame_period

    @property
    def duration(self) -> float:
        """Recording span in seconds."""
        return self.end - self.start


@dataclass(frozen=True)
class FrameWindow:
    """Frames with start <= t < start + duration for every user."""
    start: float
    duration: float
    timestamps: np.ndarray
    poses: Dict[str, np.ndarray]
    volume: Dict[str, np.ndarray]
    frame_rate: float = 30.0

    @property
    def n_frames(self) -> int:
        """Frames per user in the window."""
        return int(self.timestamps.shape[0])

    @property
    def user_ids(self) -> List[str]:
        """Users present in the window."""
        return list(self.poses.keys())


# =============================================================================
# Parsing
# =============================================================================

def check_group_size(manifest: SessionManifest) -> None:
    """
    Enforce the supported group sizes.

    Raises:
        GroupTooSmall: Fewer than three users
        GroupTooLarge: More than four users
    """
    size = manifest.group_size
    if size < MIN_GROUP_SIZE:
        raise GroupTooSmall(
            f"Session {manifest.session_id} has {size} users; at least {MIN_GROUP_SIZE} required"
        )
    if size > MAX_GROUP_SIZE:
        raise GroupTooLarge(
            f"Session {manifest.session_id} has {size} users; at most {MAX_GROUP_SIZE} supported"
        )


def parse_manifest(text: str, source: str = "<manifest>") -> SessionManifest:
    """
    Parse and validate a manifest document.

    Raises:
        MalformedRecord: If the JSON does not parse or validate
        GroupTooSmall / GroupTooLarge: If the roster size is unsupported
    """
    try:
        manifest = SessionManifest.model_validate(json.loads(text))
    except (json.JSONDecodeError, ValidationError) as e:
        raise MalformedRecord(f"{source}: invalid manifest: {e}") from e
    check_group_size(manifest)
    return manifest


def parse_frame_line(line: str, line_number: int, source: str = "<frames>") -> UserFrame:
    """
    Parse one frames-file line.

    Raises:
        VolumeOutOfRange: If the volume is outside [0, 1]
        MalformedRecord: For any other parse or invariant failure
    """
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as e:
        raise MalformedRecord(f"{source}:{line_number}: not valid JSON: {e}") from e
    try:
        return UserFrame.model_validate(payload)
    except ValidationError as e:
        if any(err["loc"] and err["loc"][0] in ("vol", "volume") for err in e.errors()):
            raise VolumeOutOfRange(f"{source}:{line_number}: {e}") from e
        raise MalformedRecord(f"{source}:{line_number}: {e}") from e


def _frames_to_arrays(
    frames: Sequence[UserFrame],
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack a user's frames into (timestamps, poses, volume) arrays."""
    timestamps = np.array([f.timestamp for f in frames], dtype=np.float64)
    poses = np.array(
        [
            [f.root.as_tuple(), f.head.as_tuple(), f.left_hand.as_tuple(), f.right_hand.as_tuple()]
            for f in frames
        ],
        dtype=np.float64,
    ).reshape(len(frames), 4, 6)
    volume = np.array([f.volume for f in frames], dtype=np.float64)
    return timestamps, poses, volume


def parse_frames(
    lines: Iterable[str],
    manifest: SessionManifest,
    source: str = "<frames>",
) -> Dict[str, Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """
    Parse frame lines into per-user arrays.

    Returns:
        Mapping user_id -> (timestamps, poses, volume), in roster order

    Raises:
        MalformedRecord / VolumeOutOfRange: Invalid line
        UnknownUser: Frame for a user not in the manifest
        UserMismatch: Roster user without frames
    """
    roster = set(manifest.user_ids)
    per_user: Dict[str, List[UserFrame]] = {uid: [] for uid in manifest.user_ids}

    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        frame = parse_frame_line(line, line_number, source)
        if frame.user_id not in roster:
            raise UnknownUser(
                f"{source}:{line_number}: user {frame.user_id!r} not in manifest "
                f"{manifest.session_id}"
            )
        per_user[frame.user_id].append(frame)

    missing = [uid for uid, frames in per_user.items() if not frames]
    if missing:
        raise UserMismatch(f"{source}: no frames for manifest users {missing}")

    return {uid: _frames_to_arrays(frames) for uid, frames in per_user.items()}


# =============================================================================
# Construction and Alignment
# =============================================================================

def _check_pose_arrays(user_id: str, poses: np.ndarray, volume: np.ndarray) -> None:
    """Vectorized version of the DevicePose / UserFrame invariants."""
    if poses.ndim != 3 or poses.shape[1:] != (4, 6):
        raise MalformedRecord(f"user {user_id}: pose array must have shape (n, 4, 6)")
    if not np.all(np.isfinite(poses)):
        raise MalformedRecord(f"user {user_id}: non-finite pose value")
    yaw = poses[:, :, 5]
    pitch = poses[:, :, 4]
    if np.any(yaw <= -180.0) or np.any(yaw > 180.0):
        raise MalformedRecord(f"user {user_id}: yaw outside (-180, 180]")
    if np.any(pitch < -90.0) or np.any(pitch > 90.0):
        raise MalformedRecord(f"user {user_id}: pitch outside [-90, 90]")
    if not np.all(np.isfinite(volume)) or np.any(volume < 0.0) or np.any(volume > 1.0):
        raise VolumeOutOfRange(f"user {user_id}: volume outside [0, 1]")


def _nearest_indices(source: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Index of the nearest source timestamp for every target timestamp."""
    right = np.clip(np.searchsorted(source, targets, side="left"), 0, len(source) - 1)
    left = np.clip(right - 1, 0, len(source) - 1)
    pick_left = np.abs(source[left] - targets) <= np.abs(source[right] - targets)
    return np.where(pick_left, left, right)


def build_recording(
    manifest: SessionManifest,
    streams: Dict[str, Tuple[np.ndarray, np.ndarray, np.ndarray]],
    config: Optional[LabelingConfig] = None,
) -> SessionRecording:
    """
    Validate per-user arrays and align them onto one clock.

    The first roster user's timestamps define the clock. Every other user is
    matched by nearest timestamp within config.align_tolerance; clock ticks
    where any user has no match are dropped, as are unmatched frames.

    Args:
        manifest: Validated session manifest
        streams: user_id -> (timestamps, poses (n, 4, 6), volume)
        config: Labeling config (frame rate, alignment tolerance)

    Returns:
        Validated SessionRecording

    Raises:
        UserMismatch, UnknownUser, NonMonotonicTimestamps, MalformedRecord,
        VolumeOutOfRange, GroupTooSmall, GroupTooLarge
    """
    config = config or LabelingConfig()
    check_group_size(manifest)

    unknown = sorted(set(streams) - set(manifest.user_ids))
    if unknown:
        raise UnknownUser(f"Streams for users not in manifest: {unknown}")
    missing = [uid for uid in manifest.user_ids if uid not in streams]
    if missing:
        raise UserMismatch(f"No frames for manifest users {missing}")

    for uid in manifest.user_ids:
        timestamps, poses, volume = streams[uid]
        if timestamps.shape[0] != poses.shape[0] or timestamps.shape[0] != volume.shape[0]:
            raise MalformedRecord(f"user {uid}: stream arrays differ in length")
        if timestamps.shape[0] == 0:
            raise UserMismatch(f"user {uid}: empty stream")
        if not np.all(np.isfinite(timestamps)):
            raise MalformedRecord(f"user {uid}: non-finite timestamp")
        if np.any(np.diff(timestamps) <= 0):
            raise NonMonotonicTimestamps(f"user {uid}: timestamps not strictly increasing")
        _check_pose_arrays(uid, poses, volume)

    reference_id = manifest.user_ids[0]
    clock = streams[reference_id][0]
    keep = np.ones(clock.shape[0], dtype=bool)
    matches: Dict[str, np.ndarray] = {}
    for uid in manifest.user_ids:
        timestamps = streams[uid][0]
        idx = _nearest_indices(timestamps, clock)
        matched = np.abs(timestamps[idx] - clock) <= config.align_tolerance + TIME_EPS
        keep &= matched
        matches[uid] = idx

    if not np.any(keep):
        raise UserMismatch(f"Session {manifest.session_id}: no common frames after alignment")

    aligned: Dict[str, UserStream] = {}
    dropped: Dict[str, int] = {}
    for uid in manifest.user_ids:
        timestamps, poses, volume = streams[uid]
        idx = matches[uid][keep]
        dropped[uid] = int(timestamps.shape[0] - np.unique(idx).shape[0])
        user_poses = np.ascontiguousarray(poses[idx])
        user_volume = np.ascontiguousarray(volume[idx])
        user_poses.setflags(write=False)
        user_volume.setflags(write=False)
        aligned[uid] = UserStream(user_id=uid, poses=user_poses, volume=user_volume)

    shared_clock = np.ascontiguousarray(clock[keep])
    shared_clock.setflags(write=False)

    if any(dropped.values()):
        logger.warning(
            "Dropped frames during clock alignment",
            session_id=manifest.session_id,
            dropped=dropped,
        )

    return SessionRecording(
        manifest=manifest,
        timestamps=shared_clock,
        streams=aligned,
        frame_rate=config.frame_rate,
        dropped_frames=dropped,
    )


def load_recording(
    manifest_path: Path,
    frames_path: Path,
    config: Optional[LabelingConfig] = None,
) -> SessionRecording:
    """
    Load and validate a recording from its manifest and frames files.

    Args:
        manifest_path: Path to the manifest JSON document
        frames_path: Path to the JSONL frames file
        config: Labeling config (frame rate, alignment tolerance)

    Returns:
        SessionRecording aligned onto a common clock

    Raises:
        FileNotFoundError: If either file is missing
        RecordingError: For any content problem (see subclasses)
    """
    manifest_path = Path(manifest_path)
    frames_path = Path(frames_path)
    manifest = parse_manifest(manifest_path.read_text(encoding="utf-8"), str(manifest_path))

    with frames_path.open("r", encoding="utf-8") as handle:
        streams = parse_frames(handle, manifest, str(frames_path))

    recording = build_recording(manifest, streams, config)
    logger.info(
        "Loaded recording",
        session_id=recording.session_id,
        users=len(recording.user_ids),
        frames=recording.n_frames,
        duration_s=round(recording.duration, 3),
    )
    return recording


def load_session_dir(directory: Path, config: Optional[LabelingConfig] = None) -> SessionRecording:
    """Load a session stored as <directory>/manifest.json + frames.jsonl."""
    directory = Path(directory)
    return load_recording(directory / MANIFEST_FILENAME, directory / FRAMES_FILENAME, config)


def discover_sessions(data_dir: Path) -> List[Path]:
    """
    Session directories under data_dir, sorted by name.

    A directory counts as a session when it holds a manifest file.
    """
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise FileNotFoundError(f"Recording directory not found: {data_dir}")
    return sorted(p.parent for p in data_dir.glob(f"*/{MANIFEST_FILENAME}"))


# =============================================================================
# Validation and Windows
# =============================================================================

def validate_recording(
    rec: SessionRecording,
    config: Optional[LabelingConfig] = None,
) -> ValidationReport:
    """
    Summarize a recording without raising.

    Reports per-user frame counts, clock gaps longer than config.gap_warning
    (missing time between consecutive frames beyond one frame period), the
    fraction of frames above the volume threshold, and alignment drops.
    """
    config = config or LabelingConfig()
    period = rec.frame_period

    gaps: List[ClockGap] = []
    if rec.n_frames > 1:
        missing = np.diff(rec.timestamps) - period
        for i in np.flatnonzero(missing > config.gap_warning):
            gaps.append(ClockGap(start=float(rec.timestamps[i]), duration=float(missing[i])))

    speech_fraction = {
        uid: float(np.mean(stream.volume > config.volume_threshold))
        for uid, stream in rec.streams.items()
    }
    all_volume = np.concatenate([s.volume for s in rec.streams.values()])

    report = ValidationReport(
        session_id=rec.session_id,
        frame_counts={uid: int(s.volume.shape[0]) for uid, s in rec.streams.items()},
        gaps=gaps,
        speech_fraction=speech_fraction,
        overall_speech_fraction=float(np.mean(all_volume > config.volume_threshold)),
        dropped_frames=dict(rec.dropped_frames),
        duration_seconds=rec.duration,
    )

    if gaps:
        logger.warning(
            "Clock gaps found",
            session_id=rec.session_id,
            num_gaps=len(gaps),
            longest_s=max(g.duration for g in gaps),
        )
    return report


def slice_window(rec: SessionRecording, start: float, duration: float) -> FrameWindow:
    """
    Frames with start <= t < start + duration for every user.

    Raises:
        WindowOutOfRange: If the window leaves [rec.start, rec.end] or duration <= 0
        WindowTooSparse: If fewer than two frames fall inside
    """
    if not duration > 0:
        raise WindowOutOfRange(f"Window duration must be positive, got {duration}")
    if start < rec.start - TIME_EPS or start + duration > rec.end + TIME_EPS:
        raise WindowOutOfRange(
            f"Window [{start:.3f}, {start + duration:.3f}) outside recording "
            f"[{rec.start:.3f}, {rec.end:.3f}] of {rec.session_id}"
        )

    i0 = int(np.searchsorted(rec.timestamps, start - TIME_EPS, side="left"))
    i1 = int(np.searchsorted(rec.timestamps, start + duration - TIME_EPS, side="left"))
    if i1 - i0 < 2:
        raise WindowTooSparse(
            f"Window at {start:.3f} of {rec.session_id} holds {i1 - i0} frame(s); need 2"
        )

    return FrameWindow(
        start=start,
        duration=duration,
        timestamps=rec.timestamps[i0:i1],
        poses={uid: s.poses[i0:i1] for uid, s in rec.streams.items()},
        volume={uid: s.volume[i0:i1] for uid, s in rec.streams.items()},
        frame_rate=rec.frame_rate,
    )


# =============================================================================
# Serialization
# =============================================================================

def _pose_dict(values: np.ndarray) -> Dict[str, float]:
    """Pose row as an ordered {x, y, z, roll, pitch, yaw} mapping."""
    return {name: float(v) for name, v in zip(DOF_NAMES, values)}


def serialize_manifest(manifest: SessionManifest) -> str:
    """Canonical manifest document."""
    return json.dumps(manifest.model_dump(by_alias=True), indent=2) + "\n"


def serialize_frames(rec: SessionRecording) -> str:
    """
    Canonical frames file: timestamp order, then roster order.

    Floats are written in shortest round-trip form, so parsing the output
    reproduces the arrays exactly.
    """
    lines: List[str] = []
    for i, t in enumerate(rec.timestamps):
        for uid in rec.user_ids:
            stream = rec.streams[uid]
            record = {"t": float(t), "user": uid}
            for slot, key in enumerate(DEVICE_KEYS):
                record[key] = _pose_dict(stream.poses[i, slot])
            record["vol"] = float(stream.volume[i])
            lines.append(json.dumps(record, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def serialize_recording(rec: SessionRecording) -> Tuple[str, str]:
    """Canonical (manifest, frames) text of a recording."""
    return serialize_manifest(rec.manifest), serialize_frames(rec)


def write_recording(rec: SessionRecording, directory: Path) -> Path:
    """
    Write a recording as <directory>/manifest.json + frames.jsonl.

    Returns:
        The session directory
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest_text, frames_text = serialize_recording(rec)
    (directory / MANIFEST_FILENAME).write_text(manifest_text, encoding="utf-8")
    (directory / FRAMES_FILENAME).write_text(frames_text, encoding="utf-8")
    logger.debug("Wrote recording", session_id=rec.session_id, path=str(directory))
    return directory
