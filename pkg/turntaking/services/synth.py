"""
Synthetic Session Generator

Generates multi-user sessions with a scripted turn structure and optional
nonverbal cues before turn-taking onsets, together with the ground truth
needed to check the labeler and the learners end to end.

Script:
- A semi-Markov process on integer frames: turns of random length, then
  continuing speech, a clean turn change after a pause, or an overlapping
  turn change
- The next speaker is drawn with weights exp(w * (extraversion - 4))
- Some turns carry a backchannel from a listener, or a 0.2 s interjection
  that the noise filter must remove

Motion:
- Roots stand on a circle facing its centre; head and controllers move
  relative to the root with smoothed Ornstein-Uhlenbeck noise
- Head yaw follows a gaze target (the floor holder, an addressee, or a short
  glance elsewhere) through a first-order lag

Cues, in the second before a scripted turn-taking onset (each kind fires
independently with probability cues.probability):
- the upcoming speaker raises the head and the left controller at constant
  speed, and nods (2 Hz pitch oscillation)
- the other users turn their gaze toward the upcoming speaker

Design Decisions:
- Timestamps are frame_index / frame_rate, so scripted onsets are exact
- Every random draw comes from one PCG64 generator seeded per session
- Personalities are fixed per group so they stay stable across weeks
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.signal import lfilter, lfilter_zi

from turntaking.config import LabelingConfig, derive_seed
from turntaking.exceptions import InvalidConfig
from turntaking.logging_config import get_logger
from turntaking.models import (
    Big5,
    ManifestUser,
    SessionManifest,
    SpeechEvent,
    TransitionCategory,
    TransitionEvent,
)
from turntaking.services.geometry import wrap_yaw
from turntaking.services.recording import (
    HEAD,
    LEFT_HAND,
    RIGHT_HAND,
    ROOT,
    SessionRecording,
    build_recording,
    write_recording,
)
from turntaking.services.speech_labeling import label_session

logger = get_logger(__name__)

TRUTH_FILENAME = "truth.json"
NOD_FREQUENCY = 2.0
INTERJECTION_SECONDS = 0.2
CUE_SECONDS = 1.0
CUE_KINDS: Tuple[str, ...] = ("head", "hand", "nod", "gaze")
# Extras (backchannels, interjections) keep this distance from turn boundaries
EXTRA_MARGIN_START = 1.5
EXTRA_MARGIN_END = 1.5


# =============================================================================
# Configuration
# =============================================================================

class _SynthSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class CueConfig(_SynthSection):
    """Effect sizes of the injected cues (0 disables a cue)."""
    head_raise: float = Field(default=0.3, ge=0.0, description="Head rise speed (m/s)")
    hand_raise: float = Field(default=0.3, ge=0.0, description="Left controller rise (m/s)")
    gaze_convergence: float = Field(default=20.0, ge=0.0, description="Gaze shift (degrees)")
    nod: float = Field(default=60.0, ge=0.0, description="Peak nod pitch speed (deg/s)")
    extraversion_weight: float = Field(default=0.5, ge=0.0)
    probability: float = Field(
        default=0.6, ge=0.0, le=1.0, description="Chance each cue precedes a given onset"
    )

    @classmethod
    def disabled(cls) -> "CueConfig":
        """No nonverbal cue and no personality effect."""
        return cls(head_raise=0.0, hand_raise=0.0, gaze_convergence=0.0, nod=0.0,
                   extraversion_weight=0.0)


class NoiseConfig(_SynthSection):
    """Motion noise levels."""
    position: float = Field(default=0.01, ge=0.0, description="Positional noise (m)")
    angle: float = Field(default=3.0, ge=0.0, description="Angular noise (degrees)")
    timescale: float = Field(default=1.0, gt=0.0, description="Mean reversion time (s)")
    smoothing: float = Field(default=0.15, gt=0.0, description="Low-pass time constant (s)")
    gaze_lag: float = Field(default=0.25, gt=0.0, description="Head-to-target lag (s)")


class SynthConfig(_SynthSection):
    """One synthetic session."""
    session_id: str = "synth-g01-w1"
    group_id: str = "g01"
    week: int = Field(default=1, ge=1, le=4)
    group_size: int = Field(default=4, ge=3, le=4)
    duration: float = Field(default=180.0, gt=0.0, description="Session length (s)")
    frame_rate: float = Field(default=30.0, gt=0.0)
    turn_duration: Tuple[float, float] = (2.5, 5.0)
    clean_pause: Tuple[float, float] = (0.6, 1.5)
    continue_pause: Tuple[float, float] = (0.7, 2.0)
    overlap: Tuple[float, float] = (0.3, 0.8)
    backchannel_duration: Tuple[float, float] = (0.4, 0.6)
    p_continue: float = Field(default=0.3, ge=0.0, le=1.0)
    p_overlap: float = Field(default=0.2, ge=0.0, le=1.0)
    p_backchannel: float = Field(default=0.3, ge=0.0, le=1.0)
    p_interjection: float = Field(default=0.15, ge=0.0, le=1.0)
    circle_radius: float = Field(default=1.2, gt=0.0)
    cues: CueConfig = CueConfig()
    noise: NoiseConfig = NoiseConfig()
    big5: Optional[List[Tuple[float, float, float, float, float]]] = None
    seed: int = 0

    @model_validator(mode="after")
    def check_consistency(self) -> "SynthConfig":
        """Ranges are ordered, probabilities compose, pauses survive smoothing."""
        for name in ("turn_duration", "clean_pause", "continue_pause", "overlap",
                     "backchannel_duration"):
            low, high = getattr(self, name)
            if not 0.0 < low <= high or not math.isfinite(high):
                raise ValueError(f"{name} must satisfy 0 < low <= high")
        if self.p_continue + self.p_overlap > 1.0:
            raise ValueError("p_continue + p_overlap must not exceed 1")
        if self.p_backchannel + self.p_interjection > 1.0:
            raise ValueError("p_backchannel + p_interjection must not exceed 1")
        if self.overlap[1] >= self.turn_duration[0]:
            raise ValueError("overlaps must be shorter than the shortest turn")
        if self.big5 is not None and len(self.big5) != self.group_size:
            raise ValueError("big5 needs one entry per user")
        return self

    @property
    def user_ids(self) -> List[str]:
        """Roster of the session."""
        return [f"{self.group_id}-p{k + 1}" for k in range(self.group_size)]


def load_synth_config(path: Path) -> SynthConfig:
    """
    Read a SynthConfig from JSON.

    Raises:
        InvalidConfig: If the document does not validate
    """
    try:
        return SynthConfig.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except ValidationError as e:
        raise InvalidConfig(f"Invalid synth config {path}: {e}") from e


# =============================================================================
# Ground Truth
# =============================================================================

class CueInterval(BaseModel):
    """A scripted cue before an onset; for gaze, user_id is the one looked at."""
    model_config = ConfigDict(frozen=True)

    kind: str
    user_id: str
    start: float
    end: float


class GroundTruth(BaseModel):
    """Scripted speech, transitions and cues of a synthetic session."""
    session_id: str
    events: List[SpeechEvent]
    transitions: List[TransitionEvent]
    expected_filtered: List[SpeechEvent] = []
    cues: List[CueInterval] = []


class LabelingScore(BaseModel):
    """Labeler output compared with the scripted transitions."""
    session_id: str
    confusion: Dict[str, Dict[str, int]]
    matched: int
    missed: int
    spurious: int
    onset_error_mean: float
    onset_error_max: float
    filtered_expected: int
    filtered_recovered: int

    @property
    def accuracy(self) -> float:
        """Share of scripted transitions recovered with the right category."""
        total = sum(sum(row.values()) for row in self.confusion.values())
        correct = sum(row.get(category, 0) for category, row in self.confusion.items())
        return correct / total if total else 1.0


# =============================================================================
# Script
# =============================================================================

@dataclass
class _Script:
    turns: List[Tuple[int, int, int]]
    events: List[Tuple[int, int, int]]
    transitions: List[Tuple[TransitionCategory, int, int, int, int]]
    filtered: List[Tuple[int, int, int]]


def _frames(rng: np.random.Generator, bounds: Tuple[float, float], rate: float) -> int:
    return max(1, int(round(rng.uniform(*bounds) * rate)))


def _choose_next(
    rng: np.random.Generator, current: int, extraversion: np.ndarray, weight: float
) -> int:
    candidates = [u for u in range(extraversion.shape[0]) if u != current]
    logits = weight * (extraversion[candidates] - 4.0)
    probs = np.exp(logits - logits.max())
    return int(candidates[rng.choice(len(candidates), p=probs / probs.sum())])


def _script(cfg: SynthConfig, extraversion: np.ndarray, rng: np.random.Generator) -> _Script:
    """Semi-Markov turn script on integer frames."""
    rate = cfg.frame_rate
    n_frames = int(round(cfg.duration * rate))
    weight = cfg.cues.extraversion_weight

    turns: List[Tuple[int, int, int]] = []
    events: List[Tuple[int, int, int]] = []
    transitions: List[Tuple[TransitionCategory, int, int, int, int]] = []
    filtered: List[Tuple[int, int, int]] = []

    logits = weight * (extraversion - 4.0)
    probs = np.exp(logits - logits.max())
    speaker = int(rng.choice(cfg.group_size, p=probs / probs.sum()))
    start = int(round(2.0 * rate))
    pending: Optional[Tuple[TransitionCategory, int]] = None

    while True:
        end = start + _frames(rng, cfg.turn_duration, rate)
        if end > n_frames - int(rate):
            break
        turns.append((speaker, start, end))
        events.append((speaker, start, end))
        if pending is not None:
            category, previous = pending
            transitions.append((category, start, speaker, previous, end - start))

        # At most one extra utterance per turn
        room_start = start + int(round(EXTRA_MARGIN_START * rate))
        room_end = end - int(round(EXTRA_MARGIN_END * rate))
        draw = rng.uniform()
        listeners = [u for u in range(cfg.group_size) if u != speaker]
        if draw < cfg.p_backchannel + cfg.p_interjection:
            interjection = draw >= cfg.p_backchannel
            length = (
                int(round(INTERJECTION_SECONDS * rate)) if interjection
                else _frames(rng, cfg.backchannel_duration, rate)
            )
            if room_end - room_start >= length:
                who = int(listeners[rng.integers(len(listeners))])
                at = int(rng.integers(room_start, room_end - length + 1))
                events.append((who, at, at + length))
                if interjection:
                    filtered.append((who, at, at + length))
                else:
                    transitions.append(
                        (TransitionCategory.BACKCHANNEL, at, who, speaker, length)
                    )

        draw = rng.uniform()
        if draw < cfg.p_continue:
            start = end + _frames(rng, cfg.continue_pause, rate)
            pending = (TransitionCategory.CONTINUING_SPEECH, speaker)
            continue
        upcoming = _choose_next(rng, speaker, extraversion, weight)
        if draw < cfg.p_continue + cfg.p_overlap:
            start = end - _frames(rng, cfg.overlap, rate)
            pending = (TransitionCategory.OVERLAP_TURN_TAKING, speaker)
        else:
            start = end + _frames(rng, cfg.clean_pause, rate)
            pending = (TransitionCategory.CLEAN_TURN_TAKING, speaker)
        speaker = upcoming

    return _Script(turns=turns, events=events, transitions=transitions, filtered=filtered)


# =============================================================================
# Signals
# =============================================================================

def ou_noise(
    rng: np.random.Generator, n: int, sigma: float, timescale: float, rate: float
) -> np.ndarray:
    """Stationary Ornstein-Uhlenbeck series sampled at rate."""
    if sigma == 0.0:
        return np.zeros(n)
    phi = math.exp(-1.0 / (timescale * rate))
    x0 = rng.normal(0.0, sigma)
    shocks = rng.normal(0.0, 1.0, n)
    series, _ = lfilter([sigma * math.sqrt(1.0 - phi ** 2)], [1.0, -phi], shocks, zi=[phi * x0])
    return series


def low_pass(series: np.ndarray, time_constant: float, rate: float) -> np.ndarray:
    """First-order lag, starting settled at the first sample."""
    alpha = 1.0 - math.exp(-1.0 / (time_constant * rate))
    b, a = [alpha], [1.0, alpha - 1.0]
    out, _ = lfilter(b, a, series, zi=lfilter_zi(b, a) * series[0])
    return out


def _smooth_noise(
    rng: np.random.Generator, n: int, sigma: float, noise: NoiseConfig, rate: float
) -> np.ndarray:
    return low_pass(ou_noise(rng, n, sigma, noise.timescale, rate), noise.smoothing, rate)


def _ramp_profile(n: int, onsets: Sequence[int], rate: float) -> np.ndarray:
    """Rises 1 unit over the second before each onset, decays over the next."""
    profile = np.zeros(n)
    span = int(round(CUE_SECONDS * rate))
    ramp = np.arange(span) / rate
    for onset in onsets:
        lo = max(onset - span, 0)
        profile[lo:onset] += ramp[span - (onset - lo):]
        hi = min(onset + span, n)
        profile[onset:hi] += CUE_SECONDS * (1.0 - np.arange(hi - onset) / span)
    return profile


def _nod_profile(n: int, onsets: Sequence[int], rate: float, peak_speed: float) -> np.ndarray:
    """Pitch oscillation at 2 Hz whose peak angular speed is peak_speed."""
    profile = np.zeros(n)
    if peak_speed == 0.0:
        return profile
    amplitude = peak_speed / (2.0 * math.pi * NOD_FREQUENCY)
    span = int(round(CUE_SECONDS * rate))
    wave = amplitude * np.sin(2.0 * math.pi * NOD_FREQUENCY * np.arange(span) / rate)
    for onset in onsets:
        lo = max(onset - span, 0)
        profile[lo:onset] += wave[span - (onset - lo):]
    return profile


def _floor_holders(script: _Script, n: int) -> np.ndarray:
    """Scripted floor holder per frame (last turn start at or before the frame)."""
    holder = np.full(n, script.turns[0][0], dtype=np.int64)
    for speaker, start, _ in script.turns:
        holder[start:] = speaker
    return holder


def _gaze_targets(
    script: _Script, n: int, group_size: int, rate: float, rng: np.random.Generator
) -> np.ndarray:
    """(n, group_size) index of the user each user looks at."""
    holder = _floor_holders(script, n)
    targets = np.empty((n, group_size), dtype=np.int64)
    for user in range(group_size):
        others = [u for u in range(group_size) if u != user]
        addressee = others[int(rng.integers(len(others)))]
        next_switch = 0
        for k in range(n):
            if k >= next_switch:
                addressee = others[int(rng.integers(len(others)))]
                next_switch = k + int(rng.uniform(2.0, 4.0) * rate)
            targets[k, user] = addressee if holder[k] == user else holder[k]
        # Occasional glances elsewhere
        k = int(rng.uniform(1.0, 6.0) * rate)
        while k < n:
            length = int(rng.uniform(0.8, 1.6) * rate)
            targets[k:k + length, user] = others[int(rng.integers(len(others)))]
            k += length + int(rng.uniform(3.0, 8.0) * rate)
    return targets


# =============================================================================
# Generation
# =============================================================================

def _sample_big5(rng: np.random.Generator, group_size: int) -> np.ndarray:
    """Trait scores on the 1..7 scale in steps of 0.5."""
    return rng.integers(2, 15, size=(group_size, 5)) / 2.0


def generate_session(cfg: SynthConfig) -> Tuple[SessionRecording, GroundTruth]:
    """
    Generate one session and its ground truth.

    Raises:
        InvalidConfig: If the session is too short to hold a turn
    """
    rate = cfg.frame_rate
    n = int(round(cfg.duration * rate))
    if cfg.duration < 2.0 + cfg.turn_duration[1] + 1.0:
        raise InvalidConfig(f"Session of {cfg.duration} s is too short for one scripted turn")

    rng = np.random.default_rng(cfg.seed)
    traits = (
        np.array(cfg.big5, dtype=np.float64) if cfg.big5 is not None
        else _sample_big5(rng, cfg.group_size)
    )
    script = _script(cfg, traits[:, 2], rng)
    if not script.transitions:
        raise InvalidConfig("Scripted session holds no transition; increase duration")

    user_ids = cfg.user_ids
    timestamps = np.arange(n) / rate

    # Each cue precedes a turn-taking onset of the upcoming speaker independently
    cue_onsets: Dict[str, Dict[int, List[int]]] = {
        kind: {u: [] for u in range(cfg.group_size)} for kind in CUE_KINDS
    }
    for category, onset, new, _, _ in script.transitions:
        if category not in (TransitionCategory.CLEAN_TURN_TAKING,
                            TransitionCategory.OVERLAP_TURN_TAKING):
            continue
        fired = rng.uniform(size=len(CUE_KINDS)) < cfg.cues.probability
        for kind, on in zip(CUE_KINDS, fired):
            if on:
                cue_onsets[kind][new].append(onset)

    # Placement on a circle, facing the centre
    angles = 2.0 * math.pi * np.arange(cfg.group_size) / cfg.group_size
    root_xz = cfg.circle_radius * np.stack([np.sin(angles), np.cos(angles)], axis=1)
    root_yaw = wrap_yaw(np.degrees(angles) + 180.0)

    targets = _gaze_targets(script, n, cfg.group_size, rate, rng)
    span = int(round(CUE_SECONDS * rate))

    streams: Dict[str, Tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    for user, uid in enumerate(user_ids):
        noise = cfg.noise
        poses = np.zeros((n, 4, 6))
        poses[:, ROOT, 0] = root_xz[user, 0]
        poses[:, ROOT, 2] = root_xz[user, 1]
        poses[:, ROOT, 5] = root_yaw[user]

        # Gaze: local yaw toward each target's root
        direction = root_xz[targets[:, user]] - root_xz[user]
        world_target = np.degrees(np.arctan2(direction[:, 0], direction[:, 1]))
        local_target = wrap_yaw(world_target - root_yaw[user])
        for other, onsets in cue_onsets["gaze"].items():
            if other == user or cfg.cues.gaze_convergence == 0.0:
                continue
            toward = root_xz[other] - root_xz[user]
            other_yaw = wrap_yaw(
                math.degrees(math.atan2(toward[0], toward[1])) - root_yaw[user]
            )
            for onset in onsets:
                lo = max(onset - span, 0)
                shift = np.clip(
                    other_yaw - local_target[lo:onset],
                    -cfg.cues.gaze_convergence,
                    cfg.cues.gaze_convergence,
                )
                local_target[lo:onset] += shift
        head_yaw = low_pass(local_target, noise.gaze_lag, rate)
        head_yaw += _smooth_noise(rng, n, noise.angle, noise, rate)

        head_height = rng.uniform(1.5, 1.75)

        poses[:, HEAD, 0] = _smooth_noise(rng, n, noise.position, noise, rate)
        poses[:, HEAD, 1] = (
            head_height + cfg.cues.head_raise * _ramp_profile(n, cue_onsets["head"][user], rate)
            + _smooth_noise(rng, n, noise.position, noise, rate)
        )
        poses[:, HEAD, 2] = _smooth_noise(rng, n, noise.position, noise, rate)
        poses[:, HEAD, 3] = _smooth_noise(rng, n, noise.angle, noise, rate)
        poses[:, HEAD, 4] = (
            _nod_profile(n, cue_onsets["nod"][user], rate, cfg.cues.nod)
            + _smooth_noise(rng, n, noise.angle, noise, rate)
        )
        poses[:, HEAD, 5] = wrap_yaw(head_yaw)

        for slot, side in ((LEFT_HAND, -1.0), (RIGHT_HAND, 1.0)):
            poses[:, slot, 0] = side * 0.25 + _smooth_noise(rng, n, noise.position, noise, rate)
            poses[:, slot, 1] = (
                head_height - 0.5 + _smooth_noise(rng, n, noise.position, noise, rate)
            )
            poses[:, slot, 2] = 0.3 + _smooth_noise(rng, n, noise.position, noise, rate)
            for dof in (3, 4):
                poses[:, slot, dof] = _smooth_noise(rng, n, noise.angle, noise, rate)
            poses[:, slot, 5] = wrap_yaw(_smooth_noise(rng, n, noise.angle, noise, rate))
        poses[:, LEFT_HAND, 1] += cfg.cues.hand_raise * _ramp_profile(
            n, cue_onsets["hand"][user], rate
        )

        poses[:, :, 4] = np.clip(poses[:, :, 4], -89.0, 89.0)

        volume = rng.uniform(0.0, 0.05, n)
        for speaker, start, end in script.events:
            if speaker == user:
                volume[start:end] = rng.uniform(0.3, 0.8, end - start)
        streams[uid] = (timestamps.copy(), poses, volume)

    manifest = SessionManifest(
        session_id=cfg.session_id,
        group_id=cfg.group_id,
        week=cfg.week,
        users=[
            ManifestUser(user_id=uid, big5=Big5.model_validate(dict(zip("ocean", traits[k]))))
            for k, uid in enumerate(user_ids)
        ],
    )
    recording = build_recording(manifest, streams, LabelingConfig(frame_rate=rate))
    truth = _ground_truth(cfg, script, cue_onsets)
    logger.debug(
        "Generated session",
        session_id=cfg.session_id,
        frames=n,
        events=len(script.events),
        transitions=len(script.transitions),
    )
    return recording, truth


def _ground_truth(
    cfg: SynthConfig, script: _Script, cue_onsets: Dict[str, Dict[int, List[int]]]
) -> GroundTruth:
    rate = cfg.frame_rate
    ids = cfg.user_ids
    events = sorted(
        (SpeechEvent(user_id=ids[u], start=s / rate, end=e / rate) for u, s, e in script.events),
        key=lambda e: (e.start, e.user_id),
    )
    transitions = sorted(
        (
            TransitionEvent(
                category=category,
                onset=onset / rate,
                new_speaker_id=ids[new],
                previous_speaker_id=ids[previous],
                trigger_duration=length / rate,
            )
            for category, onset, new, previous, length in script.transitions
        ),
        key=lambda t: (t.onset, t.new_speaker_id),
    )
    cues = sorted(
        (
            CueInterval(
                kind=kind,
                user_id=ids[user],
                start=max(onset / rate - CUE_SECONDS, 0.0),
                end=onset / rate,
            )
            for kind, per_user in cue_onsets.items()
            for user, onsets in per_user.items()
            for onset in onsets
        ),
        key=lambda c: (c.start, c.user_id, c.kind),
    )
    return GroundTruth(
        session_id=cfg.session_id,
        events=events,
        transitions=transitions,
        expected_filtered=[
            SpeechEvent(user_id=ids[u], start=s / rate, end=e / rate) for u, s, e in script.filtered
        ],
        cues=cues,
    )


# =============================================================================
# Verification
# =============================================================================

def verify_labeling(
    rec: SessionRecording,
    truth: GroundTruth,
    config: Optional[LabelingConfig] = None,
) -> LabelingScore:
    """
    Compare labeler output with the scripted transitions.

    A scripted transition is matched by the detected transition of the same
    new speaker whose onset is closest, within one frame.
    """
    config = config or LabelingConfig(frame_rate=rec.frame_rate)
    detected = list(label_session(rec, config).transitions)
    tolerance = rec.frame_period + 1e-9

    confusion: Dict[str, Dict[str, int]] = {}
    errors: List[float] = []
    used = set()
    for expected in truth.transitions:
        best = None
        for i, found in enumerate(detected):
            if i in used or found.new_speaker_id != expected.new_speaker_id:
                continue
            error = abs(found.onset - expected.onset)
            if error <= tolerance and (best is None or error < best[1]):
                best = (i, error)
        row = confusion.setdefault(expected.category.value, {})
        if best is None:
            row["Missed"] = row.get("Missed", 0) + 1
            continue
        used.add(best[0])
        errors.append(best[1])
        label = detected[best[0]].category.value
        row[label] = row.get(label, 0) + 1

    recovered = sum(
        1 for event in truth.expected_filtered
        if not any(
            found.new_speaker_id == event.user_id and abs(found.onset - event.start) <= tolerance
            for found in detected
        )
    )
    missed = sum(row.get("Missed", 0) for row in confusion.values())
    return LabelingScore(
        session_id=rec.session_id,
        confusion=confusion,
        matched=len(errors),
        missed=missed,
        spurious=len(detected) - len(used),
        onset_error_mean=float(np.mean(errors)) if errors else 0.0,
        onset_error_max=float(np.max(errors)) if errors else 0.0,
        filtered_expected=len(truth.expected_filtered),
        filtered_recovered=recovered,
    )


# =============================================================================
# Corpus
# =============================================================================

@dataclass(frozen=True)
class SynthSession:
    """A generated session with its truth."""
    recording: SessionRecording
    truth: GroundTruth


def corpus_configs(
    seed: int,
    n_groups: int = 10,
    sessions_per_group: int = 2,
    template: Optional[SynthConfig] = None,
) -> List[SynthConfig]:
    """
    Session configs of a groups x weeks corpus.

    Group g meets in weeks g % 4 + 1, (g + 2) % 4 + 1, ... so that every week
    is covered; group sizes alternate between 3 and 4; personalities are
    drawn once per group.
    """
    template = template or SynthConfig()
    configs: List[SynthConfig] = []
    for g in range(n_groups):
        group_id = f"g{g + 1:02d}"
        size = 3 + (g % 2)
        traits_rng = np.random.default_rng(derive_seed(seed, f"traits:{group_id}"))
        big5 = [tuple(row) for row in _sample_big5(traits_rng, size).tolist()]
        for s in range(sessions_per_group):
            week = (g + 2 * s) % 4 + 1
            session_id = f"{group_id}-s{s + 1}-w{week}"
            configs.append(
                template.model_copy(
                    update={
                        "session_id": session_id,
                        "group_id": group_id,
                        "week": week,
                        "group_size": size,
                        "big5": big5,
                        "seed": derive_seed(seed, f"synth:{session_id}"),
                    }
                )
            )
    return configs


def generate_corpus(
    seed: int,
    n_groups: int = 10,
    sessions_per_group: int = 2,
    template: Optional[SynthConfig] = None,
    out_dir: Optional[Path] = None,
    jobs: int = 1,
) -> List[SynthSession]:
    """
    Generate a corpus and optionally write one directory per session.

    Returns:
        Sessions in config order
    """
    configs = corpus_configs(seed, n_groups, sessions_per_group, template)
    results = Parallel(n_jobs=jobs)(delayed(generate_session)(cfg) for cfg in configs)
    sessions = [SynthSession(recording=rec, truth=truth) for rec, truth in results]
    if out_dir is not None:
        for session in sessions:
            write_session(session, Path(out_dir) / session.recording.session_id)
    logger.info("Generated corpus", sessions=len(sessions), groups=n_groups, seed=seed)
    return sessions


def write_session(session: SynthSession, directory: Path) -> Path:
    """Recording files plus the ground-truth document."""
    directory = write_recording(session.recording, directory)
    (directory / TRUTH_FILENAME).write_text(
        json.dumps(session.truth.model_dump(mode="json"), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return directory


def load_truth(directory: Path) -> GroundTruth:
    """Ground truth written next to a synthetic recording."""
    return GroundTruth.model_validate_json(
        (Path(directory) / TRUTH_FILENAME).read_text(encoding="utf-8")
    )
