"""
Speech Labeling Module

Turns per-user volume streams into speech events, resolves who holds the
floor, and categorizes turn transitions.

Pipeline:
1. detect_ipus: runs of frames above the volume threshold (inter-pausal units)
2. smooth_ipus: join same-user events separated by short pauses
3. resolve_main_speaker: drop events completely overlapped by another user's
   event; the speaker who ends last holds the floor, starting when the
   previous main speaker finished
4. categorize_transitions: CleanTurnTaking, OverlapTurnTaking,
   ContinuingSpeech and Backchannel, with a minimum-duration noise filter

Design Decisions:
- Strict volume threshold (volume > threshold)
- Inclusive smoothing boundary (gap <= max_gap)
- Containment is inclusive: an event sharing an endpoint with a longer event
  of another user is completely overlapped by it; of identical events the
  lowest user_id survives
- The noise filter applies to the event that triggered each transition,
  after categorization
- Every function is pure; sessions can be labeled in parallel
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from turntaking.config import LabelingConfig
from turntaking.logging_config import get_logger
from turntaking.models import (
    MainSpeakerTimeline,
    SpeechEvent,
    TimelineSegment,
    TransitionCategory,
    TransitionEvent,
)
from turntaking.services.recording import SessionRecording

logger = get_logger(__name__)

# Tolerance for comparing event boundaries
EPS = 1e-9

# A clock jump above this many frame periods ends a speech run
MAX_FRAME_JUMP = 1.5

_CATEGORY_ORDER = {
    TransitionCategory.CLEAN_TURN_TAKING: 0,
    TransitionCategory.OVERLAP_TURN_TAKING: 1,
    TransitionCategory.CONTINUING_SPEECH: 2,
    TransitionCategory.BACKCHANNEL: 3,
}


# =============================================================================
# Speech Events
# =============================================================================

def detect_ipus(
    user_id: str,
    timestamps: np.ndarray,
    volume: np.ndarray,
    threshold: float = 0.1,
    frame_period: float = 1.0 / 30.0,
) -> List[SpeechEvent]:
    """
    Detect inter-pausal units in one user's volume stream.

    A unit is a maximal run of consecutive frames with volume > threshold.
    It starts at the first frame's timestamp and ends one frame period after
    the last frame's timestamp. A clock jump of more than 1.5 frame periods
    also ends a run.

    Args:
        user_id: Speaker of the stream
        timestamps: (n,) strictly increasing frame timestamps
        volume: (n,) volumes in [0, 1]
        threshold: Speech threshold in (0, 1)
        frame_period: Nominal seconds between frames

    Returns:
        Time-ordered speech events
    """
    timestamps = np.asarray(timestamps, dtype=np.float64)
    active = np.asarray(volume, dtype=np.float64) > threshold
    if not np.any(active):
        return []

    # A run continues only across an active frame that directly follows the
    # previous active frame on the clock
    contiguous = np.zeros_like(active)
    if active.shape[0] > 1:
        close = np.diff(timestamps) <= MAX_FRAME_JUMP * frame_period
        contiguous[1:] = active[1:] & active[:-1] & close
    starts = np.flatnonzero(active & ~contiguous)
    lasts = np.flatnonzero(active & ~np.append(contiguous[1:], False))

    events: List[SpeechEvent] = []
    for first, last in zip(starts, lasts):
        events.append(
            SpeechEvent(
                user_id=user_id,
                start=float(timestamps[first]),
                end=float(timestamps[last]) + frame_period,
            )
        )
    return events


def smooth_ipus(events: Iterable[SpeechEvent], max_gap: float = 0.5) -> List[SpeechEvent]:
    """
    Join adjacent events of the same user separated by at most max_gap seconds.

    Events of different users are never merged.

    Returns:
        Smoothed events ordered by (start, user_id)
    """
    by_user: Dict[str, List[SpeechEvent]] = {}
    for event in events:
        by_user.setdefault(event.user_id, []).append(event)

    merged: List[SpeechEvent] = []
    for user_id, user_events in by_user.items():
        user_events = sorted(user_events, key=lambda e: (e.start, e.end))
        current = user_events[0]
        for event in user_events[1:]:
            if event.start - current.end <= max_gap + EPS:
                current = SpeechEvent(
                    user_id=user_id, start=current.start, end=max(current.end, event.end)
                )
            else:
                merged.append(current)
                current = event
        merged.append(current)

    return sorted(merged, key=lambda e: (e.start, e.user_id))


# =============================================================================
# Main Speaker
# =============================================================================

def _contains(outer: SpeechEvent, inner: SpeechEvent) -> bool:
    """True when outer (another user's event) completely overlaps inner."""
    if outer.user_id == inner.user_id:
        return False
    if outer.start > inner.start + EPS or inner.end > outer.end + EPS:
        return False
    identical = abs(outer.start - inner.start) <= EPS and abs(outer.end - inner.end) <= EPS
    if identical:
        return outer.user_id < inner.user_id
    return True


def split_contained(
    all_events: Sequence[SpeechEvent],
) -> Tuple[List[SpeechEvent], List[Tuple[SpeechEvent, SpeechEvent]]]:
    """
    Separate events completely overlapped by another user's event.

    Returns:
        (kept events, [(removed event, a containing event)])
    """
    kept: List[SpeechEvent] = []
    removed: List[Tuple[SpeechEvent, SpeechEvent]] = []
    ordered = sorted(all_events, key=lambda e: (e.start, -e.end, e.user_id))
    for event in ordered:
        container = next(
            (other for other in ordered if other is not event and _contains(other, event)),
            None,
        )
        if container is None:
            kept.append(event)
        else:
            removed.append((event, container))
    return kept, removed


def resolve_main_speaker(all_events: Sequence[SpeechEvent]) -> MainSpeakerTimeline:
    """
    Build the main-speaker timeline.

    Events completely overlapped by another user's event are dropped. The
    remaining events are swept in order of end time: each event's speaker
    becomes the main speaker from max(event start, previous segment end)
    until the event end. Adjacent segments of the same speaker with zero gap
    are merged.

    Args:
        all_events: Smoothed events of every user in the session

    Returns:
        MainSpeakerTimeline
    """
    kept, _ = split_contained(all_events)
    kept.sort(key=lambda e: (e.end, -e.start, e.user_id))

    segments: List[TimelineSegment] = []
    for event in kept:
        start = event.start if not segments else max(event.start, segments[-1].end)
        if event.end - start <= EPS:
            continue
        last = segments[-1] if segments else None
        if last is not None and last.speaker_id == event.user_id and start - last.end <= EPS:
            segments[-1] = TimelineSegment(
                speaker_id=last.speaker_id,
                start=last.start,
                end=event.end,
                event_start=last.event_start,
                event_end=event.end,
            )
            continue
        segments.append(
            TimelineSegment(
                speaker_id=event.user_id,
                start=start,
                end=event.end,
                event_start=event.start,
                event_end=event.end,
            )
        )

    return MainSpeakerTimeline(segments=segments)


# =============================================================================
# Transitions
# =============================================================================

def categorize_transitions(
    timeline: MainSpeakerTimeline,
    all_events: Sequence[SpeechEvent],
    min_event_dur: float = 0.323,
) -> List[TransitionEvent]:
    """
    Categorize turn transitions.

    - Consecutive timeline segments of different speakers: OverlapTurnTaking
      when the new speech event starts before the previous segment ends,
      CleanTurnTaking otherwise
    - Consecutive segments of the same speaker: ContinuingSpeech
    - Events completely overlapped by another user's event: Backchannel, with
      the main speaker at the onset as previous speaker

    The onset is always the start of the triggering speech event. The first
    segment of a session produces no transition. Transitions whose triggering
    event is shorter than min_event_dur are dropped.

    Returns:
        Transitions ordered by onset
    """
    transitions: List[TransitionEvent] = []

    segments = timeline.segments
    for prev, cur in zip(segments, segments[1:]):
        trigger = cur.event_end - cur.event_start
        if cur.speaker_id == prev.speaker_id:
            category = TransitionCategory.CONTINUING_SPEECH
        elif cur.event_start < prev.end - EPS:
            category = TransitionCategory.OVERLAP_TURN_TAKING
        else:
            category = TransitionCategory.CLEAN_TURN_TAKING
        transitions.append(
            TransitionEvent(
                category=category,
                onset=cur.event_start,
                new_speaker_id=cur.speaker_id,
                previous_speaker_id=prev.speaker_id,
                trigger_duration=trigger,
            )
        )

    _, removed = split_contained(all_events)
    for event, container in removed:
        main = timeline.speaker_at(event.start)
        transitions.append(
            TransitionEvent(
                category=TransitionCategory.BACKCHANNEL,
                onset=event.start,
                new_speaker_id=event.user_id,
                previous_speaker_id=main if main is not None else container.user_id,
                trigger_duration=event.duration,
            )
        )

    kept = [t for t in transitions if t.trigger_duration >= min_event_dur - EPS]
    if len(kept) < len(transitions):
        logger.debug(
            "Dropped short transitions",
            dropped=len(transitions) - len(kept),
            min_event_dur=min_event_dur,
        )
    return sorted(
        kept, key=lambda t: (t.onset, _CATEGORY_ORDER[t.category], t.new_speaker_id)
    )


# =============================================================================
# Session Bundle
# =============================================================================

@dataclass(frozen=True)
class SessionLabels:
    """Everything the labeler derives from one recording."""
    session_id: str
    ipus: List[SpeechEvent]
    events: List[SpeechEvent]
    timeline: MainSpeakerTimeline
    transitions: List[TransitionEvent]
    summary: Dict[str, object] = field(default_factory=dict)

    def transitions_of(self, category: TransitionCategory) -> List[TransitionEvent]:
        """Transitions of one category, in onset order."""
        return [t for t in self.transitions if t.category == category]

    def events_of(self, user_id: str) -> List[SpeechEvent]:
        """Smoothed events of one user, in time order."""
        return [e for e in self.events if e.user_id == user_id]


def summarize_labels(
    rec: SessionRecording,
    events: Sequence[SpeechEvent],
    transitions: Sequence[TransitionEvent],
) -> Dict[str, object]:
    """Speaking time per user, transition counts and session minutes."""
    speaking: Dict[str, float] = {uid: 0.0 for uid in rec.user_ids}
    for event in events:
        speaking[event.user_id] += event.duration
    counts = {category.value: 0 for category in TransitionCategory}
    for transition in transitions:
        counts[transition.category.value] += 1
    return {
        "session_id": rec.session_id,
        "group_id": rec.manifest.group_id,
        "week": rec.manifest.week,
        "minutes": rec.duration / 60.0,
        "speaking_seconds": speaking,
        "transition_counts": counts,
    }


def label_session(
    rec: SessionRecording,
    config: Optional[LabelingConfig] = None,
) -> SessionLabels:
    """
    Run detect -> smooth -> resolve -> categorize on a recording.

    Args:
        rec: Validated recording
        config: Labeling constants

    Returns:
        SessionLabels bundle
    """
    config = config or LabelingConfig()

    ipus: List[SpeechEvent] = []
    for uid in rec.user_ids:
        ipus.extend(
            detect_ipus(
                uid,
                rec.timestamps,
                rec.streams[uid].volume,
                threshold=config.volume_threshold,
                frame_period=rec.frame_period,
            )
        )
    events = smooth_ipus(ipus, config.max_gap)
    timeline = resolve_main_speaker(events)
    transitions = categorize_transitions(timeline, events, config.min_event_duration)
    summary = summarize_labels(rec, events, transitions)

    logger.info(
        "Labeled session",
        session_id=rec.session_id,
        ipus=len(ipus),
        events=len(events),
        segments=len(timeline.segments),
        transitions=summary["transition_counts"],
    )
    return SessionLabels(
        session_id=rec.session_id,
        ipus=sorted(ipus, key=lambda e: (e.start, e.user_id)),
        events=events,
        timeline=timeline,
        transitions=transitions,
        summary=summary,
    )
