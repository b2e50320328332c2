"""
Tests for Speech Labeling

Tests speech event detection, smoothing, main-speaker resolution and
transition categorization.
"""

import numpy as np
import pytest

from turntaking.models import SpeechEvent, TransitionCategory
from turntaking.services.speech_labeling import (
    categorize_transitions,
    detect_ipus,
    label_session,
    resolve_main_speaker,
    smooth_ipus,
    split_contained,
)

PERIOD = 1.0 / 30.0


def ev(user: str, start: float, end: float) -> SpeechEvent:
    return SpeechEvent(user_id=user, start=start, end=end)


def spans(timeline):
    return [(s.speaker_id, s.start, s.end) for s in timeline.segments]


class TestDetectIpus:
    """Tests for detect_ipus."""

    def test_single_run(self):
        """Test that a run covers its frames plus one frame period."""
        ts = np.arange(5) * PERIOD

        events = detect_ipus("a", ts, np.array([0, 0.2, 0.2, 0, 0]))

        assert len(events) == 1
        assert events[0].start == pytest.approx(PERIOD)
        assert events[0].end == pytest.approx(3 * PERIOD)

    def test_threshold_is_strict(self):
        """Test that volume equal to the threshold is silence."""
        ts = np.arange(4) * PERIOD

        assert detect_ipus("a", ts, np.array([0.1, 0.1, 0.05, 0.0])) == []

    def test_single_silent_frame_splits(self):
        """Test two runs separated by one silent frame."""
        ts = np.arange(3) * PERIOD

        events = detect_ipus("a", ts, np.array([0.2, 0.0, 0.2]))

        assert [e.start for e in events] == pytest.approx([0.0, 2 * PERIOD])
        assert [e.end for e in events] == pytest.approx([PERIOD, 3 * PERIOD])

    def test_clock_jump_ends_run(self):
        """Test that missing frames inside speech end the unit."""
        ts = np.array([0.0, PERIOD, 1.0, 1.0 + PERIOD])

        events = detect_ipus("a", ts, np.full(4, 0.5))

        assert len(events) == 2
        assert events[1].start == 1.0


class TestSmoothIpus:
    """Tests for smooth_ipus."""

    def test_short_pause_merged(self):
        """Test that a 0.3 s pause is bridged."""
        merged = smooth_ipus([ev("a", 0.0, 1.0), ev("a", 1.3, 2.0)])

        assert [(e.start, e.end) for e in merged] == [(0.0, 2.0)]

    def test_boundary_inclusive(self):
        """Test that a pause of exactly max_gap is bridged."""
        merged = smooth_ipus([ev("a", 0.0, 1.0), ev("a", 1.5, 2.0)], max_gap=0.5)

        assert len(merged) == 1

    def test_long_pause_kept(self):
        """Test that a 0.6 s pause keeps two events."""
        merged = smooth_ipus([ev("a", 0.0, 1.0), ev("a", 1.6, 2.0)], max_gap=0.5)

        assert len(merged) == 2

    def test_users_never_merged(self):
        """Test that events of different users stay apart."""
        merged = smooth_ipus([ev("a", 0.0, 1.0), ev("b", 1.1, 2.0)])

        assert [e.user_id for e in merged] == ["a", "b"]


class TestResolveMainSpeaker:
    """Tests for resolve_main_speaker."""

    def test_contained_event_ignored(self):
        """Test that a completely overlapped event never takes the floor."""
        timeline = resolve_main_speaker([ev("a", 0, 2), ev("b", 0.5, 1.5)])

        assert spans(timeline) == [("a", 0, 2)]

    def test_floor_passes_at_previous_end(self):
        """Test that an overlapping speaker takes over when the main speaker stops."""
        timeline = resolve_main_speaker([ev("a", 0, 2), ev("b", 1, 3)])

        assert spans(timeline) == [("a", 0, 2), ("b", 2, 3)]
        assert timeline.segments[1].event_start == 1

    def test_single_speaker(self):
        """Test a lone speaker."""
        assert spans(resolve_main_speaker([ev("a", 0, 1)])) == [("a", 0, 1)]

    def test_identical_events_tie_break(self):
        """Test that of two identical events the lowest user id survives."""
        kept, removed = split_contained([ev("b", 0, 2), ev("a", 0, 2)])

        assert [e.user_id for e in kept] == ["a"]
        assert removed[0][0].user_id == "b"

    def test_shared_endpoint_counts_as_contained(self):
        """Test that an event ending with a longer event is contained."""
        kept, removed = split_contained([ev("a", 0, 2), ev("b", 1, 2)])

        assert [e.user_id for e in kept] == ["a"]
        assert len(removed) == 1

    def test_input_order_irrelevant(self):
        """Test that permuting the events gives the same timeline."""
        events = [ev("a", 0, 2), ev("b", 1, 3), ev("c", 2.5, 4), ev("a", 5, 6)]

        forward = resolve_main_speaker(events)
        backward = resolve_main_speaker(list(reversed(events)))

        assert forward == backward


class TestCategorizeTransitions:
    """Tests for categorize_transitions."""

    def _categorize(self, events, min_event_dur=0.323):
        timeline = resolve_main_speaker(events)
        return categorize_transitions(timeline, events, min_event_dur)

    def test_clean_turn_taking(self):
        """Test a pause between speakers."""
        transitions = self._categorize([ev("a", 0, 5.0), ev("b", 5.4, 7.0)])

        assert len(transitions) == 1
        t = transitions[0]
        assert t.category == TransitionCategory.CLEAN_TURN_TAKING
        assert t.onset == 5.4
        assert (t.previous_speaker_id, t.new_speaker_id) == ("a", "b")

    def test_overlap_turn_taking(self):
        """Test a new speaker starting before the old one ends."""
        transitions = self._categorize([ev("a", 0, 2), ev("b", 1.5, 3)])

        assert [t.category for t in transitions] == [TransitionCategory.OVERLAP_TURN_TAKING]
        assert transitions[0].onset == 1.5

    def test_short_backchannel_filtered(self):
        """Test that a 0.2 s interjection produces nothing."""
        assert self._categorize([ev("a", 0, 2), ev("b", 1.0, 1.2)]) == []

    def test_backchannel(self):
        """Test a long enough interjection inside another user's speech."""
        transitions = self._categorize([ev("a", 0, 3), ev("b", 1.0, 1.5)])

        assert len(transitions) == 1
        t = transitions[0]
        assert t.category == TransitionCategory.BACKCHANNEL
        assert (t.onset, t.previous_speaker_id, t.new_speaker_id) == (1.0, "a", "b")

    def test_continuing_speech(self):
        """Test the main speaker resuming after a long pause."""
        transitions = self._categorize([ev("a", 0, 2), ev("a", 3, 5)])

        assert [t.category for t in transitions] == [TransitionCategory.CONTINUING_SPEECH]
        assert transitions[0].previous_speaker_id == transitions[0].new_speaker_id == "a"

    def test_min_duration_boundary(self):
        """Test that a trigger of exactly the minimum duration is kept."""
        kept = self._categorize([ev("a", 0, 2), ev("b", 3, 3.5)], min_event_dur=0.5)
        dropped = self._categorize([ev("a", 0, 2), ev("b", 3, 3.4)], min_event_dur=0.5)

        assert len(kept) == 1
        assert dropped == []

    def test_first_segment_has_no_transition(self):
        """Test that the opening turn is not a transition."""
        assert self._categorize([ev("a", 0, 2)]) == []


class TestLabelSession:
    """Tests for label_session on a built recording."""

    def test_four_user_scenario(self, four_users):
        """Test three clean turns and one backchannel."""
        labels = label_session(four_users)

        clean = labels.transitions_of(TransitionCategory.CLEAN_TURN_TAKING)
        backchannels = labels.transitions_of(TransitionCategory.BACKCHANNEL)

        assert [t.onset for t in clean] == pytest.approx([4.8, 9.0, 13.0])
        assert [t.new_speaker_id for t in clean] == ["b", "a", "b"]
        assert len(backchannels) == 1
        assert backchannels[0].new_speaker_id == "c"
        assert backchannels[0].previous_speaker_id == "a"
        assert labels.summary["transition_counts"] == {
            "CleanTurnTaking": 3,
            "OverlapTurnTaking": 0,
            "Backchannel": 1,
            "ContinuingSpeech": 0,
        }

    def test_events_and_timeline(self, four_users):
        """Test the smoothed events and floor holders."""
        labels = label_session(four_users)

        assert labels.events_of("d") == []
        a_events = labels.events_of("a")
        assert [e.start for e in a_events] == pytest.approx([1.0, 9.0])
        assert [e.end for e in a_events] == pytest.approx([4.0, 12.0])
        assert [s.speaker_id for s in labels.timeline.segments] == ["a", "b", "a", "b"]
        assert labels.summary["speaking_seconds"]["d"] == 0.0

    def test_silent_session(self, recording_factory):
        """Test that silence yields no events."""
        labels = label_session(recording_factory({"a": [], "b": [], "c": []}, duration=5.0))

        assert labels.events == []
        assert labels.transitions == []
        assert labels.timeline.segments == []
