"""
Tests for Feature Extraction

Tests the feature schema, speech features, traits and the motion features of
extracted samples.
"""

import numpy as np
import pytest

from tests.conftest import circle_poses, make_recording
from turntaking.config import FeatureConfig, LabelingConfig, PipelineConfig
from turntaking.models import FeatureGroup, MainSpeakerTimeline, TimelineSegment
from turntaking.services.features import (
    InvalidSamplePair,
    SampleRequest,
    build_feature_schema,
    extract_sample,
    extract_samples,
    speech_recency_features,
    speech_sequence_features,
    speech_sequence_symbols,
    trait_features,
    trivial_egocentric_features,
    turns_before,
)
from turntaking.services.recording import HEAD, UnknownUser, WindowOutOfRange, build_recording
from turntaking.services.speech_labeling import label_session


def timeline_of(*turns) -> MainSpeakerTimeline:
    return MainSpeakerTimeline(
        segments=[
            TimelineSegment(speaker_id=s, start=a, end=b, event_start=a, event_end=b)
            for s, a, b in turns
        ]
    )


class TestFeatureSchema:
    """Tests for the column layout."""

    def test_group_widths(self):
        """Test the default schema size per group."""
        schema = build_feature_schema()
        widths = {group: len(schema.indices_of_group(group)) for group in FeatureGroup}

        assert schema.width == 383
        assert widths == {
            FeatureGroup.SPEECH: 43,
            FeatureGroup.TRAITS: 16,
            FeatureGroup.EGOCENTRIC: 216,
            FeatureGroup.DYADIC: 36,
            FeatureGroup.GROUP_REL: 72,
        }

    def test_names(self):
        """Test a sample of column names."""
        names = build_feature_schema().names

        assert names[:4] == ["seq_1_u", "seq_1_a", "seq_1_b", "seq_1_c"]
        assert "main_has_spoken" in names
        assert "group_mean_extraversion" in names
        assert "ref_rh_pitch_vel_max" in names
        assert "dyad_vss10_raw_mean" in names
        assert "group_gaze_others_to_ref_vel_min" in names

    def test_fewer_triangle_lengths(self):
        """Test that the schema follows the configured triangle lengths."""
        schema = build_feature_schema(FeatureConfig(vs_lengths=(1.0, 5.0)))

        assert schema.width == 383 - 6 - 12
        assert schema.schema_hash != build_feature_schema().schema_hash

    def test_standardized_columns(self):
        """Test that one-hot and binary columns are not standardized."""
        schema = build_feature_schema()
        mask = schema.continuous_mask()

        assert sum(mask) == 383 - 40 - 1
        assert not mask[schema.index_of("main_has_spoken")]

    def test_trivial_egocentric(self):
        """Test the identically zero centered head columns."""
        trivial = trivial_egocentric_features()

        assert len(trivial) == 18
        assert "main_head_x_raw_mean" in trivial
        assert "ref_head_yaw_raw_max" in trivial
        assert "main_head_y_raw_mean" not in trivial


class TestSpeechFeatures:
    """Tests for the speaker sequence and recency features."""

    def test_sequence_symbols(self):
        """Test letters in order of first appearance walking backward."""
        timeline = timeline_of(("a", 0, 1), ("b", 1, 2), ("a", 2, 3), ("c", 3, 4))

        symbols = speech_sequence_symbols(timeline, "b", 5.0)

        assert symbols == ["a", "b", "u", "b"] + [None] * 6

    def test_sequence_before_speech(self):
        """Test a moment before anyone spoke."""
        timeline = timeline_of(("a", 2, 3))

        assert speech_sequence_symbols(timeline, "b", 1.0) == [None] * 10
        assert not speech_sequence_features(timeline, "b", 1.0).any()

    def test_single_other_speaker(self):
        """Test one speaker who is not the main user."""
        symbols = speech_sequence_symbols(timeline_of(("m", 0, 5)), "x", 6.0)

        assert symbols == ["a"] + [None] * 9

    def test_one_hot_layout(self):
        """Test that each present turn sets exactly one column."""
        timeline = timeline_of(("a", 0, 1), ("b", 1, 2))

        encoded = speech_sequence_features(timeline, "a", 3.0).reshape(10, 4)

        np.testing.assert_array_equal(encoded[0], [0, 1, 0, 0])
        np.testing.assert_array_equal(encoded[1], [1, 0, 0, 0])
        assert encoded[2:].sum() == 0

    def test_same_speaker_segments_form_one_turn(self):
        """Test that continuing speech does not add a turn."""
        timeline = timeline_of(("a", 0, 1), ("a", 2, 3), ("b", 4, 5))

        turns = turns_before(timeline, 6.0)

        assert [(t.speaker_id, t.start, t.end) for t in turns] == [("b", 4, 5), ("a", 0, 3)]

    def test_turns_started_at_t_excluded(self):
        """Test that a turn starting at the moment is not history."""
        timeline = timeline_of(("a", 0, 1), ("b", 2, 3))

        assert [t.speaker_id for t in turns_before(timeline, 2.0)] == ["a"]

    def test_recency_previous_but_one(self):
        """Test a main user who spoke two turns ago."""
        timeline = timeline_of(("u", 0, 2), ("v", 2.5, 5.5))

        recency = speech_recency_features(timeline, "u", 6.0)

        assert recency == {
            "turns_since_last_speech": 2.0,
            "time_since_last_speech_end": 4.0,
            "has_spoken": 1.0,
        }

    def test_recency_turn_ending_at_t(self):
        """Test a main user whose turn ends exactly at the moment."""
        recency = speech_recency_features(timeline_of(("u", 0, 3)), "u", 3.0)

        assert recency["turns_since_last_speech"] == 1.0
        assert recency["time_since_last_speech_end"] == 0.0

    def test_recency_never_spoken(self):
        """Test the sentinel for a silent main user."""
        timeline = timeline_of(("v", 0, 1), ("w", 1, 2))

        recency = speech_recency_features(timeline, "u", 7.5, session_start=0.5)

        assert recency == {
            "turns_since_last_speech": 3.0,
            "time_since_last_speech_end": 7.0,
            "has_spoken": 0.0,
        }


class TestTraitFeatures:
    """Tests for trait_features."""

    def test_values(self, four_users):
        """Test main, reference and group mean extraversion."""
        values = trait_features(four_users.manifest, "a", "b")

        assert values.shape == (16,)
        assert values[2] == 2.0
        assert values[7] == 3.0
        assert values[12] == 3.5
        assert values[15] == 4.0

    def test_three_user_group_size(self, recording_factory):
        """Test group size of a three-user session."""
        rec = recording_factory({"a": [], "b": [], "c": []}, duration=3.0)

        assert trait_features(rec.manifest, "a", "c")[-1] == 3.0

    def test_unknown_user(self, four_users):
        """Test a user outside the roster."""
        with pytest.raises(UnknownUser):
            trait_features(four_users.manifest, "a", "zed")


class TestExtractSample:
    """Tests for extract_sample."""

    def setup_method(self):
        self.schema = build_feature_schema()

    def value(self, vector, name):
        return vector.values[self.schema.index_of(name)]

    def test_vector_and_provenance(self, four_users):
        """Test shape, hash and provenance of a sample."""
        timeline = label_session(four_users).timeline

        vector = extract_sample(four_users, timeline, 4.8, "b", "a")

        assert vector.values.shape == (383,)
        assert vector.schema_hash == self.schema.schema_hash
        assert vector.provenance.session_id == "s01"
        assert vector.provenance.main_user == "b"
        assert vector.provenance.reference_user == "a"
        assert np.all(np.isfinite(vector.values))

    def test_static_circle(self, four_users):
        """Test motion and geometry features of users standing still."""
        timeline = label_session(four_users).timeline

        vector = extract_sample(four_users, timeline, 5.0, "a", "c")

        for name in trivial_egocentric_features():
            assert self.value(vector, name) == pytest.approx(0.0, abs=1e-9)
        assert self.value(vector, "main_head_y_raw_mean") == pytest.approx(1.6)
        assert self.value(vector, "main_head_y_vel_max") == 0.0
        assert self.value(vector, "dyad_ipd_raw_mean") == pytest.approx(2.4)
        assert self.value(vector, "dyad_gaze_main_to_ref_raw_mean") == pytest.approx(0.0, abs=1e-4)
        assert self.value(vector, "group_gaze_main_to_others_raw_mean") == pytest.approx(45.0)
        assert self.value(vector, "group_size") == 4.0

    def test_head_rise_velocity(self):
        """Test that a steady head rise shows up as head-y velocity."""
        n = 300
        poses = circle_poses(n, 1, 3)
        poses[:, HEAD, 1] = 1.6 + 0.3 * np.arange(n) / 30.0
        rec = make_recording({"a": [], "b": [], "c": []}, duration=10.0, poses={"b": poses})
        timeline = label_session(rec).timeline

        vector = extract_sample(rec, timeline, 5.0, "b", "a")

        assert self.value(vector, "main_head_y_vel_mean") == pytest.approx(0.3)
        assert self.value(vector, "ref_head_y_vel_mean") == 0.0

    def test_only_past_frames_used(self):
        """Test that frames at or after the moment never change the sample."""
        n = 300
        still = circle_poses(n, 0, 3)
        moved = still.copy()
        moved[150:, HEAD, 1] += 0.5
        moved[150:, HEAD, 4] = 30.0
        speech = {"a": [(1.0, 3.0)], "b": [(3.5, 4.5)], "c": []}

        before = make_recording(speech, duration=10.0, poses={"a": still})
        after = make_recording(speech, duration=10.0, poses={"a": moved})
        timeline = label_session(before).timeline

        original = extract_sample(before, timeline, 5.0, "a", "b")
        changed = extract_sample(after, timeline, 5.0, "a", "b")
        later = extract_sample(after, timeline, 5.5, "a", "b")

        np.testing.assert_array_equal(original.values, changed.values)
        assert not np.array_equal(original.values, later.values)

    def test_future_frames_never_used(self, tiny_corpus):
        """Test fifty random moments whose later frames are all scrambled."""
        rng = np.random.default_rng(12)
        window = FeatureConfig().window
        recordings = [session.recording for session in tiny_corpus]
        timelines = [label_session(rec).timeline for rec in recordings]

        for _ in range(50):
            k = int(rng.integers(len(recordings)))
            rec, timeline = recordings[k], timelines[k]
            t = float(rng.uniform(rec.start + window + 1.0, rec.end - 1.0))
            main, ref = rng.choice(rec.user_ids, size=2, replace=False)
            first_future = int(np.searchsorted(rec.timestamps, t, side="left"))

            streams = {}
            for uid in rec.user_ids:
                poses = rec.streams[uid].poses.copy()
                volume = rec.streams[uid].volume.copy()
                poses[first_future:] += rng.normal(scale=0.5, size=poses[first_future:].shape)
                volume[first_future:] = 1.0 - volume[first_future:]
                streams[uid] = (rec.timestamps.copy(), poses, volume)
            scrambled = build_recording(
                rec.manifest, streams, LabelingConfig(frame_rate=rec.frame_rate)
            )

            original = extract_sample(rec, timeline, t, str(main), str(ref))
            perturbed = extract_sample(scrambled, timeline, t, str(main), str(ref))

            np.testing.assert_array_equal(original.values, perturbed.values)

    def test_same_pair_rejected(self, four_users):
        """Test main and reference user being the same person."""
        timeline = label_session(four_users).timeline

        with pytest.raises(InvalidSamplePair):
            extract_sample(four_users, timeline, 5.0, "a", "a")

    def test_window_before_start(self, four_users):
        """Test a moment without a full window of history."""
        timeline = label_session(four_users).timeline

        with pytest.raises(WindowOutOfRange):
            extract_sample(four_users, timeline, 0.5, "a", "b")

    def test_batch_matches_single(self, four_users):
        """Test that parallel extraction keeps request order and values."""
        timeline = label_session(four_users).timeline
        requests = [
            SampleRequest(onset=4.8, main_user="b", ref_user="a"),
            SampleRequest(onset=9.0, main_user="a", ref_user="b"),
            SampleRequest(onset=13.0, main_user="d", ref_user="a"),
        ]

        serial = extract_samples(four_users, timeline, requests, PipelineConfig(), jobs=1)
        parallel = extract_samples(four_users, timeline, requests, PipelineConfig(), jobs=2)

        assert [v.provenance.onset for v in parallel] == [4.8, 9.0, 13.0]
        for a, b in zip(serial, parallel):
            np.testing.assert_array_equal(a.values, b.values)
