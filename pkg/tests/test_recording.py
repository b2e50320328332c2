"""
Tests for the Recording Model

Tests ingest validation, clock alignment, windows and serialization.
"""

import json

import numpy as np
import pytest

from tests.conftest import circle_poses, make_manifest, volume_track
from turntaking.config import LabelingConfig
from turntaking.services.recording import (
    FRAMES_FILENAME,
    MANIFEST_FILENAME,
    GroupTooLarge,
    GroupTooSmall,
    MalformedRecord,
    NonMonotonicTimestamps,
    UnknownUser,
    UserMismatch,
    VolumeOutOfRange,
    WindowOutOfRange,
    WindowTooSparse,
    build_recording,
    discover_sessions,
    load_session_dir,
    parse_frame_line,
    parse_frames,
    parse_manifest,
    serialize_manifest,
    serialize_recording,
    slice_window,
    validate_recording,
    write_recording,
)

RATE = 30.0


def _streams(user_ids, n=90, clock=None):
    timestamps = np.arange(n) / RATE if clock is None else clock
    return {
        uid: (timestamps.copy(), circle_poses(n, k, len(user_ids)), np.zeros(n))
        for k, uid in enumerate(user_ids)
    }


def _frame_line(user="a", t=0.0, vol=0.2):
    pose = {"x": 0.0, "y": 1.6, "z": 0.0, "roll": 0.0, "pitch": 0.0, "yaw": 0.0}
    return json.dumps(
        {"t": t, "user": user, "root": pose, "head": pose, "left": pose, "right": pose,
         "vol": vol}
    )


class TestParsing:
    """Tests for manifest and frame parsing."""

    def test_manifest_group_size(self):
        """Test that two-user and five-user sessions are rejected."""
        small = make_manifest(("a", "b")).model_dump(by_alias=True)
        large = make_manifest(("a", "b", "c", "d", "e"))

        with pytest.raises(GroupTooSmall):
            parse_manifest(json.dumps(small))
        with pytest.raises(GroupTooLarge):
            parse_manifest(serialize_manifest(large))

    def test_manifest_not_json(self):
        """Test a truncated manifest."""
        with pytest.raises(MalformedRecord):
            parse_manifest("{\"session_id\": ")

    def test_frame_line_volume(self):
        """Test that an out-of-range volume gets its own error."""
        with pytest.raises(VolumeOutOfRange):
            parse_frame_line(_frame_line(vol=1.2), 7)

    def test_frame_line_not_json(self):
        """Test that the line number is reported."""
        with pytest.raises(MalformedRecord, match=":3:"):
            parse_frame_line("{oops", 3)

    def test_unknown_user(self):
        """Test frames for users missing from the manifest."""
        manifest = make_manifest()
        lines = [_frame_line("a"), _frame_line("b"), _frame_line("c"), _frame_line("zed")]

        with pytest.raises(UnknownUser):
            parse_frames(lines, manifest)

    def test_roster_user_without_frames(self):
        """Test a manifest user that never appears in the frames."""
        manifest = make_manifest()

        with pytest.raises(UserMismatch):
            parse_frames([_frame_line("a"), _frame_line("b")], manifest)

    def test_blank_lines_ignored(self):
        """Test that empty lines between frames are skipped."""
        manifest = make_manifest()
        lines = [_frame_line("a"), "", _frame_line("b"), "  ", _frame_line("c")]

        streams = parse_frames(lines, manifest)

        assert set(streams) == {"a", "b", "c"}
        assert streams["a"][1].shape == (1, 4, 6)


class TestBuildRecording:
    """Tests for array validation and clock alignment."""

    def test_shared_clock(self):
        """Test that identical clocks keep every frame."""
        rec = build_recording(make_manifest(), _streams(["a", "b", "c"]))

        assert rec.n_frames == 90
        assert rec.dropped_frames == {"a": 0, "b": 0, "c": 0}
        assert rec.duration == pytest.approx(3.0)

    def test_arrays_are_read_only(self):
        """Test that a built recording cannot be modified in place."""
        rec = build_recording(make_manifest(), _streams(["a", "b", "c"]))

        with pytest.raises(ValueError):
            rec.streams["a"].volume[0] = 1.0

    def test_jittered_clock_aligned(self):
        """Test nearest-timestamp alignment within the tolerance."""
        streams = _streams(["a", "b", "c"])
        t, poses, volume = streams["b"]
        streams["b"] = (t + 0.01, poses, volume)

        rec = build_recording(make_manifest(), streams)

        assert rec.n_frames == 90
        np.testing.assert_array_equal(rec.timestamps, streams["a"][0])

    def test_unmatched_frames_dropped(self):
        """Test that ticks missing for one user are removed and reported."""
        streams = _streams(["a", "b", "c"])
        t, poses, volume = streams["c"]
        keep = np.r_[0:40, 50:90]
        streams["c"] = (t[keep], poses[keep], volume[keep])

        rec = build_recording(make_manifest(), streams)

        assert rec.n_frames == 80
        assert rec.dropped_frames["a"] == 10
        assert rec.dropped_frames["c"] == 0

    def test_non_monotonic(self):
        """Test repeated timestamps."""
        streams = _streams(["a", "b", "c"])
        t, poses, volume = streams["a"]
        t = t.copy()
        t[5] = t[4]
        streams["a"] = (t, poses, volume)

        with pytest.raises(NonMonotonicTimestamps):
            build_recording(make_manifest(), streams)

    def test_pitch_out_of_range(self):
        """Test that array poses get the same checks as parsed frames."""
        streams = _streams(["a", "b", "c"])
        t, poses, volume = streams["b"]
        poses = poses.copy()
        poses[3, 1, 4] = 120.0
        streams["b"] = (t, poses, volume)

        with pytest.raises(MalformedRecord):
            build_recording(make_manifest(), streams)

    def test_missing_stream(self):
        """Test a roster user without a stream."""
        streams = _streams(["a", "b"])

        with pytest.raises(UserMismatch):
            build_recording(make_manifest(), streams)


class TestWindowsAndValidation:
    """Tests for slice_window and validate_recording."""

    def test_window_is_half_open(self, four_users):
        """Test that a 1 s window holds exactly 30 frames before its end."""
        window = slice_window(four_users, 4.0, 1.0)

        assert window.n_frames == 30
        assert window.timestamps[0] == pytest.approx(4.0)
        assert window.timestamps[-1] < 5.0
        assert window.user_ids == ["a", "b", "c", "d"]

    def test_window_outside_recording(self, four_users):
        """Test windows that leave the recording."""
        with pytest.raises(WindowOutOfRange):
            slice_window(four_users, -0.5, 1.0)
        with pytest.raises(WindowOutOfRange):
            slice_window(four_users, 19.5, 1.0)
        with pytest.raises(WindowOutOfRange):
            slice_window(four_users, 2.0, 0.0)

    def test_window_too_sparse(self, four_users):
        """Test a window narrower than two frames."""
        with pytest.raises(WindowTooSparse):
            slice_window(four_users, 2.0, 0.03)

    def test_validation_report(self):
        """Test speech fractions and a clock gap."""
        n = 300
        streams = _streams(["a", "b", "c"], n=n)
        t, poses, _ = streams["a"]
        streams["a"] = (t, poses, volume_track(n, [(0.0, 5.0)]))
        keep = np.r_[0:100, 110:n]
        streams = {uid: (s[0][keep], s[1][keep], s[2][keep]) for uid, s in streams.items()}

        report = validate_recording(build_recording(make_manifest(), streams), LabelingConfig())

        assert report.gap_warnings == 1
        assert report.gaps[0].duration == pytest.approx(10 / RATE)
        assert report.speech_fraction["a"] == pytest.approx(140 / 290)
        assert report.speech_fraction["b"] == 0.0
        assert report.frame_counts == {"a": 290, "b": 290, "c": 290}


class TestSerialization:
    """Tests for writing and reloading sessions."""

    def test_write_then_load(self, tmp_path, four_users):
        """Test that a written session loads back to the same arrays and text."""
        directory = write_recording(four_users, tmp_path / "s01")

        loaded = load_session_dir(directory)

        assert (directory / MANIFEST_FILENAME).exists()
        assert (directory / FRAMES_FILENAME).exists()
        np.testing.assert_array_equal(loaded.timestamps, four_users.timestamps)
        for uid in four_users.user_ids:
            np.testing.assert_array_equal(loaded.streams[uid].poses, four_users.streams[uid].poses)
        assert serialize_recording(loaded) == serialize_recording(four_users)

    def test_discover_sessions(self, tmp_path, four_users):
        """Test that only directories holding a manifest count."""
        write_recording(four_users, tmp_path / "b-session")
        write_recording(four_users, tmp_path / "a-session")
        (tmp_path / "notes").mkdir()

        found = discover_sessions(tmp_path)

        assert [p.name for p in found] == ["a-session", "b-session"]

    def test_discover_missing_directory(self, tmp_path):
        """Test a data directory that does not exist."""
        with pytest.raises(FileNotFoundError):
            discover_sessions(tmp_path / "nowhere")
