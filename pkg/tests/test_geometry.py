"""
Tests for Social Geometry

Tests pose composition, body-space transforms, velocities and the
interpersonal measures.
"""

import math

import numpy as np
import pytest

from turntaking.services.geometry import (
    CoincidentHeads,
    WindowGeometry,
    body_space_transform,
    direct_gaze_angle,
    fov_triangle,
    interpersonal_distance,
    velocity_series,
    visual_shared_space,
    world_poses,
    wrap_degrees,
    wrap_yaw,
    yaw_velocity_series,
)
from turntaking.services.recording import (
    HEAD,
    LEFT_HAND,
    FrameWindow,
    WindowTooSparse,
    slice_window,
)

FULL_OVERLAP_1M = 0.5 * math.sin(math.radians(104.0))


def head(x=0.0, z=0.0, yaw=0.0, y=1.6):
    return np.array([x, y, z, 0.0, 0.0, yaw])


def window_of(poses: np.ndarray, user="a") -> FrameWindow:
    n = poses.shape[0]
    return FrameWindow(
        start=0.0,
        duration=n / 30.0,
        timestamps=np.arange(n) / 30.0,
        poses={user: poses},
        volume={user: np.zeros(n)},
    )


def _inside(points: np.ndarray, triangle) -> np.ndarray:
    """Points on the inner side of every edge of a triangle."""
    signs = []
    for i, p in enumerate(triangle):
        q = triangle[(i + 1) % 3]
        signs.append(
            (q[0] - p[0]) * (points[:, 1] - p[1]) - (q[1] - p[1]) * (points[:, 0] - p[0])
        )
    signs = np.stack(signs)
    return np.all(signs >= 0, axis=0) | np.all(signs <= 0, axis=0)


def _sample_triangle(triangle, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points inside a triangle (reflected barycentric draws)."""
    v0, v1, v2 = (np.asarray(v) for v in triangle)
    r = rng.uniform(size=(n, 2))
    flip = r.sum(axis=1) > 1.0
    r[flip] = 1.0 - r[flip]
    return v0 + r[:, :1] * (v1 - v0) + r[:, 1:] * (v2 - v0)


class TestAngles:
    """Tests for angle wrapping and velocities."""

    def test_wrap_ranges(self):
        """Test both wrapping conventions at the seam."""
        assert wrap_degrees(190.0) == pytest.approx(-170.0)
        assert wrap_degrees(180.0) == -180.0
        assert wrap_yaw(-180.0) == 180.0
        assert wrap_yaw(540.0) == 180.0

    def test_yaw_velocity(self):
        """Test a steady turn at 30 Hz."""
        np.testing.assert_allclose(yaw_velocity_series(np.array([0.0, 1.0, 2.0])), [30.0, 30.0])

    def test_yaw_velocity_wraps(self):
        """Test that crossing the seam takes the shortest path."""
        np.testing.assert_allclose(yaw_velocity_series(np.array([179.0, -179.0])), [60.0])
        np.testing.assert_allclose(yaw_velocity_series(np.array([-179.0, 179.0])), [-60.0])

    def test_constant_yaw(self):
        """Test that a still head has zero velocity."""
        assert not np.any(yaw_velocity_series(np.full(5, 42.0)))

    def test_velocity_needs_two_samples(self):
        """Test single-sample input."""
        with pytest.raises(WindowTooSparse):
            velocity_series(np.array([1.0]))


class TestTransforms:
    """Tests for world and body-space transforms."""

    def test_world_poses(self):
        """Test that a device ahead of a turned root lands ahead in world space."""
        poses = np.zeros((1, 4, 6))
        poses[0, 0] = (1.0, 0.0, 2.0, 0.0, 0.0, 90.0)
        poses[0, HEAD] = (0.0, 1.6, 1.0, 0.0, 0.0, 10.0)

        world = world_poses(poses)

        np.testing.assert_allclose(world[0, HEAD, :3], [2.0, 1.6, 2.0], atol=1e-12)
        assert world[0, HEAD, 5] == pytest.approx(100.0)
        np.testing.assert_array_equal(world[0, 0], poses[0, 0])

    def test_centered_head_at_origin(self):
        """Test that the centered head sits at the origin facing forward."""
        poses = np.zeros((2, 4, 6))
        poses[:, HEAD] = head(3.0, 4.0, 90.0)

        body = body_space_transform(window_of(poses), "a", centered=True)

        np.testing.assert_allclose(body.poses[:, 0, :], [[0, 1.6, 0, 0, 0, 0]] * 2, atol=1e-12)

    @pytest.mark.parametrize("heading", [0.0, 30.0, -120.0, 180.0])
    def test_hand_ahead_is_forward(self, heading):
        """Test that a hand 0.5 m ahead of the head is +0.5 forward at any heading."""
        theta = math.radians(heading)
        poses = np.zeros((2, 4, 6))
        poses[:, HEAD] = head(3.0, 4.0, heading)
        poses[:, LEFT_HAND] = head(3.0 + 0.5 * math.sin(theta), 4.0 + 0.5 * math.cos(theta))

        body = body_space_transform(window_of(poses), "a", centered=True)

        assert body.poses[0, 1, 2] == pytest.approx(0.5)
        assert body.poses[0, 1, 0] == pytest.approx(0.0, abs=1e-12)

    def test_uncentered_walk_forward(self):
        """Test that walking along the heading raises the forward coordinate."""
        poses = np.zeros((2, 4, 6))
        poses[0, HEAD] = head(0.0, 0.0, 90.0)
        poses[1, HEAD] = head(0.1, 0.0, 90.0)

        body = body_space_transform(window_of(poses), "a", centered=False)

        assert body.poses[1, 0, 2] > body.poses[0, 0, 2]
        assert body.poses[1, 0, 2] - body.poses[0, 0, 2] == pytest.approx(0.1)


class TestPairwiseMeasures:
    """Tests for gaze angle, distance and visual shared space."""

    def test_gaze_angles(self):
        """Test facing, behind and perpendicular targets."""
        a = head(0.0, 0.0, 0.0)

        assert direct_gaze_angle(a, head(0.0, 2.0)) == pytest.approx(0.0)
        assert direct_gaze_angle(a, head(0.0, -2.0)) == pytest.approx(180.0)
        assert direct_gaze_angle(a, head(-2.0, 0.0)) == pytest.approx(90.0)

    def test_gaze_coincident_heads(self):
        """Test that stacked heads have no gaze angle."""
        with pytest.raises(CoincidentHeads):
            direct_gaze_angle(head(1.0, 1.0), head(1.0, 1.0, y=0.5))

    def test_interpersonal_distance(self):
        """Test horizontal distance ignoring height."""
        assert interpersonal_distance(head(0, 0), head(3, 4)) == pytest.approx(5.0)
        assert interpersonal_distance(head(1, 1, y=1.0), head(1, 1, y=2.0)) == 0.0

    def test_fov_triangle_is_ccw(self):
        """Test vertex orientation for several headings."""
        for yaw in (0.0, 90.0, -135.0):
            (x0, z0), (x1, z1), (x2, z2) = fov_triangle(head(yaw=yaw), 1.0)
            assert (x1 - x0) * (z2 - z0) - (x2 - x0) * (z1 - z0) > 0

    def test_vss_full_overlap(self):
        """Test identical poses against the closed form."""
        pose = head(0.3, -1.0, 45.0)

        assert visual_shared_space(pose, pose, 1.0) == pytest.approx(FULL_OVERLAP_1M)
        assert visual_shared_space(pose, pose, 5.0) == pytest.approx(25 * FULL_OVERLAP_1M)

    def test_vss_back_to_back(self):
        """Test users facing away from each other."""
        assert visual_shared_space(head(0, 0, 0.0), head(0, -0.5, 180.0), 1.0) == 0.0

    def test_vss_far_apart(self):
        """Test users further apart than two side lengths."""
        assert visual_shared_space(head(0, 0, 0.0), head(0, 3.0, 180.0), 1.0) == 0.0

    def test_vss_symmetric(self):
        """Test that swapping the users gives the same area."""
        rng = np.random.default_rng(0)
        for _ in range(50):
            a = head(*rng.uniform(-1, 1, 2), rng.uniform(-179, 180))
            b = head(*rng.uniform(-1, 1, 2), rng.uniform(-179, 180))
            assert visual_shared_space(a, b, 2.0) == visual_shared_space(b, a, 2.0)

    def test_vss_matches_monte_carlo(self):
        """Test the clipped area against uniform sampling."""
        a, b = head(0.0, 0.0, 0.0), head(1.0, 1.0, -90.0)
        rng = np.random.default_rng(1)
        n = 400_000
        points = np.column_stack([rng.uniform(-2.5, 2.5, n), rng.uniform(-1.0, 3.0, n)])

        both = _inside(points, fov_triangle(a, 2.0)) & _inside(points, fov_triangle(b, 2.0))
        estimate = 20.0 * both.mean()

        assert estimate > 0.3
        assert visual_shared_space(a, b, 2.0) == pytest.approx(estimate, rel=0.03)

    @pytest.mark.parametrize("vs_l", [1.0, 5.0, 10.0])
    def test_vss_random_pairs_match_monte_carlo(self, vs_l):
        """Test fifty random overlapping pairs per side length within 1% of sampling."""
        rng = np.random.default_rng(int(vs_l * 10))
        checked = 0
        while checked < 50:
            a = head(*rng.uniform(-vs_l, vs_l, 2), rng.uniform(-179, 180))
            offset = rng.uniform(-vs_l / 2, vs_l / 2, 2)
            b = head(a[0] + offset[0], a[2] + offset[1], a[5] + rng.uniform(-90, 90))
            triangle_a, triangle_b = fov_triangle(a, vs_l), fov_triangle(b, vs_l)
            # Only overlaps of at least a quarter triangle
            if _inside(_sample_triangle(triangle_a, 20_000, rng), triangle_b).mean() < 0.3:
                continue
            fraction = _inside(_sample_triangle(triangle_a, 600_000, rng), triangle_b).mean()
            if fraction < 0.25:
                continue

            estimate = fraction * FULL_OVERLAP_1M * vs_l**2
            assert visual_shared_space(a, b, vs_l) == pytest.approx(estimate, rel=0.01)
            checked += 1

    @pytest.mark.parametrize("vs_l", [1.0, 5.0, 10.0])
    def test_vss_full_and_disjoint_match_monte_carlo(self, vs_l):
        """Test identical and far-apart poses against sampling."""
        rng = np.random.default_rng(3)
        a = head(0.5, -0.5, 30.0)
        far = head(0.5, -0.5 - 3.0 * vs_l, 30.0)
        points = _sample_triangle(fov_triangle(a, vs_l), 100_000, rng)

        assert _inside(points, fov_triangle(a, vs_l)).mean() == 1.0
        assert _inside(points, fov_triangle(far, vs_l)).mean() == 0.0
        assert visual_shared_space(a, a, vs_l) == pytest.approx(FULL_OVERLAP_1M * vs_l**2)
        assert visual_shared_space(a, far, vs_l) == 0.0


class TestWindowGeometry:
    """Tests for the per-window cache."""

    def test_circle_arrangement(self, four_users):
        """Test gaze and distance for users facing the centre of a circle."""
        geometry = WindowGeometry(slice_window(four_users, 1.0, 1.0), vs_lengths=(1.0,))

        np.testing.assert_allclose(geometry.gaze("a", "b"), 45.0)
        np.testing.assert_allclose(geometry.gaze("a", "c"), 0.0, atol=1e-4)
        np.testing.assert_allclose(geometry.distance("a", "c"), 2.4)
        np.testing.assert_allclose(geometry.distance("b", "a"), 1.2 * math.sqrt(2.0))

    def test_memoized(self, four_users):
        """Test that symmetric measures share one cached series."""
        geometry = WindowGeometry(slice_window(four_users, 1.0, 1.0), vs_lengths=(1.0,))

        assert geometry.shared_space("a", "b", 1.0) is geometry.shared_space("b", "a", 1.0)
        assert geometry.gaze("a", "b") is geometry.gaze("a", "b")
