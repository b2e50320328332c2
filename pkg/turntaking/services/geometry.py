"""
Social Geometry Module

Coordinate transforms and the interpersonal measures computed from tracked
head poses: direct gaze angle, interpersonal distance and visual shared space.

Conventions:
- Positions are metres, angles are degrees
- y is up; the horizontal plane is (x, z)
- Yaw 0 faces +z; a heading psi points along (sin psi, cos psi) in (x, z)
- Body space puts the head's heading on +z and its right-hand side on +x

Design Decisions:
- Head and controller poses are stored relative to the user's root; they are
  composed into world poses (root translation and yaw; the rig stays level)
  before any interpersonal measure
- Visual shared space clips one field-of-view triangle by the other
  (Sutherland-Hodgman) and takes the shoelace area; pose order is
  canonicalized first so the measure is exactly symmetric
- Angle differences always take the shortest signed path
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from turntaking.exceptions import PipelineInputError
from turntaking.services.recording import (
    HEAD,
    LEFT_HAND,
    RIGHT_HAND,
    ROOT,
    FrameWindow,
    WindowTooSparse,
)

DEFAULT_FOV_DEGREES = 104.0

# Heads closer than this on the horizontal plane have no defined gaze angle
MIN_HEAD_SEPARATION = 1e-3

# Intersections smaller than this are contact, not overlap
MIN_OVERLAP_AREA = 1e-9

# Device slots of a BodySpaceWindow
BODY_DEVICES: Tuple[int, ...] = (HEAD, LEFT_HAND, RIGHT_HAND)

Point = Tuple[float, float]


class CoincidentHeads(PipelineInputError):
    """Two heads share a horizontal position; the gaze angle is undefined."""
    pass


# =============================================================================
# Angles and Poses
# =============================================================================

def wrap_degrees(angle: np.ndarray) -> np.ndarray:
    """Wrap angles into [-180, 180)."""
    return (np.asarray(angle, dtype=np.float64) + 180.0) % 360.0 - 180.0


def wrap_yaw(angle: np.ndarray) -> np.ndarray:
    """Wrap angles into (-180, 180], the stored yaw range."""
    wrapped = wrap_degrees(angle)
    return np.where(wrapped == -180.0, 180.0, wrapped)


def world_poses(poses: np.ndarray) -> np.ndarray:
    """
    Compose root-relative device poses into world poses.

    Args:
        poses: (n, 4, 6) array with slots root/head/left/right

    Returns:
        (n, 4, 6) array; the root slot is unchanged
    """
    poses = np.asarray(poses, dtype=np.float64)
    world = poses.copy()
    root = poses[:, ROOT]
    psi = np.radians(root[:, 5])[:, None]
    sin, cos = np.sin(psi), np.cos(psi)

    local = poses[:, 1:]
    world[:, 1:, 0] = root[:, None, 0] + local[:, :, 0] * cos + local[:, :, 2] * sin
    world[:, 1:, 1] = root[:, None, 1] + local[:, :, 1]
    world[:, 1:, 2] = root[:, None, 2] - local[:, :, 0] * sin + local[:, :, 2] * cos
    world[:, 1:, 5] = wrap_yaw(root[:, None, 5] + local[:, :, 5])
    return world


@dataclass(frozen=True)
class BodySpaceWindow:
    """
    Head and controller series in one user's body space.

    poses has shape (n, 3, 6) with slots head/left/right. When centered, head
    x, z and yaw are identically 0.
    """
    user_id: str
    centered: bool
    poses: np.ndarray
    frame_rate: float = 30.0


def body_space_transform(window: FrameWindow, user: str, centered: bool) -> BodySpaceWindow:
    """
    Re-express a user's devices relative to the head's heading.

    Every frame is rotated by the negative head yaw; with centered=True the
    head's horizontal position is subtracted first so the head sits at the
    horizontal origin.

    Raises:
        WindowTooSparse: Fewer than two frames
    """
    if window.n_frames < 2:
        raise WindowTooSparse(f"Body-space transform needs 2 frames, got {window.n_frames}")

    world = world_poses(window.poses[user])[:, BODY_DEVICES]
    head = world[:, 0]
    psi = np.radians(head[:, 5])[:, None]
    sin, cos = np.sin(psi), np.cos(psi)

    x = world[:, :, 0]
    z = world[:, :, 2]
    if centered:
        x = x - head[:, None, 0]
        z = z - head[:, None, 2]

    body = world.copy()
    body[:, :, 0] = x * cos - z * sin
    body[:, :, 2] = x * sin + z * cos
    body[:, :, 5] = wrap_yaw(world[:, :, 5] - head[:, None, 5])
    if centered:
        body[:, 0, 0] = 0.0
        body[:, 0, 2] = 0.0
    body[:, 0, 5] = 0.0
    return BodySpaceWindow(user_id=user, centered=centered, poses=body, frame_rate=window.frame_rate)


def yaw_velocity_series(head_yaw_raw: np.ndarray, frame_rate: float = 30.0) -> np.ndarray:
    """
    Yaw velocity in degrees per second along the shortest path.

    Raises:
        WindowTooSparse: Fewer than two samples
    """
    yaw = np.asarray(head_yaw_raw, dtype=np.float64)
    if yaw.shape[0] < 2:
        raise WindowTooSparse(f"Yaw velocity needs 2 samples, got {yaw.shape[0]}")
    return wrap_degrees(np.diff(yaw, axis=0)) * frame_rate


def velocity_series(values: np.ndarray, frame_rate: float = 30.0) -> np.ndarray:
    """
    Plain per-frame finite differences times the frame rate.

    Raises:
        WindowTooSparse: Fewer than two samples
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] < 2:
        raise WindowTooSparse(f"Velocity needs 2 samples, got {values.shape[0]}")
    return np.diff(values, axis=0) * frame_rate


# =============================================================================
# Pairwise Measures
# =============================================================================

def direct_gaze_angle(pose_a_head: np.ndarray, pose_b_head: np.ndarray) -> np.ndarray:
    """
    Angle between A's yaw heading and the direction from A's head to B's head.

    Works on single poses (6,) or series (n, 6); measured in the horizontal
    plane, unsigned, in [0, 180].

    Raises:
        CoincidentHeads: If the heads are less than 1 mm apart horizontally
    """
    a = np.asarray(pose_a_head, dtype=np.float64)
    b = np.asarray(pose_b_head, dtype=np.float64)
    dx = b[..., 0] - a[..., 0]
    dz = b[..., 2] - a[..., 2]
    dist = np.hypot(dx, dz)
    if np.any(dist < MIN_HEAD_SEPARATION):
        raise CoincidentHeads("Heads less than 1 mm apart on the horizontal plane")
    psi = np.radians(a[..., 5])
    cosine = (np.sin(psi) * dx + np.cos(psi) * dz) / dist
    return np.degrees(np.arccos(np.clip(cosine, -1.0, 1.0)))


def interpersonal_distance(pose_a_head: np.ndarray, pose_b_head: np.ndarray) -> np.ndarray:
    """Horizontal head-to-head distance; height is ignored."""
    a = np.asarray(pose_a_head, dtype=np.float64)
    b = np.asarray(pose_b_head, dtype=np.float64)
    return np.hypot(b[..., 0] - a[..., 0], b[..., 2] - a[..., 2])


def fov_triangle(
    pose_head: Sequence[float],
    vs_l: float,
    apex_angle: float = DEFAULT_FOV_DEGREES,
) -> List[Point]:
    """
    Isosceles field-of-view triangle on the horizontal plane.

    The apex sits at the head; the two sides of length vs_l open by
    apex_angle around the yaw heading. Vertices are counter-clockwise.
    """
    x, z, yaw = float(pose_head[0]), float(pose_head[2]), float(pose_head[5])
    half = apex_angle / 2.0
    vertices = [(x, z)]
    for angle in (yaw - half, yaw + half):
        theta = math.radians(angle)
        vertices.append((x + vs_l * math.sin(theta), z + vs_l * math.cos(theta)))
    if _signed_area(vertices) < 0:
        vertices = [vertices[0], vertices[2], vertices[1]]
    return vertices


def _signed_area(polygon: Sequence[Point]) -> float:
    """Shoelace area; positive for counter-clockwise polygons."""
    total = 0.0
    for i, (x1, z1) in enumerate(polygon):
        x2, z2 = polygon[(i + 1) % len(polygon)]
        total += x1 * z2 - x2 * z1
    return 0.5 * total


def _clip(subject: List[Point], clip_polygon: Sequence[Point]) -> List[Point]:
    """Sutherland-Hodgman: clip subject by every edge of a convex CCW polygon."""
    output = subject
    for i, p in enumerate(clip_polygon):
        q = clip_polygon[(i + 1) % len(clip_polygon)]
        ex, ez = q[0] - p[0], q[1] - p[1]

        def side(v: Point) -> float:
            return ex * (v[1] - p[1]) - ez * (v[0] - p[0])

        vertices, output = output, []
        if not vertices:
            break
        prev = vertices[-1]
        prev_side = side(prev)
        for cur in vertices:
            cur_side = side(cur)
            if cur_side >= 0:
                if prev_side < 0:
                    output.append(_intersect(prev, cur, prev_side, cur_side))
                output.append(cur)
            elif prev_side >= 0:
                output.append(_intersect(prev, cur, prev_side, cur_side))
            prev, prev_side = cur, cur_side
    return output


def _intersect(a: Point, b: Point, side_a: float, side_b: float) -> Point:
    """Point where segment a-b crosses the clipping line."""
    t = side_a / (side_a - side_b)
    return (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))


def visual_shared_space(
    pose_a_head: Sequence[float],
    pose_b_head: Sequence[float],
    vs_l: float,
    apex_angle: float = DEFAULT_FOV_DEGREES,
) -> float:
    """
    Overlap area (m^2) of the two users' field-of-view triangles.

    Args:
        pose_a_head: Head pose (x, y, z, roll, pitch, yaw) of user A
        pose_b_head: Head pose of user B
        vs_l: Triangle side length in metres
        apex_angle: Triangle apex angle in degrees

    Returns:
        Intersection area; 0 for disjoint or touching triangles
    """
    a = tuple(float(v) for v in pose_a_head)
    b = tuple(float(v) for v in pose_b_head)
    if math.hypot(a[0] - b[0], a[2] - b[2]) >= 2.0 * vs_l:
        return 0.0
    # Same operand order for (A, B) and (B, A)
    first, second = (a, b) if (a[0], a[2], a[5]) <= (b[0], b[2], b[5]) else (b, a)
    polygon = _clip(fov_triangle(first, vs_l, apex_angle), fov_triangle(second, vs_l, apex_angle))
    if len(polygon) < 3:
        return 0.0
    area = abs(_signed_area(polygon))
    return area if area >= MIN_OVERLAP_AREA else 0.0


def visual_shared_space_series(
    heads_a: np.ndarray,
    heads_b: np.ndarray,
    vs_l: float,
    apex_angle: float = DEFAULT_FOV_DEGREES,
) -> np.ndarray:
    """Per-frame visual shared space for two (n, 6) head series."""
    return np.array(
        [visual_shared_space(a, b, vs_l, apex_angle) for a, b in zip(heads_a, heads_b)],
        dtype=np.float64,
    )


# =============================================================================
# Window Cache
# =============================================================================

@dataclass
class WindowGeometry:
    """
    World head series of one window with memoized pairwise measures.

    Dyadic and group features ask for the same pairs repeatedly; each series
    is computed once per window.
    """
    window: FrameWindow
    vs_lengths: Tuple[float, ...]
    fov_degrees: float = DEFAULT_FOV_DEGREES
    heads: Dict[str, np.ndarray] = field(default_factory=dict)
    _cache: Dict[Tuple, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.window.n_frames < 2:
            raise WindowTooSparse(f"Window holds {self.window.n_frames} frame(s); need 2")
        if not self.heads:
            self.heads = {
                uid: world_poses(poses)[:, HEAD] for uid, poses in self.window.poses.items()
            }

    @property
    def frame_rate(self) -> float:
        """Frames per second of the window."""
        return self.window.frame_rate

    def gaze(self, source: str, target: str) -> np.ndarray:
        """Direct gaze angle series from source to target."""
        key = ("gaze", source, target)
        if key not in self._cache:
            self._cache[key] = direct_gaze_angle(self.heads[source], self.heads[target])
        return self._cache[key]

    def distance(self, a: str, b: str) -> np.ndarray:
        """Interpersonal distance series (symmetric)."""
        key = ("ipd",) + tuple(sorted((a, b)))
        if key not in self._cache:
            self._cache[key] = interpersonal_distance(self.heads[a], self.heads[b])
        return self._cache[key]

    def shared_space(self, a: str, b: str, vs_l: float) -> np.ndarray:
        """Visual shared space series at one side length (symmetric)."""
        key = ("vss", vs_l) + tuple(sorted((a, b)))
        if key not in self._cache:
            self._cache[key] = visual_shared_space_series(
                self.heads[a], self.heads[b], vs_l, self.fov_degrees
            )
        return self._cache[key]
