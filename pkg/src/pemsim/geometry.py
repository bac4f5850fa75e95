"""2D pose and oriented-rectangle primitives shared across the simulator.

Everything is bird's-eye-view: positions in metres, yaw in radians
measured counter-clockwise from +x and normalized to (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.remainder(angle, TWO_PI)
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


@dataclass(frozen=True)
class Pose2D:
    """Position plus heading. Yaw is normalized at construction."""

    x: float
    y: float
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    def forward(self) -> tuple[float, float]:
        return math.cos(self.yaw), math.sin(self.yaw)

    def transform_to_frame(self, px: float, py: float) -> tuple[float, float]:
        """Express world point (px, py) in this pose's local frame."""
        dx, dy = px - self.x, py - self.y
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return c * dx + s * dy, -s * dx + c * dy

    def transform_from_frame(self, lx: float, ly: float) -> tuple[float, float]:
        """Express local point (lx, ly) in the world frame."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return self.x + c * lx - s * ly, self.y + s * lx + c * ly


def rotate(vx: float, vy: float, angle: float) -> tuple[float, float]:
    """Rotate a free vector by `angle` radians."""
    c, s = math.cos(angle), math.sin(angle)
    return c * vx - s * vy, s * vx + c * vy


@dataclass(frozen=True)
class OrientedBox:
    """Rectangle given by centre, (length, width) extent and yaw.

    Length runs along the heading, width across it. Extents must be
    positive.
    """

    cx: float
    cy: float
    length: float
    width: float
    yaw: float

    def __post_init__(self):
        if self.length <= 0.0 or self.width <= 0.0:
            raise ValueError("box extent must be positive")

    def corners(self) -> np.ndarray:
        """Corner coordinates, counter-clockwise, shape (4, 2)."""
        hl, hw = 0.5 * self.length, 0.5 * self.width
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.array([self.cx, self.cy])

    def area(self) -> float:
        return self.length * self.width


def polygon_area(points: np.ndarray) -> float:
    """Shoelace area of a simple polygon, vertices in order, shape (n, 2)."""
    if len(points) < 3:
        return 0.0
    x, y = points[:, 0], points[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def clip_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of `subject` against convex `clip`.

    Both are (n, 2) arrays with vertices in counter-clockwise order.
    Returns the clipped polygon, possibly empty.
    """
    output = [tuple(p) for p in subject]
    n = len(clip)
    for i in range(n):
        if not output:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        input_pts = output
        output = []
        for j in range(len(input_pts)):
            px, py = input_pts[j]
            qx, qy = input_pts[(j + 1) % len(input_pts)]
            p_side = ex * (py - ay) - ey * (px - ax)
            q_side = ex * (qy - ay) - ey * (qx - ax)
            # inside = left of (or on) the directed clip edge
            if p_side >= 0.0:
                output.append((px, py))
            if (p_side > 0.0 and q_side < 0.0) or (p_side < 0.0 and q_side > 0.0):
                t = p_side / (p_side - q_side)
                output.append((px + t * (qx - px), py + t * (qy - py)))
    return np.array(output) if output else np.empty((0, 2))


def boxes_overlap(a: OrientedBox, b: OrientedBox) -> bool:
    """Separating-axis test for two oriented rectangles."""
    dx, dy = a.cx - b.cx, a.cy - b.cy
    reach = 0.5 * (math.hypot(a.length, a.width)
                   + math.hypot(b.length, b.width))
    if dx * dx + dy * dy > reach * reach:
        return False
    ca, cb = a.corners(), b.corners()
    for corners in (ca, cb):
        for i in range(2):  # two unique edge normals per rectangle
            edge = corners[(i + 1) % 4] - corners[i]
            axis = np.array([-edge[1], edge[0]])
            pa = ca @ axis
            pb = cb @ axis
            if pa.max() < pb.min() or pb.max() < pa.min():
                return False
    return True
