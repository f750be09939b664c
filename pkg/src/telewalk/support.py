"""Support polygons on the ground plane and point saturation into them.

Single support uses the rectangle under the stance sole; double support uses
the convex hull of both sole rectangles. All geometry is 2D.
"""

from __future__ import annotations

import math

import numpy as np


def foot_rectangle(pose2d: np.ndarray, length: float, width: float) -> np.ndarray:
    """Corners of a sole rectangle centered on a planar foot pose, CCW."""
    x, y, yaw = float(pose2d[0]), float(pose2d[1]), float(pose2d[2])
    c, s = math.cos(yaw), math.sin(yaw)
    half = np.array([[length / 2, width / 2], [-length / 2, width / 2],
                     [-length / 2, -width / 2], [length / 2, -width / 2]])
    R = np.array([[c, -s], [s, c]])
    return half @ R.T + np.array([x, y])


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain hull, CCW without the closing repeat."""
    pts = sorted({(float(p[0]), float(p[1])) for p in points})
    if len(pts) <= 2:
        return np.asarray(pts, dtype=float)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.asarray(lower[:-1] + upper[:-1], dtype=float)


def polygon_margin(point: np.ndarray, hull: np.ndarray) -> float:
    """Signed distance to the hull boundary: positive inside, negative outside."""
    point = np.asarray(point, dtype=float)
    n = len(hull)
    if n == 1:
        return -float(np.linalg.norm(point - hull[0]))
    if n == 2:
        return -_segment_distance(point, hull[0], hull[1])
    margins = []
    for i in range(n):
        a, b = hull[i], hull[(i + 1) % n]
        edge = b - a
        normal = np.array([-edge[1], edge[0]])
        normal /= np.linalg.norm(normal)
        margins.append(float(normal @ (point - a)))
    inside = min(margins)
    if inside >= 0.0:
        return inside
    return -min(_segment_distance(point, hull[i], hull[(i + 1) % n])
                for i in range(n))


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def _closest_on_segment(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return a + t * ab


def clamp_to_polygon(point: np.ndarray, hull: np.ndarray) -> np.ndarray:
    """Nearest point of the hull; the point itself when already inside."""
    point = np.asarray(point, dtype=float)
    n = len(hull)
    if n == 1:
        return hull[0].copy()
    if n == 2:
        return _closest_on_segment(point, hull[0], hull[1])
    if polygon_margin(point, hull) >= 0.0:
        return point.copy()
    candidates = [_closest_on_segment(point, hull[i], hull[(i + 1) % n])
                  for i in range(n)]
    dists = [np.linalg.norm(point - c) for c in candidates]
    return candidates[int(np.argmin(dists))]


def support_polygon(stance_poses: list[np.ndarray], sole_length: float,
                    sole_width: float) -> np.ndarray:
    """Hull of the sole rectangles of every foot currently on the ground."""
    if not stance_poses:
        raise ValueError("support polygon needs at least one stance foot")
    corners = np.vstack([foot_rectangle(p, sole_length, sole_width)
                         for p in stance_poses])
    return convex_hull(corners)
