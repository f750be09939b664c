"""Rotation and rigid-transform algebra used by every controller layer.

Conventions: rotations are 3x3 orthonormal matrices, transforms map points
from the child frame to the parent frame (p_parent = R @ p_child + t), and
twists stack linear before angular components.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Single place for the numeric tolerances the whole package relies on.
ROTATION_ORTHO_TOL = 1e-9     # |R^T R - I| allowed on rotation inputs
ROTATION_DET_TOL = 1e-9       # |det R - 1| allowed on rotation inputs
SKEW_SYMMETRY_TOL = 1e-9      # |S + S^T| allowed before vee() rejects
TRANSFORM_ROUNDTRIP_TOL = 1e-12


class NotARotationError(ValueError):
    """Matrix failed the orthonormality / determinant check."""


class NotSkewSymmetricError(ValueError):
    """Matrix handed to vee() is not skew-symmetric within tolerance."""


def check_rotation(R: np.ndarray, name: str = "rotation") -> np.ndarray:
    """Validate a 3x3 rotation matrix and return it as float64."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise NotARotationError(f"{name}: expected 3x3 matrix, got {R.shape}")
    if not np.all(np.isfinite(R)):
        raise NotARotationError(f"{name}: non-finite entries")
    err = np.abs(R.T @ R - np.eye(3)).max()
    if err > ROTATION_ORTHO_TOL * 10:
        raise NotARotationError(f"{name}: not orthonormal (|R^T R - I| = {err:.3g})")
    det = np.linalg.det(R)
    if abs(det - 1.0) > ROTATION_DET_TOL * 10:
        raise NotARotationError(f"{name}: det = {det:.6g}, expected +1")
    return R


def skew(A: np.ndarray) -> np.ndarray:
    """Antisymmetric part of a 3x3 matrix, (A - A^T) / 2."""
    A = np.asarray(A, dtype=float)
    return (A - A.T) / 2.0


def hat(v: np.ndarray) -> np.ndarray:
    """3-vector to skew-symmetric matrix, inverse of vee()."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y],
                     [z, 0.0, -x],
                     [-y, x, 0.0]])


def vee(S: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix back to its 3-vector coordinates."""
    S = np.asarray(S, dtype=float)
    sym = np.abs(S + S.T).max()
    if sym > SKEW_SYMMETRY_TOL:
        raise NotSkewSymmetricError(f"|S + S^T| = {sym:.3g} exceeds {SKEW_SYMMETRY_TOL}")
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def rot_z(theta: float) -> np.ndarray:
    """Rotation by theta about +z."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0],
                     [s, c, 0.0],
                     [0.0, 0.0, 1.0]])


def rot_axis(axis: np.ndarray, theta: float) -> np.ndarray:
    """Rotation by theta about a unit axis (Rodrigues)."""
    K = hat(axis)
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def rpy_to_rotation(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Intrinsic ZYX Euler angles to a rotation matrix."""
    return rot_z(yaw) @ rot_axis(np.array([0.0, 1.0, 0.0]), pitch) @ rot_axis(
        np.array([1.0, 0.0, 0.0]), roll)


def rotation_to_zyx(R: np.ndarray) -> tuple[float, float, float]:
    """Rotation matrix to intrinsic ZYX (yaw, pitch, roll)."""
    pitch = np.arctan2(-R[2, 0], np.hypot(R[0, 0], R[1, 0]))
    if abs(np.cos(pitch)) > 1e-9:
        yaw = np.arctan2(R[1, 0], R[0, 0])
        roll = np.arctan2(R[2, 1], R[2, 2])
    else:
        yaw = np.arctan2(-R[0, 1], R[1, 1])
        roll = 0.0
    return yaw, pitch, roll


def yaw_of(R: np.ndarray) -> float:
    """Heading angle: atan2 of the x-axis projected on the ground plane."""
    return float(np.arctan2(R[1, 0], R[0, 0]))


def orientation_error(R: np.ndarray, R_des: np.ndarray) -> np.ndarray:
    """Rotation error coordinates between a frame and its target.

    Vanishes iff R equals R_des; near a half-turn the magnitude degrades
    toward zero, which the controllers tolerate because they assume small
    errors.
    """
    return vee(skew(R @ R_des.T))


@dataclass(frozen=True)
class Transform:
    """Rigid-body pose: rotation plus translation in meters."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "translation",
                           np.asarray(self.translation, dtype=float).reshape(3))

    @staticmethod
    def identity() -> "Transform":
        return Transform(np.eye(3), np.zeros(3))

    @staticmethod
    def from_parts(rotation: np.ndarray | None = None,
                   translation: np.ndarray | None = None) -> "Transform":
        return Transform(np.eye(3) if rotation is None else rotation,
                         np.zeros(3) if translation is None else translation)

    def validate(self, name: str = "transform") -> "Transform":
        check_rotation(self.rotation, name)
        if not np.all(np.isfinite(self.translation)):
            raise ValueError(f"{name}: non-finite translation")
        return self

    def apply(self, point: np.ndarray) -> np.ndarray:
        return self.rotation @ np.asarray(point, dtype=float) + self.translation

    def as_matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    @staticmethod
    def from_matrix(M: np.ndarray) -> "Transform":
        M = np.asarray(M, dtype=float)
        return Transform(M[:3, :3], M[:3, 3])

    def to_flat(self) -> dict:
        """Wire/config encoding: 9 rotation reals row-major plus 3 translation."""
        return {"rotation": [float(v) for v in self.rotation.reshape(9)],
                "translation": [float(v) for v in self.translation]}

    @staticmethod
    def from_flat(d: dict) -> "Transform":
        R = np.asarray(d["rotation"], dtype=float).reshape(3, 3)
        return Transform(R, np.asarray(d["translation"], dtype=float))


def compose(a: Transform, b: Transform) -> Transform:
    """Chain two transforms: result maps b's child frame into a's parent."""
    return Transform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def invert(t: Transform) -> Transform:
    RT = t.rotation.T
    return Transform(RT, -(RT @ t.translation))


@dataclass
class Twist:
    """Frame velocity, linear (m/s) stacked over angular (rad/s)."""

    linear: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.linear = np.asarray(self.linear, dtype=float).reshape(3)
        self.angular = np.asarray(self.angular, dtype=float).reshape(3)
        if not (np.all(np.isfinite(self.linear)) and np.all(np.isfinite(self.angular))):
            raise ValueError("twist entries must be finite")

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])

    @staticmethod
    def from_stacked(v: np.ndarray) -> "Twist":
        v = np.asarray(v, dtype=float).reshape(6)
        return Twist(v[:3], v[3:])
