"""Operator-to-robot retargeting: treadmill walking command and VR hand poses.

The operator's heading-aligned frame ("retargeting frame") shares its origin
with the VR inertial frame but keeps x pointing along the operator's forward
direction, so hand targets are invariant to the operator spinning in place.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spatial import Transform, compose, rot_z, rotation_to_zyx

DEFAULT_DEADBAND = 0.05  # m/s; below this the planner treats the command as "stand"


@dataclass
class OperatorCommand:
    """One sample of the operator readouts."""

    time: float
    walk_speed: float                 # treadmill speed v_u, m/s, >= 0
    heading: float                    # operator yaw in the VR inertial frame, rad
    left_hand: Transform              # hand pose in the VR inertial frame
    right_hand: Transform
    head_orientation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        self.head_orientation = np.asarray(self.head_orientation, dtype=float)
        if self.walk_speed < 0.0:
            raise ValueError(f"walk speed must be >= 0, got {self.walk_speed}")
        if not np.isfinite(self.heading) or not np.isfinite(self.time):
            raise ValueError("command time/heading must be finite")

    @staticmethod
    def neutral(time: float = 0.0) -> "OperatorCommand":
        return OperatorCommand(time, 0.0, 0.0, Transform.identity(),
                               Transform.identity())


@dataclass(frozen=True)
class RetargetCalibration:
    """Constant operator/robot geometry fixed at session start."""

    scale_ratio: float = 1.0                    # human-to-robot limb length ratio
    head_to_retarget: Transform = None          # robot head frame -> retargeting frame
    left_hand_const: Transform = None           # user hand frame -> robot hand frame
    right_hand_const: Transform = None

    def __post_init__(self):
        if not (0.0 < self.scale_ratio <= 1.5):
            raise ValueError(f"scale ratio must be in (0, 1.5], got {self.scale_ratio}")
        for name in ("head_to_retarget", "left_hand_const", "right_hand_const"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, Transform.identity())

    def hand_const(self, side: str) -> Transform:
        return self.left_hand_const if side == "left" else self.right_hand_const


@dataclass(frozen=True)
class ComCommand:
    """Planar walking setpoint in the foot-midpoint frame: x forward, y left."""

    x: float
    y: float

    def norm(self) -> float:
        return float(np.hypot(self.x, self.y))


def treadmill_to_com_command(walk_speed: float, user_yaw: float,
                             robot_yaw: float) -> ComCommand:
    """Map treadmill speed and the user/robot yaw gap to a walking setpoint.

    Matched headings walk the robot straight forward; a heading gap turns it.
    """
    if walk_speed < 0.0:
        raise ValueError("walk speed must be >= 0")
    d = user_yaw - robot_yaw
    return ComCommand(walk_speed * np.cos(d), walk_speed * np.sin(d))


def vr_to_retargeting(hand_pose_vr: Transform, user_yaw: float) -> Transform:
    """Re-express a VR-frame hand pose in the heading-aligned retargeting frame."""
    unspin = Transform(rot_z(-user_yaw), np.zeros(3))
    return compose(unspin, hand_pose_vr)


def scale_position(pose: Transform, scale_ratio: float) -> Transform:
    """Scale the translation by the limb-length ratio; rotation untouched."""
    if scale_ratio <= 0.0:
        raise ValueError("scale ratio must be > 0")
    return Transform(pose.rotation, pose.translation * scale_ratio)


def retargeted_hand_target(cmd: OperatorCommand, calib: RetargetCalibration,
                           side: str) -> Transform:
    """Hand target relative to the robot head frame.

    Chain: head-to-retargeting constant, heading unspin, VR hand pose (with
    the translation scaled in the retargeting frame), robot-hand constant.
    """
    hand_vr = cmd.left_hand if side == "left" else cmd.right_hand
    in_retarget = scale_position(vr_to_retargeting(hand_vr, cmd.heading),
                                 calib.scale_ratio)
    return compose(calib.head_to_retarget,
                   compose(in_retarget, calib.hand_const(side)))


def head_target(head_orientation: np.ndarray, user_yaw: float) -> np.ndarray:
    """User head orientation expressed in the retargeting frame."""
    return rot_z(-user_yaw) @ np.asarray(head_orientation, dtype=float)


def head_to_neck_angles(head_orientation: np.ndarray, user_yaw: float,
                        yaw_limits: tuple[float, float],
                        pitch_limits: tuple[float, float]) -> tuple[float, float]:
    """Neck yaw/pitch targets from the retargeted head orientation, clamped."""
    yaw, pitch, _roll = rotation_to_zyx(head_target(head_orientation, user_yaw))
    return (float(np.clip(yaw, *yaw_limits)), float(np.clip(pitch, *pitch_limits)))


def calibrate_hand_consts(cmd: OperatorCommand, calib: RetargetCalibration,
                          current_left: Transform,
                          current_right: Transform) -> RetargetCalibration:
    """Solve the per-hand constants so the current robot pose is the target.

    `current_left/right` are the robot hand poses relative to the robot head
    frame at calibration time; afterwards the chain reproduces them exactly
    for the calibration command.
    """
    from .spatial import invert

    def const_for(hand_vr: Transform, current: Transform) -> Transform:
        in_retarget = scale_position(vr_to_retargeting(hand_vr, cmd.heading),
                                     calib.scale_ratio)
        return compose(invert(compose(calib.head_to_retarget, in_retarget)), current)

    return RetargetCalibration(
        scale_ratio=calib.scale_ratio,
        head_to_retarget=calib.head_to_retarget,
        left_hand_const=const_for(cmd.left_hand, current_left),
        right_hand_const=const_for(cmd.right_hand, current_right),
    )
