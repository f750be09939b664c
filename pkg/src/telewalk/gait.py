"""Footstep planning and reference trajectories for one walking cycle.

A walking cycle is a double-support weight transfer followed by a single-
support swing; each planned footstep owns one cycle and lands at its impact
time. The capture-point reference is pieced together from single-support
exponentials tied to the support-foot center and double-support cubics that
keep position and velocity continuous across support switches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .retarget import ComCommand
from .spatial import Transform, rot_z

BOUNDARY_MATCH_TOL = 1e-9


class PlanError(ValueError):
    """Footstep plan violates timing or feasibility bounds."""


@dataclass(frozen=True)
class PlannerParams:
    step_duration: float = 1.0        # full cycle: weight transfer + swing, s
    ds_duration: float = 0.2          # double-support share of the cycle, s
    step_width: float = 0.16          # lateral distance between foot centers, m
    apex_height: float = 0.03         # swing-foot lift, m
    max_step_length: float = 0.18     # per-step sagittal displacement bound, m
    min_step_width: float = 0.10
    max_step_width: float = 0.26
    max_turn: float = 0.3             # per-step yaw increment bound, rad
    turn_gain: float = 1.0            # heading rate per unit lateral command, rad/s
    deadband: float = 0.05            # commands below this norm mean "stand", m/s
    horizon_steps: int = 4

    def validate(self):
        if self.step_duration <= 0:
            raise PlanError("step_duration must be > 0")
        if not (0 < self.ds_duration < self.step_duration):
            raise PlanError("ds_duration must be in (0, step_duration)")
        if not (0 < self.min_step_width <= self.step_width <= self.max_step_width):
            raise PlanError("step width bounds must satisfy 0 < min <= width <= max")
        if self.max_step_length <= 0 or self.max_turn <= 0 or self.apex_height < 0:
            raise PlanError("step bounds must be positive")
        if self.horizon_steps < 1:
            raise PlanError("horizon_steps must be >= 1")
        return self


@dataclass(frozen=True)
class Footstep:
    foot: str                 # "left" | "right"
    pose2d: np.ndarray        # (x, y, yaw) in the inertial frame
    impact_time: float
    step_duration: float
    ds_duration: float

    def __post_init__(self):
        object.__setattr__(self, "pose2d", np.asarray(self.pose2d, dtype=float))
        if self.foot not in ("left", "right"):
            raise PlanError(f"foot must be left/right, got {self.foot}")
        if not (self.step_duration > self.ds_duration >= 0):
            raise PlanError("need step_duration > ds_duration >= 0")

    @property
    def cycle_start(self) -> float:
        return self.impact_time - self.step_duration

    @property
    def swing_start(self) -> float:
        return self.cycle_start + self.ds_duration


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def _relative_step(prev: np.ndarray, new: np.ndarray) -> np.ndarray:
    """New footstep pose expressed in the previous footstep's frame."""
    c, s = math.cos(prev[2]), math.sin(prev[2])
    dx, dy = new[0] - prev[0], new[1] - prev[1]
    return np.array([c * dx + s * dy, -s * dx + c * dy, _wrap_angle(new[2] - prev[2])])


def _compose_step(prev: np.ndarray, rel: np.ndarray) -> np.ndarray:
    c, s = math.cos(prev[2]), math.sin(prev[2])
    return np.array([prev[0] + c * rel[0] - s * rel[1],
                     prev[1] + s * rel[0] + c * rel[1],
                     _wrap_angle(prev[2] + rel[2])])


def _clamp_step(prev: np.ndarray, pose: np.ndarray, foot: str,
                p: PlannerParams) -> np.ndarray:
    """Project a candidate footstep into the per-step feasibility bounds."""
    rel = _relative_step(prev, pose)
    rel[0] = np.clip(rel[0], -p.max_step_length, p.max_step_length)
    sign = 1.0 if foot == "left" else -1.0
    rel[1] = sign * np.clip(sign * rel[1], p.min_step_width, p.max_step_width)
    rel[2] = np.clip(rel[2], -p.max_turn, p.max_turn)
    clamped = _compose_step(prev, rel)
    return pose if np.array_equal(clamped, pose) else clamped


@dataclass
class FootstepPlan:
    footsteps: list[Footstep]
    initial_left: np.ndarray
    initial_right: np.ndarray
    params: PlannerParams = field(default_factory=PlannerParams)

    def __post_init__(self):
        self.initial_left = np.asarray(self.initial_left, dtype=float)
        self.initial_right = np.asarray(self.initial_right, dtype=float)

    def is_standing(self) -> bool:
        return not self.footsteps

    def support_pose(self, i: int) -> np.ndarray:
        """Pose of the stance foot while footstep i is in flight."""
        step = self.footsteps[i]
        for prev in reversed(self.footsteps[:i]):
            if prev.foot != step.foot:
                return prev.pose2d
        return self.initial_right if step.foot == "left" else self.initial_left

    def prior_pose(self, i: int) -> np.ndarray:
        """Where footstep i's foot stands before it swings."""
        step = self.footsteps[i]
        for prev in reversed(self.footsteps[:i]):
            if prev.foot == step.foot:
                return prev.pose2d
        return self.initial_left if step.foot == "left" else self.initial_right

    def final_stance_midpoint(self) -> np.ndarray:
        if not self.footsteps:
            return (self.initial_left[:2] + self.initial_right[:2]) / 2.0
        last = self.footsteps[-1].pose2d
        other = self.support_pose(len(self.footsteps) - 1)
        return (last[:2] + other[:2]) / 2.0

    def validate(self) -> "FootstepPlan":
        p = self.params
        prev_foot, prev_time = None, -math.inf
        for i, step in enumerate(self.footsteps):
            if step.impact_time <= prev_time:
                raise PlanError(f"footstep {i}: impact times must strictly increase")
            if step.foot == prev_foot:
                raise PlanError(f"footstep {i}: feet must alternate")
            rel = _relative_step(self.support_pose(i), step.pose2d)
            if abs(rel[0]) > p.max_step_length + 1e-9:
                raise PlanError(f"footstep {i}: step length {rel[0]:.3f} exceeds bound")
            lateral = rel[1] if step.foot == "left" else -rel[1]
            if not (p.min_step_width - 1e-9 <= lateral <= p.max_step_width + 1e-9):
                raise PlanError(f"footstep {i}: step width {lateral:.3f} out of bounds")
            if abs(rel[2]) > p.max_turn + 1e-9:
                raise PlanError(f"footstep {i}: turn {rel[2]:.3f} exceeds bound")
            prev_foot, prev_time = step.foot, step.impact_time
        return self


def plan_footsteps(com_cmd: ComCommand, stance_left: np.ndarray,
                   stance_right: np.ndarray, params: PlannerParams,
                   start_time: float = 0.0, first_foot: str = "right") -> FootstepPlan:
    """Sample a unicycle driven by the walking command into footsteps.

    The forward command component sets the unicycle speed, the lateral one its
    heading rate (scaled by turn_gain); per-step advance and turn are clamped
    to the feasibility bounds. Commands inside the deadband plan nothing.
    """
    params.validate()
    stance_left = np.asarray(stance_left, dtype=float)
    stance_right = np.asarray(stance_right, dtype=float)
    if np.hypot(*(stance_left[:2] - stance_right[:2])) < 1e-6:
        raise PlanError("degenerate stance: feet are coincident")

    if com_cmd.norm() < params.deadband:
        return FootstepPlan([], stance_left, stance_right, params)

    # The first swing's support foot is the unicycle wheel: its axis point
    # anchors the integration so steady strides match the commanded advance.
    support = stance_right if first_foot == "left" else stance_left
    support_side = -1.0 if first_foot == "left" else 1.0
    heading = support[2]
    offset = np.array([-math.sin(heading), math.cos(heading)])
    pos = support[:2] - offset * (support_side * params.step_width / 2.0)

    advance = float(np.clip(com_cmd.x * params.step_duration,
                            -params.max_step_length, params.max_step_length))
    turn = float(np.clip(params.turn_gain * com_cmd.y * params.step_duration,
                         -params.max_turn, params.max_turn))

    steps: list[Footstep] = []
    foot = first_foot
    prev = stance_right if foot == "left" else stance_left
    for i in range(params.horizon_steps):
        mid_heading = heading + turn / 2.0
        pos = pos + advance * np.array([math.cos(mid_heading), math.sin(mid_heading)])
        heading = _wrap_angle(heading + turn)
        side = params.step_width / 2.0 if foot == "left" else -params.step_width / 2.0
        offset = np.array([-math.sin(heading), math.cos(heading)]) * side
        pose = _clamp_step(prev, np.array([pos[0] + offset[0], pos[1] + offset[1],
                                           heading]), foot, params)
        steps.append(Footstep(foot, pose, start_time + (i + 1) * params.step_duration,
                              params.step_duration, params.ds_duration))
        prev = pose
        foot = "left" if foot == "right" else "right"

    plan = FootstepPlan(steps, stance_left, stance_right, params)
    return plan.validate()


def closing_plan(stance_left: np.ndarray, stance_right: np.ndarray,
                 swing_foot: str, params: PlannerParams,
                 start_time: float = 0.0) -> FootstepPlan:
    """One step that squares the swing foot up beside its support foot."""
    params.validate()
    stance_left = np.asarray(stance_left, dtype=float)
    stance_right = np.asarray(stance_right, dtype=float)
    support = stance_right if swing_foot == "left" else stance_left
    side = params.step_width if swing_foot == "left" else -params.step_width
    offset = np.array([-math.sin(support[2]), math.cos(support[2])]) * side
    pose = np.array([support[0] + offset[0], support[1] + offset[1], support[2]])
    step = Footstep(swing_foot, pose, start_time + params.step_duration,
                    params.step_duration, params.ds_duration)
    return FootstepPlan([step], stance_left, stance_right, params).validate()


def _smoothstep(u: float) -> tuple[float, float]:
    """Cubic with zero boundary slopes: value and derivative at u in [0, 1]."""
    return u * u * (3.0 - 2.0 * u), 6.0 * u * (1.0 - u)


@dataclass(frozen=True)
class SwingTrajectory:
    """Swing-foot motion over one cycle: hold during DS, cubic swing, land flat."""

    start_pose: np.ndarray    # (x, y, yaw)
    end_pose: np.ndarray
    cycle_start: float
    step_duration: float
    ds_duration: float
    apex_height: float

    def __post_init__(self):
        object.__setattr__(self, "start_pose", np.asarray(self.start_pose, float))
        object.__setattr__(self, "end_pose", np.asarray(self.end_pose, float))
        if not (self.step_duration > self.ds_duration >= 0):
            raise PlanError("need step_duration > ds_duration >= 0")

    def _planar(self, t: float) -> tuple[np.ndarray, np.ndarray, float, float]:
        swing_time = self.step_duration - self.ds_duration
        tau = t - self.cycle_start - self.ds_duration
        if tau <= 0.0:
            return self.start_pose[:2], np.zeros(2), self.start_pose[2], 0.0
        if tau >= swing_time:
            return self.end_pose[:2], np.zeros(2), self.end_pose[2], 0.0
        u = tau / swing_time
        h, hdot = _smoothstep(u)
        dxy = self.end_pose[:2] - self.start_pose[:2]
        dyaw = _wrap_angle(self.end_pose[2] - self.start_pose[2])
        return (self.start_pose[:2] + h * dxy, dxy * hdot / swing_time,
                self.start_pose[2] + h * dyaw, dyaw * hdot / swing_time)

    def _height(self, t: float) -> tuple[float, float]:
        swing_time = self.step_duration - self.ds_duration
        tau = t - self.cycle_start - self.ds_duration
        if tau <= 0.0 or tau >= swing_time:
            return 0.0, 0.0
        u = tau / swing_time
        if u < 0.5:
            h, hdot = _smoothstep(2.0 * u)
            return self.apex_height * h, self.apex_height * hdot * 2.0 / swing_time
        h, hdot = _smoothstep(2.0 * u - 1.0)
        return (self.apex_height * (1.0 - h),
                -self.apex_height * hdot * 2.0 / swing_time)

    def pose(self, t: float) -> Transform:
        xy, _, yaw, _ = self._planar(t)
        z, _ = self._height(t)
        return Transform(rot_z(yaw), np.array([xy[0], xy[1], z]))

    def twist(self, t: float) -> np.ndarray:
        """Stacked (linear, angular) frame velocity."""
        _, vxy, _, wz = self._planar(t)
        _, vz = self._height(t)
        return np.array([vxy[0], vxy[1], vz, 0.0, 0.0, wz])


def swing_trajectory(from_pose: np.ndarray, to_pose: np.ndarray,
                     step_duration: float, ds_duration: float,
                     apex_height: float, cycle_start: float = 0.0) -> SwingTrajectory:
    return SwingTrajectory(from_pose, to_pose, cycle_start, step_duration,
                           ds_duration, apex_height)


def dcm_ss(r_zmp: np.ndarray, xi0: np.ndarray, omega: float, t: float,
           t_max: float | None = None) -> np.ndarray:
    """Single-support capture-point evolution from its initial value."""
    if omega <= 0:
        raise ValueError("omega must be > 0")
    if t < -1e-12 or (t_max is not None and t > t_max + 1e-12):
        raise ValueError(f"t={t} outside the step domain")
    r_zmp = np.asarray(r_zmp, dtype=float)
    return r_zmp + math.exp(omega * t) * (np.asarray(xi0, dtype=float) - r_zmp)


def dcm_velocity(xi: np.ndarray, r_zmp: np.ndarray, omega: float) -> np.ndarray:
    """First-order unstable dynamics of the capture point."""
    if omega <= 0:
        raise ValueError("omega must be > 0")
    return omega * (np.asarray(xi, dtype=float) - np.asarray(r_zmp, dtype=float))


def dcm_ds_coeffs(xi_start: np.ndarray, xidot_start: np.ndarray,
                  xi_end: np.ndarray, xidot_end: np.ndarray,
                  duration: float) -> tuple[np.ndarray, ...]:
    """Cubic coefficients (a0..a3) meeting both position/velocity boundaries."""
    if duration <= 0:
        raise ValueError("duration must be > 0")
    p0 = np.asarray(xi_start, dtype=float)
    v0 = np.asarray(xidot_start, dtype=float)
    p1 = np.asarray(xi_end, dtype=float)
    v1 = np.asarray(xidot_end, dtype=float)
    T = duration
    a0 = p0
    a1 = v0
    a2 = (3.0 * (p1 - p0) - (2.0 * v0 + v1) * T) / T**2
    a3 = (2.0 * (p0 - p1) + (v0 + v1) * T) / T**3
    return a0, a1, a2, a3


@dataclass(frozen=True)
class DcmPiece:
    phase: str                # "SS" | "DS"
    t0: float
    t1: float
    r_zmp: np.ndarray | None = None      # SS only
    xi0: np.ndarray | None = None        # SS only: value at t0
    omega: float | None = None
    coeffs: tuple | None = None          # DS only: (a0, a1, a2, a3)

    def eval(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        tau = min(max(t, self.t0), self.t1) - self.t0
        if self.phase == "SS":
            xi = dcm_ss(self.r_zmp, self.xi0, self.omega, tau)
            return xi, dcm_velocity(xi, self.r_zmp, self.omega)
        a0, a1, a2, a3 = self.coeffs
        xi = a0 + a1 * tau + a2 * tau**2 + a3 * tau**3
        xidot = a1 + 2.0 * a2 * tau + 3.0 * a3 * tau**2
        return xi, xidot

    def zmp(self, t: float, omega: float) -> np.ndarray:
        """Implied reference point: invert the first-order dynamics."""
        xi, xidot = self.eval(t)
        return xi - xidot / omega


@dataclass
class DcmTrajectory:
    pieces: list[DcmPiece]
    omega: float
    corners: list[np.ndarray] = field(default_factory=list)

    def eval(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        for piece in self.pieces:
            if t < piece.t1:
                return piece.eval(t)
        return self.pieces[-1].eval(t)

    def zmp_ref(self, t: float) -> np.ndarray:
        for piece in self.pieces:
            if t < piece.t1:
                return piece.zmp(t, self.omega)
        return self.pieces[-1].zmp(t, self.omega)

    @property
    def t_end(self) -> float:
        for piece in reversed(self.pieces):
            if not math.isinf(piece.t1):
                return piece.t1
        return self.pieces[-1].t0

    def check_continuity(self, tol: float = BOUNDARY_MATCH_TOL):
        for a, b in zip(self.pieces, self.pieces[1:]):
            xa, va = a.eval(a.t1)
            xb, vb = b.eval(b.t0)
            if np.abs(xa - xb).max() > tol or np.abs(va - vb).max() > tol:
                raise PlanError(
                    f"reference discontinuity at t={a.t1}: "
                    f"dpos={np.abs(xa - xb).max():.2e} dvel={np.abs(va - vb).max():.2e}")
        return self


def plan_dcm(plan: FootstepPlan, omega: float, final_midpoint: np.ndarray,
             start_time: float | None = None,
             initial_dcm: np.ndarray | None = None,
             initial_dcm_velocity: np.ndarray | None = None) -> DcmTrajectory:
    """Assemble the piecewise capture-point reference for a footstep plan.

    Single-support pieces follow the support-foot exponential; their initial
    values come from a backward recursion over the support switches so the
    final step lands exactly on the terminal hold point, where the reference
    comes to rest. Double-support cubics bridge the pieces with matched
    position and velocity; the first one starts from `initial_dcm` (default:
    at rest on the initial stance midpoint).
    """
    if omega <= 0:
        raise ValueError("omega must be > 0")
    final_midpoint = np.asarray(final_midpoint, dtype=float)

    if plan.is_standing():
        t0 = 0.0 if start_time is None else start_time
        hold = DcmPiece("DS", t0, math.inf,
                        coeffs=(final_midpoint, np.zeros(2), np.zeros(2), np.zeros(2)))
        return DcmTrajectory([hold], omega, corners=[final_midpoint])

    steps = plan.footsteps
    if start_time is None:
        start_time = steps[0].cycle_start
    for a, b in zip(steps, steps[1:]):
        if abs(b.cycle_start - a.impact_time) > 1e-9:
            raise PlanError("footstep cycles must tile the timeline")

    if initial_dcm is None:
        initial_dcm = (plan.initial_left[:2] + plan.initial_right[:2]) / 2.0
    initial_dcm = np.asarray(initial_dcm, dtype=float)
    if initial_dcm_velocity is None:
        initial_dcm_velocity = np.zeros(2)
    initial_dcm_velocity = np.asarray(initial_dcm_velocity, dtype=float)

    # Backward recursion over nominal support switches (mid double support):
    # the corner after the last step is the terminal hold point.
    n = len(steps)
    zmps = [plan.support_pose(i)[:2] for i in range(n)]
    corners = [np.zeros(2)] * (n + 1)
    corners[n] = final_midpoint
    for i in range(n - 1, -1, -1):
        corners[i] = zmps[i] + math.exp(-omega * steps[i].step_duration) * (
            corners[i + 1] - zmps[i])

    pieces: list[DcmPiece] = []
    prev_end: tuple[np.ndarray, np.ndarray] = (initial_dcm, initial_dcm_velocity)
    for i, step in enumerate(steps):
        t_ds_end = step.cycle_start + step.ds_duration
        # Single-support piece: exponential anchored at the mid-DS corner.
        xi_ss0 = dcm_ss(zmps[i], corners[i], omega, step.ds_duration / 2.0)
        ss = DcmPiece("SS", t_ds_end, step.impact_time, r_zmp=zmps[i], xi0=xi_ss0,
                      omega=omega)
        xi_b, xidot_b = ss.eval(t_ds_end)
        coeffs = dcm_ds_coeffs(prev_end[0], prev_end[1], xi_b, xidot_b,
                               step.ds_duration)
        pieces.append(DcmPiece("DS", step.cycle_start, t_ds_end, coeffs=coeffs))
        pieces.append(ss)
        prev_end = ss.eval(step.impact_time)

    # Terminal weight transfer onto the final hold point, ending at rest.
    last = steps[-1]
    t_settle = last.impact_time + last.ds_duration
    coeffs = dcm_ds_coeffs(prev_end[0], prev_end[1], final_midpoint, np.zeros(2),
                           last.ds_duration)
    pieces.append(DcmPiece("DS", last.impact_time, t_settle, coeffs=coeffs))
    pieces.append(DcmPiece("DS", t_settle, math.inf,
                           coeffs=(final_midpoint, np.zeros(2), np.zeros(2),
                                   np.zeros(2))))
    return DcmTrajectory(pieces, omega, corners=corners).check_continuity()
