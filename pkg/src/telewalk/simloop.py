"""Deterministic closed-loop simulator tying all controller layers together.

Each tick: retarget the operator command, replan gait at support switches,
run the balance layer against the pendulum plant, assemble and solve the
whole-body QP, integrate the kinematic robot with perfect velocity tracking,
and emit one telemetry record. Everything is a pure function of the scenario
configuration and the command stream, so reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gait as gait_mod
from .config import ScenarioConfig
from .dcm_control import (
    IntegralState,
    LipmState,
    com_reference_step,
    dcm_controller,
    dcm_from_state,
    lipm_step,
    zmp_com_controller,
)
from .model import Kinematics, RobotState, com_position, forward_kinematics
from .retarget import (
    OperatorCommand,
    RetargetCalibration,
    calibrate_hand_consts,
    head_to_neck_angles,
    retargeted_hand_target,
    treadmill_to_com_command,
)
from .spatial import (
    Transform,
    check_rotation,
    compose,
    invert,
    orientation_error,
    rot_axis,
    rot_z,
    yaw_of,
)
from .support import clamp_to_polygon, polygon_margin, support_polygon
from .telemetry import TelemetryRecord, TelemetryWriter
from .wholebody import (
    TaskSet,
    desired_com_velocity,
    desired_foot_velocity,
    desired_hand_velocity,
    desired_postural_velocity,
    desired_torso_velocity,
    scale_to_velocity_limits,
    solve,
)

COMMAND_COLUMNS = (
    ["t", "v_u", "theta_u"]
    + [f"lhand_{c}" for c in ("x", "y", "z")]
    + [f"lhand_r{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
    + [f"rhand_{c}" for c in ("x", "y", "z")]
    + [f"rhand_r{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
    + [f"head_r{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
)


class CommandStreamError(ValueError):
    """Command file malformed; message names the offending row."""


class SimAbort(RuntimeError):
    """Run aborted; carries the offending tick."""

    def __init__(self, tick: int, message: str):
        super().__init__(f"tick {tick}: {message}")
        self.tick = tick


@dataclass
class CommandStream:
    """Timestamped operator records, held zero-order between samples."""

    records: list[OperatorCommand] = field(default_factory=list)

    def at(self, t: float) -> OperatorCommand:
        latest = None
        for rec in self.records:
            if rec.time <= t + 1e-12:
                latest = rec
            else:
                break
        return latest if latest is not None else OperatorCommand.neutral(t)

    def __len__(self) -> int:
        return len(self.records)


def parse_command_stream(text: str) -> CommandStream:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        return CommandStream([])
    header = [c.strip() for c in lines[0].split(",")]
    if header != COMMAND_COLUMNS:
        raise CommandStreamError("row 1: header does not match the command schema")
    records: list[OperatorCommand] = []
    prev_t = -math.inf
    for rowno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(COMMAND_COLUMNS):
            raise CommandStreamError(
                f"row {rowno}: {len(parts)} fields, expected {len(COMMAND_COLUMNS)}")
        try:
            vals = [float(v) for v in parts]
        except ValueError as e:
            raise CommandStreamError(f"row {rowno}: {e}") from e
        t, v_u, theta_u = vals[0], vals[1], vals[2]
        if t < prev_t:
            raise CommandStreamError(f"row {rowno}: timestamps must be non-decreasing")
        prev_t = t
        if v_u < 0:
            raise CommandStreamError(f"row {rowno}: v_u must be >= 0")
        lhand = Transform(np.array(vals[6:15]).reshape(3, 3), np.array(vals[3:6]))
        rhand = Transform(np.array(vals[18:27]).reshape(3, 3), np.array(vals[15:18]))
        head = np.array(vals[27:36]).reshape(3, 3)
        try:
            check_rotation(lhand.rotation, f"row {rowno}: lhand rotation")
            check_rotation(rhand.rotation, f"row {rowno}: rhand rotation")
            check_rotation(head, f"row {rowno}: head rotation")
        except ValueError as e:
            raise CommandStreamError(str(e)) from e
        records.append(OperatorCommand(t, v_u, theta_u, lhand, rhand, head))
    return CommandStream(records)


def read_command_stream(path) -> CommandStream:
    with open(path, "r", encoding="utf-8") as f:
        return parse_command_stream(f.read())


def write_command_stream(stream: CommandStream, sink: io.TextIOBase):
    sink.write(",".join(COMMAND_COLUMNS) + "\n")
    for rec in stream.records:
        vals = ([rec.time, rec.walk_speed, rec.heading]
                + list(rec.left_hand.translation)
                + list(rec.left_hand.rotation.reshape(9))
                + list(rec.right_hand.translation)
                + list(rec.right_hand.rotation.reshape(9))
                + list(rec.head_orientation.reshape(9)))
        sink.write(",".join(f"{v:.17g}" for v in vals) + "\n")


def _pose2d_of(transform: Transform) -> np.ndarray:
    return np.array([transform.translation[0], transform.translation[1],
                     yaw_of(transform.rotation)])


def _planar_transform(pose2d: np.ndarray, z: float = 0.0) -> Transform:
    return Transform(rot_z(pose2d[2]), np.array([pose2d[0], pose2d[1], z]))


@dataclass
class GaitState:
    mode: str                      # "stand" | "walk" | "closing"
    ref_left: np.ndarray           # reference stance, pose2d
    ref_right: np.ndarray
    hold_point: np.ndarray         # standing reference point, 2
    plan: gait_mod.FootstepPlan | None = None
    dcm_traj: gait_mod.DcmTrajectory | None = None
    swing: gait_mod.SwingTrajectory | None = None
    swing_foot: str | None = None
    next_foot: str = "right"
    # Base yaw averaged over the running cycle; the instantaneous yaw carries
    # an alternating stride bias that would zigzag the plans.
    yaw_sin: float = 0.0
    yaw_cos: float = 0.0
    yaw_samples: int = 0

    def observe_yaw(self, yaw: float):
        self.yaw_sin += math.sin(yaw)
        self.yaw_cos += math.cos(yaw)
        self.yaw_samples += 1

    def cycle_yaw(self, fallback: float) -> float:
        if self.yaw_samples == 0:
            return fallback
        return math.atan2(self.yaw_sin, self.yaw_cos)

    def reset_yaw_average(self):
        self.yaw_sin = self.yaw_cos = 0.0
        self.yaw_samples = 0

    def stance_midpoint(self) -> np.ndarray:
        return (self.ref_left[:2] + self.ref_right[:2]) / 2.0

    def stance_heading(self) -> float:
        return math.atan2(
            math.sin(self.ref_left[2]) + math.sin(self.ref_right[2]),
            math.cos(self.ref_left[2]) + math.cos(self.ref_right[2]))


@dataclass
class World:
    config: ScenarioConfig
    robot: RobotState
    lipm: LipmState
    gait: GaitState
    calibration: RetargetCalibration
    x_ref: np.ndarray              # balance-layer CoM reference, 2
    x_star: np.ndarray             # integrated whole-body CoM reference, 3
    s_des: np.ndarray
    dcm_integral: IntegralState
    com_integral: IntegralState
    hand_integrals: dict
    foot_integrals: dict
    zmp_queue: list
    time: float = 0.0
    tick: int = 0
    limit_violations: int = 0
    last_hand_pos: dict = field(default_factory=dict)


def init_world(config: ScenarioConfig) -> World:
    model = config.model
    state = RobotState(Transform.identity(), model.home_posture.copy())
    fk = forward_kinematics(model, state)
    base_z = -fk["left_foot"].translation[2]
    state = RobotState(Transform(np.eye(3), np.array([0.0, 0.0, base_z])),
                       model.home_posture.copy())
    fk = forward_kinematics(model, state)

    ref_left = _pose2d_of(fk["left_foot"])
    ref_right = _pose2d_of(fk["right_foot"])
    com0 = com_position(model, state)
    hold = com0[:2].copy()

    head_inv = invert(fk["head"])
    calibration = calibrate_hand_consts(
        OperatorCommand.neutral(), config.calibration,
        compose(head_inv, fk["left_hand"]), compose(head_inv, fk["right_hand"]))

    gait = GaitState(mode="stand", ref_left=ref_left, ref_right=ref_right,
                     hold_point=hold)
    gait.dcm_traj = gait_mod.plan_dcm(
        gait_mod.FootstepPlan([], ref_left, ref_right, config.planner),
        config.omega, hold, start_time=0.0)

    lipm = LipmState(hold + config.plant["initial_com_offset"], np.zeros(2))
    delay = config.plant["zmp_delay_ticks"]
    return World(
        config=config,
        robot=state,
        lipm=lipm,
        gait=gait,
        calibration=calibration,
        x_ref=hold.copy(),
        x_star=com0.copy(),
        s_des=model.home_posture.copy(),
        dcm_integral=IntegralState.zero(2, config.dcm_integral_bound),
        com_integral=IntegralState.zero(3, config.com_integral_bound),
        hand_integrals={"left": IntegralState.zero(3, config.hand_integral_bound),
                        "right": IntegralState.zero(3, config.hand_integral_bound)},
        foot_integrals={"left": IntegralState.zero(3, config.foot_integral_bound),
                        "right": IntegralState.zero(3, config.foot_integral_bound)},
        zmp_queue=[hold.copy() for _ in range(delay)],
    )


def _replan(world: World, cmd: OperatorCommand, theta_r: float, now: float):
    """Receding-horizon replan at a support switch (or walk start)."""
    g = world.gait
    cfg = world.config
    xi_ref, xidot_ref = g.dcm_traj.eval(now)
    com_cmd = treadmill_to_com_command(cmd.walk_speed, cmd.heading,
                                       g.cycle_yaw(theta_r))
    g.reset_yaw_average()
    walking_wanted = com_cmd.norm() >= cfg.planner.deadband

    if walking_wanted:
        plan = gait_mod.plan_footsteps(com_cmd, g.ref_left, g.ref_right, cfg.planner,
                                       start_time=now, first_foot=g.next_foot)
        g.mode = "walk"
    elif g.mode in ("walk", "closing"):
        plan = gait_mod.closing_plan(g.ref_left, g.ref_right, g.next_foot,
                                     cfg.planner, start_time=now)
        g.mode = "closing"
    else:
        return

    g.plan = plan
    g.dcm_traj = gait_mod.plan_dcm(plan, cfg.omega, plan.final_stance_midpoint(),
                                   initial_dcm=xi_ref,
                                   initial_dcm_velocity=xidot_ref)
    step = plan.footsteps[0]
    g.swing_foot = step.foot
    g.swing = gait_mod.swing_trajectory(
        plan.prior_pose(0), step.pose2d, step.step_duration, step.ds_duration,
        cfg.planner.apex_height, cycle_start=step.cycle_start)
    world.foot_integrals[step.foot] = IntegralState.zero(
        3, cfg.foot_integral_bound)


def _advance_gait(world: World, cmd: OperatorCommand, theta_r: float, now: float):
    """Land finished steps, switch modes, replan at double-support onsets."""
    g = world.gait
    half_tick = world.config.dt / 2.0
    walking_wanted = cmd.walk_speed >= world.config.planner.deadband

    if g.mode == "stand":
        if walking_wanted:
            _replan(world, cmd, theta_r, now)
        return

    step = g.plan.footsteps[0]
    if now >= step.impact_time - half_tick:
        # Footstep lands: commit it to the reference stance.
        if step.foot == "left":
            g.ref_left = step.pose2d.copy()
        else:
            g.ref_right = step.pose2d.copy()
        g.next_foot = "left" if step.foot == "right" else "right"
        g.swing = None
        g.swing_foot = None
        if g.mode == "closing":
            g.mode = "stand"
            g.hold_point = g.plan.final_stance_midpoint()
            g.plan = None
            # The trailing hold piece of the existing trajectory already rests
            # on the final midpoint; keep it.
            if walking_wanted:
                _replan(world, cmd, theta_r, now)
        else:
            _replan(world, cmd, theta_r, now)


def _phase(world: World, now: float) -> str:
    g = world.gait
    if g.mode == "stand" or g.plan is None:
        return "stand"
    step = g.plan.footsteps[0]
    if now < step.swing_start - 1e-12:
        return "ds"
    return f"ss_{step.foot}"


def _support_poses(world: World, phase: str) -> list[np.ndarray]:
    g = world.gait
    if phase == "ss_left":
        return [g.ref_right]
    if phase == "ss_right":
        return [g.ref_left]
    return [g.ref_left, g.ref_right]


def step(world: World, cmd: OperatorCommand) -> TelemetryRecord:
    """Advance the world by one control tick under the given command."""
    cfg = world.config
    model = cfg.model
    dt = cfg.dt
    now = world.time
    g = world.gait

    kin = Kinematics(model, world.robot)
    fk = {name: kin.pose(name)
          for name in ("head", "torso", "left_hand", "right_hand",
                       "left_foot", "right_foot")}
    com_kin = kin.com()

    # 1. Retargeting: walking command, hand targets, neck posture.
    theta_r = yaw_of(world.robot.base_pose.rotation)
    g.observe_yaw(theta_r)
    hand_targets = {}
    for side, frame in (("left", "left_hand"), ("right", "right_hand")):
        rel = retargeted_hand_target(cmd, world.calibration, side)
        hand_targets[side] = compose(fk["head"], rel)
    for jname, angle in zip(
            ("neck_yaw", "neck_pitch"),
            head_to_neck_angles(
                cmd.head_orientation, cmd.heading,
                model.joints[model.joint_index["neck_yaw"]].pos_limits,
                model.joints[model.joint_index["neck_pitch"]].pos_limits)):
        if jname in model.joint_index:
            world.s_des[model.joint_index[jname]] = angle

    # 2. Gait progression and receding-horizon replanning.
    try:
        _advance_gait(world, cmd, theta_r, now)
    except gait_mod.PlanError as e:
        raise SimAbort(world.tick, f"plan inconsistency: {e}") from e
    phase = _phase(world, now)

    # 3. Balance layer: capture-point control, saturation, plant advance.
    xi_ref, xidot_ref = g.dcm_traj.eval(now)
    xi_meas = dcm_from_state(world.lipm, cfg.omega)
    zmp_ref = dcm_controller(xi_meas, xi_ref, xidot_ref, world.dcm_integral,
                             cfg.gains)
    world.dcm_integral = world.dcm_integral.advanced(xi_meas - xi_ref, dt)

    hull = support_polygon(_support_poses(world, phase), model.sole_length,
                           model.sole_width)
    zmp_applied = (clamp_to_polygon(zmp_ref, hull) if cfg.plant["saturate_zmp"]
                   else zmp_ref.copy())
    if world.zmp_queue:
        world.zmp_queue.append(zmp_applied)
        zmp_applied = world.zmp_queue.pop(0)
    margin = polygon_margin(zmp_applied, hull)

    # 4. Tracking layer: CoM velocity setpoint from the plant measurements.
    xdot_ref = cfg.omega * (xi_ref - world.x_ref)
    xdot_star = zmp_com_controller(xdot_ref, zmp_ref, zmp_applied, world.x_ref,
                                   world.lipm.x, cfg.gains)

    # 5. Whole-body layer: task assembly and QP solve.
    tg = cfg.task_gains
    n = model.n_joints
    ts = TaskSet(nv=model.nv)

    com_target = desired_com_velocity(
        np.append(xdot_star, 0.0), com_kin, world.x_star, world.com_integral,
        tg.com_kp, tg.com_ki)
    world.com_integral = world.com_integral.advanced(com_kin - world.x_star, dt)
    ts.add_hard(kin.com_jacobian(), com_target, "com")

    foot_refs = {"left": g.ref_left, "right": g.ref_right}
    for side, frame in (("left", "left_foot"), ("right", "right_foot")):
        if g.swing is not None and g.swing_foot == side:
            ref_pose = g.swing.pose(now)
            ff = g.swing.twist(now)[:3]
        else:
            ref_pose = _planar_transform(foot_refs[side])
            ff = np.zeros(3)
        target = desired_foot_velocity(fk[frame], ref_pose, ff,
                                       world.foot_integrals[side], tg.foot)
        world.foot_integrals[side] = world.foot_integrals[side].advanced(
            fk[frame].translation - ref_pose.translation, dt)
        ts.add_hard(kin.frame_jacobian(frame), target, f"{side}_foot")

    torso_ref = rot_z(g.stance_heading())
    ts.add_soft(kin.frame_jacobian("torso")[3:],
                desired_torso_velocity(fk["torso"].rotation, torso_ref, tg.torso_kw),
                np.eye(3), "torso")

    hand_errs = {}
    for side, frame, gains in (("left", "left_hand", tg.left_hand),
                               ("right", "right_hand", tg.right_hand)):
        target_pose = hand_targets[side]
        v_hand = desired_hand_velocity(fk[frame], target_pose,
                                       world.hand_integrals[side], gains.kp,
                                       gains.ki, gains.kw,
                                       feedback_sign=cfg.hand_feedback_sign)
        err_p = fk[frame].translation - target_pose.translation
        world.hand_integrals[side] = world.hand_integrals[side].advanced(err_p, dt)
        hand_errs[side] = (err_p, orientation_error(fk[frame].rotation,
                                                    target_pose.rotation))
        world.last_hand_pos[side] = fk[frame].translation.copy()
        ts.add_soft(kin.frame_jacobian(frame), v_hand, gains.weight,
                    f"{side}_hand")

    selector = np.hstack([np.zeros((n, 6)), np.eye(n)])
    ts.add_soft(selector,
                desired_postural_velocity(world.robot.joint_positions, world.s_des,
                                          tg.postural_gain),
                tg.postural_weight, "postural")

    try:
        sol = solve(ts)
    except Exception as e:
        raise SimAbort(world.tick, f"QP failure: {e}") from e
    nu = scale_to_velocity_limits(sol.nu, model.velocity_limits())

    # 6. Integrate the kinematic robot and the plant references.
    base = world.robot.base_pose
    lin, ang = nu[0:3], nu[3:6]
    ang_norm = float(np.linalg.norm(ang))
    if ang_norm > 1e-12:
        R_new = rot_axis(ang / ang_norm, ang_norm * dt) @ base.rotation
    else:
        R_new = base.rotation
    world.robot = RobotState(
        Transform(R_new, base.translation + lin * dt),
        world.robot.joint_positions + nu[6:] * dt,
        velocity=nu,
    )
    if world.robot.limit_violations(model):
        world.limit_violations += 1

    world.lipm = lipm_step(world.lipm, zmp_applied, cfg.omega, dt)
    world.x_ref = com_reference_step(world.x_ref, xi_ref, cfg.omega, dt)
    world.x_star = world.x_star + np.append(xdot_star, 0.0) * dt

    record = TelemetryRecord(
        t=now,
        dcm=xi_meas,
        dcm_ref=np.asarray(xi_ref, dtype=float),
        zmp_applied=zmp_applied,
        zmp_ref=zmp_ref,
        com=world.lipm.x.copy(),
        com_ref=world.x_ref.copy(),
        comdot_star=xdot_star,
        phase=phase,
        lhand_err_pos=hand_errs["left"][0],
        lhand_err_rot=hand_errs["left"][1],
        rhand_err_pos=hand_errs["right"][0],
        rhand_err_rot=hand_errs["right"][1],
        joints=world.robot.joint_positions.copy(),
        qp_objective=sol.objective,
        qp_residual=sol.residual,
        base_yaw=theta_r,
        com_gap=float(np.linalg.norm(world.lipm.x - com_kin[:2])),
        zmp_margin=margin,
    )
    world.time = (world.tick + 1) * dt
    world.tick += 1
    return record


@dataclass
class RunSummary:
    status: str
    ticks: int
    distance: float            # planar displacement of the plant CoM
    dcm_rms: float
    max_qp_residual: float
    final_base_yaw: float
    limit_violations: int
    telemetry_sha256: str
    dt: float

    def lines(self) -> list[str]:
        return [
            f"status: {self.status}",
            f"ticks: {self.ticks} (dt={self.dt:.17g})",
            f"distance walked: {self.distance:.4f} m",
            f"dcm tracking rms: {self.dcm_rms:.6f} m",
            f"max qp residual: {self.max_qp_residual:.3e}",
            f"final base yaw: {self.final_base_yaw:.4f} rad",
            f"joint limit violations: {self.limit_violations}",
            f"telemetry sha256: {self.telemetry_sha256}",
        ]


def run_scenario(config: ScenarioConfig, out_path=None,
                 command_provider=None) -> RunSummary:
    """Run a scenario to completion, writing telemetry along the way."""
    if command_provider is None:
        cmd_file = config.command_file()
        if config.command_source["kind"] == "file" and cmd_file is not None:
            command_provider = read_command_stream(cmd_file)
        else:
            command_provider = CommandStream([])

    world = init_world(config)
    n_ticks = int(round(config.duration / config.dt))
    buffer = io.StringIO()
    writer = TelemetryWriter(buffer, config.model.n_joints)

    start = world.lipm.x.copy()
    dcm_sq = 0.0
    max_residual = 0.0
    record = None
    for _ in range(n_ticks):
        record = step(world, command_provider.at(world.time))
        writer.write(record)
        err = record.dcm - record.dcm_ref
        dcm_sq += float(err @ err)
        max_residual = max(max_residual, record.qp_residual)

    text = buffer.getvalue()
    if out_path is not None:
        Path(out_path).write_text(text, encoding="utf-8")
    return RunSummary(
        status="ok",
        ticks=world.tick,
        distance=float(np.linalg.norm(world.lipm.x - start)),
        dcm_rms=math.sqrt(dcm_sq / max(world.tick, 1)),
        max_qp_residual=max_residual,
        final_base_yaw=record.base_yaw if record is not None else 0.0,
        limit_violations=world.limit_violations,
        telemetry_sha256=hashlib.sha256(text.encode()).hexdigest(),
        dt=config.dt,
    )
