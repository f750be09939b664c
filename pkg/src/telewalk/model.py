"""Floating-base kinematic humanoid: description loading, FK, Jacobians, CoM.

The robot is a tree of links connected by revolute joints. Configuration is
(base pose, joint angles s); velocity is nu = (base linear, base angular,
joint rates), all expressed in the inertial frame. Jacobians map nu to frame
twists with linear rows first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .spatial import Transform, compose, hat, rot_axis, rpy_to_rotation

AXIS_UNIT_TOL = 1e-9


class ModelSchemaError(ValueError):
    """Description file violates the kinematic schema; message names the entity."""


@dataclass(frozen=True)
class Link:
    name: str
    mass: float
    com: np.ndarray  # CoM offset in the link frame, meters


@dataclass(frozen=True)
class Joint:
    name: str
    parent: str
    child: str
    axis: np.ndarray          # unit rotation axis in the joint frame
    origin: Transform         # fixed mount: parent link frame -> joint frame
    pos_limits: tuple[float, float]
    vel_limit: float


@dataclass(frozen=True)
class RobotModel:
    name: str
    root: str
    links: dict[str, Link]
    joints: list[Joint]                    # topologically ordered, parents first
    frames: dict[str, tuple[str, Transform]]  # frame name -> (link, fixed offset)
    home_posture: np.ndarray
    sole_length: float
    sole_width: float
    groups: dict[str, list[str]] = field(default_factory=dict)
    joint_index: dict[str, int] = field(default_factory=dict)
    chains: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "joint_index",
                           {j.name: i for i, j in enumerate(self.joints)})
        parent_joint = {j.child: j for j in self.joints}
        chains: dict[str, np.ndarray] = {}
        for link in self.links:
            idx = []
            cursor = link
            while cursor != self.root:
                j = parent_joint[cursor]
                idx.append(self.joint_index[j.name])
                cursor = j.parent
            chains[link] = np.asarray(idx[::-1], dtype=int)
        object.__setattr__(self, "chains", chains)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def nv(self) -> int:
        return 6 + len(self.joints)

    def total_mass(self) -> float:
        return sum(l.mass for l in self.links.values())

    def joint_names(self) -> list[str]:
        return [j.name for j in self.joints]

    def velocity_limits(self) -> np.ndarray:
        return np.array([j.vel_limit for j in self.joints])


@dataclass
class RobotState:
    """Floating-base configuration and velocity."""

    base_pose: Transform
    joint_positions: np.ndarray
    velocity: np.ndarray | None = None  # (6 + n) vector, linear/angular/joints

    def __post_init__(self):
        self.joint_positions = np.asarray(self.joint_positions, dtype=float)
        if self.velocity is None:
            self.velocity = np.zeros(6 + self.joint_positions.size)
        self.velocity = np.asarray(self.velocity, dtype=float)

    def limit_violations(self, model: RobotModel) -> list[str]:
        """Joint-limit violations, reported rather than clamped."""
        out = []
        for j, joint in enumerate(model.joints):
            lo, hi = joint.pos_limits
            s = self.joint_positions[j]
            if s < lo - 1e-12 or s > hi + 1e-12:
                out.append(f"{joint.name}: position {s:.4f} outside [{lo}, {hi}]")
        if not np.all(np.isfinite(self.velocity)):
            out.append("velocity: non-finite entries")
        return out


@dataclass(frozen=True)
class FrameKinematics:
    pose: Transform
    jacobian: np.ndarray  # 6 x (6+n), linear rows then angular rows


def _parse_origin(raw: dict | None, where: str) -> Transform:
    if raw is None:
        return Transform.identity()
    xyz = np.asarray(raw.get("xyz", [0.0, 0.0, 0.0]), dtype=float)
    rpy = np.asarray(raw.get("rpy", [0.0, 0.0, 0.0]), dtype=float)
    if xyz.shape != (3,) or rpy.shape != (3,):
        raise ModelSchemaError(f"{where}: origin xyz/rpy must be 3-vectors")
    return Transform(rpy_to_rotation(*rpy), xyz)


def load_model(text: str) -> RobotModel:
    """Parse and validate a kinematic description (YAML text)."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ModelSchemaError(f"unparseable description: {e}") from e
    if not isinstance(raw, dict):
        raise ModelSchemaError("description must be a mapping")
    for key in ("root", "links", "joints"):
        if key not in raw:
            raise ModelSchemaError(f"missing required section '{key}'")

    links: dict[str, Link] = {}
    for entry in raw["links"]:
        name = entry.get("name")
        if not name:
            raise ModelSchemaError("link without a name")
        if name in links:
            raise ModelSchemaError(f"duplicate link name '{name}'")
        mass = float(entry.get("mass", 0.0))
        if mass <= 0.0:
            raise ModelSchemaError(f"link '{name}': mass must be > 0, got {mass}")
        com = np.asarray(entry.get("com", [0.0, 0.0, 0.0]), dtype=float)
        if com.shape != (3,):
            raise ModelSchemaError(f"link '{name}': com must be a 3-vector")
        links[name] = Link(name, mass, com)

    root = raw["root"]
    if root not in links:
        raise ModelSchemaError(f"root link '{root}' not defined")

    joints: list[Joint] = []
    seen_joints: set[str] = set()
    child_links: set[str] = set()
    for entry in raw["joints"]:
        name = entry.get("name")
        if not name:
            raise ModelSchemaError("joint without a name")
        if name in seen_joints:
            raise ModelSchemaError(f"duplicate joint name '{name}'")
        seen_joints.add(name)
        parent, child = entry.get("parent"), entry.get("child")
        for link_name, role in ((parent, "parent"), (child, "child")):
            if link_name not in links:
                raise ModelSchemaError(f"joint '{name}': unknown {role} link '{link_name}'")
        if child == root:
            raise ModelSchemaError(f"joint '{name}': root link cannot be a child")
        if child in child_links:
            raise ModelSchemaError(f"link '{child}' has two parent joints")
        child_links.add(child)
        axis = np.asarray(entry.get("axis", [0.0, 0.0, 1.0]), dtype=float)
        if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > AXIS_UNIT_TOL:
            raise ModelSchemaError(f"joint '{name}': axis must be a unit 3-vector")
        limits = entry.get("limits", {})
        pos = limits.get("pos", [-3.14, 3.14])
        vel = float(limits.get("vel", 10.0))
        if vel <= 0.0:
            raise ModelSchemaError(f"joint '{name}': velocity limit must be > 0")
        joints.append(Joint(name, parent, child, axis,
                            _parse_origin(entry.get("origin"), f"joint '{name}'"),
                            (float(pos[0]), float(pos[1])), vel))

    orphans = set(links) - child_links - {root}
    if orphans:
        raise ModelSchemaError(
            f"links not connected to the tree (extra roots): {sorted(orphans)}")

    # Topological order and cycle detection from the root outward.
    by_parent: dict[str, list[Joint]] = {}
    for j in joints:
        by_parent.setdefault(j.parent, []).append(j)
    ordered: list[Joint] = []
    stack = [root]
    reached = {root}
    while stack:
        link = stack.pop(0)
        for j in by_parent.get(link, []):
            if j.child in reached:
                raise ModelSchemaError(f"cycle detected at joint '{j.name}'")
            reached.add(j.child)
            ordered.append(j)
            stack.append(j.child)
    if len(ordered) != len(joints):
        missing = [j.name for j in joints if j not in ordered]
        raise ModelSchemaError(f"joints unreachable from root: {missing}")

    frames: dict[str, tuple[str, Transform]] = {"base": (root, Transform.identity())}
    for fname, spec in (raw.get("frames") or {}).items():
        if isinstance(spec, str):
            link_name, offset = spec, Transform.identity()
        else:
            link_name = spec.get("link")
            offset = _parse_origin(spec.get("offset"), f"frame '{fname}'")
        if link_name not in links:
            raise ModelSchemaError(f"frame '{fname}': unknown link '{link_name}'")
        frames[fname] = (link_name, offset)

    home_raw = raw.get("home", {})
    home = np.zeros(len(ordered))
    index = {j.name: i for i, j in enumerate(ordered)}
    for jname, value in home_raw.items():
        if jname not in index:
            raise ModelSchemaError(f"home posture names unknown joint '{jname}'")
        home[index[jname]] = float(value)

    groups: dict[str, list[str]] = {}
    for gname, members in (raw.get("groups") or {}).items():
        for jname in members:
            if jname not in index:
                raise ModelSchemaError(f"group '{gname}' names unknown joint '{jname}'")
        groups[gname] = list(members)

    sole = raw.get("sole", {})
    return RobotModel(
        name=raw.get("name", "robot"),
        root=root,
        links=links,
        joints=ordered,
        frames=frames,
        home_posture=home,
        sole_length=float(sole.get("length", 0.12)),
        sole_width=float(sole.get("width", 0.07)),
        groups=groups,
    )


def load_model_file(path) -> RobotModel:
    with open(path, "r", encoding="utf-8") as f:
        return load_model(f.read())


def _check_dims(model: RobotModel, state: RobotState):
    n = model.n_joints
    if state.joint_positions.shape != (n,):
        raise ValueError(f"expected {n} joint positions, got {state.joint_positions.shape}")
    if state.velocity.shape != (6 + n,):
        raise ValueError(f"expected velocity of size {6 + n}, got {state.velocity.shape}")


def _cross_columns(axes: np.ndarray, arms: np.ndarray) -> np.ndarray:
    """Row-wise cross product of (k,3) arrays without numpy.cross overhead."""
    out = np.empty_like(axes)
    out[:, 0] = axes[:, 1] * arms[:, 2] - axes[:, 2] * arms[:, 1]
    out[:, 1] = axes[:, 2] * arms[:, 0] - axes[:, 0] * arms[:, 2]
    out[:, 2] = axes[:, 0] * arms[:, 1] - axes[:, 1] * arms[:, 0]
    return out


class Kinematics:
    """Per-state cache: link poses and joint world geometry computed once."""

    def __init__(self, model: RobotModel, state: RobotState):
        _check_dims(model, state)
        self.model = model
        self.state = state
        s = state.joint_positions
        rot: dict[str, np.ndarray] = {model.root: state.base_pose.rotation}
        pos: dict[str, np.ndarray] = {model.root: state.base_pose.translation}
        axes = np.zeros((model.n_joints, 3))
        origins = np.zeros((model.n_joints, 3))
        for i, joint in enumerate(model.joints):
            Rp, pp = rot[joint.parent], pos[joint.parent]
            Rj = Rp @ joint.origin.rotation
            pj = Rp @ joint.origin.translation + pp
            axes[i] = Rj @ joint.axis
            origins[i] = pj
            rot[joint.child] = Rj @ rot_axis(joint.axis, s[i])
            pos[joint.child] = pj
        self._rot, self._pos = rot, pos
        self.joint_axes = axes
        self.joint_origins = origins

    def _resolve(self, frame: str) -> tuple[str, Transform | None]:
        if frame in self.model.frames:
            return self.model.frames[frame]
        if frame in self.model.links:
            return frame, None
        raise KeyError(f"unknown frame '{frame}'")

    def pose(self, frame: str) -> Transform:
        link, offset = self._resolve(frame)
        T = Transform(self._rot[link], self._pos[link])
        return T if offset is None else compose(T, offset)

    def all_poses(self) -> dict[str, Transform]:
        out = {name: Transform(self._rot[name], self._pos[name])
               for name in self._rot}
        for fname, (link, offset) in self.model.frames.items():
            out[fname] = compose(out[link], offset)
        return out

    def point_jacobian(self, link: str, point_world: np.ndarray) -> np.ndarray:
        J = np.zeros((3, self.model.nv))
        J[:, 0:3] = np.eye(3)
        J[:, 3:6] = -hat(point_world - self.state.base_pose.translation)
        chain = self.model.chains[link]
        if chain.size:
            cols = _cross_columns(self.joint_axes[chain],
                                  point_world - self.joint_origins[chain])
            J[:, 6 + chain] = cols.T
        return J

    def frame_jacobian(self, frame: str) -> np.ndarray:
        link, offset = self._resolve(frame)
        p_frame = self.pose(frame).translation
        J = np.zeros((6, self.model.nv))
        J[0:3] = self.point_jacobian(link, p_frame)
        J[3:6, 3:6] = np.eye(3)
        chain = self.model.chains[link]
        if chain.size:
            J[3:6, 6 + chain] = self.joint_axes[chain].T
        return J

    def com(self) -> np.ndarray:
        acc = np.zeros(3)
        for link in self.model.links.values():
            acc += link.mass * (self._rot[link.name] @ link.com
                                + self._pos[link.name])
        return acc / self.model.total_mass()

    def com_jacobian(self) -> np.ndarray:
        total = self.model.total_mass()
        J = np.zeros((3, self.model.nv))
        weighted_com = np.zeros(3)
        for link in self.model.links.values():
            p = self._rot[link.name] @ link.com + self._pos[link.name]
            weighted_com += (link.mass / total) * p
            chain = self.model.chains[link.name]
            if chain.size:
                cols = _cross_columns(self.joint_axes[chain],
                                      p - self.joint_origins[chain])
                J[:, 6 + chain] += (link.mass / total) * cols.T
        J[:, 0:3] = np.eye(3)
        J[:, 3:6] = -hat(weighted_com - self.state.base_pose.translation)
        return J


def forward_kinematics(model: RobotModel, state: RobotState) -> dict[str, Transform]:
    """Pose of every link and named frame in the inertial frame."""
    return Kinematics(model, state).all_poses()


def point_jacobian(model: RobotModel, state: RobotState, link: str,
                   point_world: np.ndarray) -> np.ndarray:
    """3 x (6+n) Jacobian of a world point rigidly attached to a link."""
    return Kinematics(model, state).point_jacobian(link, point_world)


def frame_jacobian(model: RobotModel, state: RobotState, frame: str) -> np.ndarray:
    """6 x (6+n) geometric Jacobian of a named frame or link, linear rows first."""
    return Kinematics(model, state).frame_jacobian(frame)


def frame_kinematics(model: RobotModel, state: RobotState, frame: str) -> FrameKinematics:
    kin = Kinematics(model, state)
    return FrameKinematics(pose=kin.pose(frame), jacobian=kin.frame_jacobian(frame))


def com_position(model: RobotModel, state: RobotState) -> np.ndarray:
    """Mass-weighted average of link CoM positions, inertial frame."""
    return Kinematics(model, state).com()


def com_jacobian(model: RobotModel, state: RobotState) -> np.ndarray:
    """3 x (6+n) Jacobian of the whole-body CoM."""
    return Kinematics(model, state).com_jacobian()
