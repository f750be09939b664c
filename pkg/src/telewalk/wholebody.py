"""Velocity-resolved whole-body inverse kinematics as an equality-constrained QP.

Cost: unit-weighted torso angular task, weighted 6D hand tasks, and a weighted
postural task on the joint subvector. Hard constraints: CoM and both feet
velocities. Solved directly through the KKT system; no inequalities, so no
active-set machinery. Joint velocity limits are enforced afterwards by
uniformly scaling the solution, which preserves the constraint directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dcm_control import IntegralState, is_positive_definite
from .spatial import Transform, orientation_error

KKT_RESIDUAL_TOL = 1e-8
CONSTRAINT_RANK_TOL = 1e-10
HESSIAN_REGULARIZATION = 1e-9


class QpError(RuntimeError):
    """Whole-body QP could not be solved as posed."""


class DegenerateConstraintsError(QpError):
    """Hard-constraint rows are rank deficient; no silent least-squares."""


class IndefiniteCostError(QpError):
    """Reduced cost Hessian is not positive definite on the constraint null space."""


def _check_pd(M: np.ndarray, name: str, symmetric: bool = False) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got {M.shape}")
    if symmetric and np.abs(M - M.T).max() > 1e-12:
        raise ValueError(f"{name} must be symmetric")
    if not is_positive_definite(M):
        raise ValueError(f"{name} must be positive definite")
    return M


@dataclass(frozen=True)
class HandGains:
    kp: np.ndarray                 # 3x3 position gain
    ki: np.ndarray                 # 3x3 integral gain
    kw: np.ndarray                 # 3x3 angular gain
    weight: np.ndarray             # 6x6 task weight

    def __post_init__(self):
        object.__setattr__(self, "kp", _check_pd(self.kp, "hand kp"))
        object.__setattr__(self, "ki", _check_pd(self.ki, "hand ki"))
        object.__setattr__(self, "kw", _check_pd(self.kw, "hand kw"))
        object.__setattr__(self, "weight",
                           _check_pd(self.weight, "hand weight", symmetric=True))


@dataclass(frozen=True)
class FootGains:
    kp: np.ndarray
    ki: np.ndarray
    kw: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kp", _check_pd(self.kp, "foot kp"))
        object.__setattr__(self, "ki", _check_pd(self.ki, "foot ki"))
        object.__setattr__(self, "kw", _check_pd(self.kw, "foot kw"))


@dataclass(frozen=True)
class TaskGains:
    """Whole-body layer gains; everything validated positive definite."""

    torso_kw: np.ndarray           # 3x3 torso angular gain
    left_hand: HandGains
    right_hand: HandGains
    foot: FootGains                # shared between feet
    com_kp: np.ndarray             # 3x3
    com_ki: np.ndarray             # 3x3
    postural_weight: np.ndarray    # n x n task weight
    postural_gain: np.ndarray      # n x n

    def __post_init__(self):
        object.__setattr__(self, "torso_kw", _check_pd(self.torso_kw, "torso kw"))
        object.__setattr__(self, "com_kp", _check_pd(self.com_kp, "com kp"))
        object.__setattr__(self, "com_ki", _check_pd(self.com_ki, "com ki"))
        object.__setattr__(self, "postural_weight",
                           _check_pd(self.postural_weight, "postural weight",
                                     symmetric=True))
        object.__setattr__(self, "postural_gain",
                           _check_pd(self.postural_gain, "postural gain"))


def desired_torso_velocity(R: np.ndarray, R_des: np.ndarray,
                           kw: np.ndarray) -> np.ndarray:
    """Angular velocity target that steers the torso onto its reference."""
    return -np.asarray(kw, dtype=float) @ orientation_error(R, R_des)


def desired_hand_velocity(pose: Transform, pose_des: Transform,
                          integral: IntegralState, kp: np.ndarray,
                          ki: np.ndarray, kw: np.ndarray,
                          feedback_sign: float = 1.0) -> np.ndarray:
    """Hand twist target from pose error and its integral.

    With feedback_sign=+1 this is the raw printed law (error times positive
    gain); the assembled controller runs with -1, the stabilizing convention,
    selected by the closed-loop tests and recorded in the default config.
    """
    e_p = pose.translation - pose_des.translation
    linear = kp @ e_p + ki @ integral.value
    angular = kw @ orientation_error(pose.rotation, pose_des.rotation)
    return feedback_sign * np.concatenate([linear, angular])


def desired_foot_velocity(pose: Transform, pose_des: Transform,
                          feedforward_linear: np.ndarray,
                          integral: IntegralState, gains: FootGains) -> np.ndarray:
    """Foot twist target: linear feedforward minus the pose-error feedback."""
    e_p = pose.translation - pose_des.translation
    feedback = np.concatenate([
        gains.kp @ e_p + gains.ki @ integral.value,
        gains.kw @ orientation_error(pose.rotation, pose_des.rotation),
    ])
    ff = np.concatenate([np.asarray(feedforward_linear, dtype=float), np.zeros(3)])
    return ff - feedback


def desired_com_velocity(xdot_star: np.ndarray, x_meas: np.ndarray,
                         x_ref: np.ndarray, integral: IntegralState,
                         kp: np.ndarray, ki: np.ndarray) -> np.ndarray:
    """CoM velocity target around the balance-layer output."""
    err = np.asarray(x_meas, dtype=float) - np.asarray(x_ref, dtype=float)
    return np.asarray(xdot_star, dtype=float) - kp @ err - ki @ integral.value


def desired_postural_velocity(s: np.ndarray, s_des: np.ndarray,
                              k_s: np.ndarray) -> np.ndarray:
    """Joint velocity target pulling toward the reference posture."""
    return -np.asarray(k_s, dtype=float) @ (np.asarray(s, dtype=float)
                                            - np.asarray(s_des, dtype=float))


@dataclass
class SoftTask:
    jacobian: np.ndarray
    target: np.ndarray
    weight: np.ndarray
    name: str = "task"


@dataclass
class HardConstraint:
    jacobian: np.ndarray
    target: np.ndarray
    name: str = "constraint"


@dataclass
class TaskSet:
    """One tick's stack of tasks over the (6+n) velocity variables."""

    nv: int
    hard: list[HardConstraint] = field(default_factory=list)
    soft: list[SoftTask] = field(default_factory=list)

    def add_hard(self, jacobian: np.ndarray, target: np.ndarray, name: str):
        jacobian = np.atleast_2d(np.asarray(jacobian, dtype=float))
        if jacobian.shape[1] != self.nv:
            raise ValueError(f"{name}: expected {self.nv} columns")
        self.hard.append(HardConstraint(jacobian, np.asarray(target, float), name))

    def add_soft(self, jacobian: np.ndarray, target: np.ndarray,
                 weight: np.ndarray, name: str):
        jacobian = np.atleast_2d(np.asarray(jacobian, dtype=float))
        if jacobian.shape[1] != self.nv:
            raise ValueError(f"{name}: expected {self.nv} columns")
        self.soft.append(SoftTask(jacobian, np.asarray(target, float),
                                  np.asarray(weight, float), name))

    def constraint_rows(self) -> int:
        return sum(c.jacobian.shape[0] for c in self.hard)


@dataclass(frozen=True)
class QpSolution:
    nu: np.ndarray
    residual: float           # hard-constraint residual norm
    objective: float          # weighted soft-task cost at the optimum
    multipliers: np.ndarray


def objective_value(taskset: TaskSet, nu: np.ndarray) -> float:
    total = 0.0
    for task in taskset.soft:
        r = task.target - task.jacobian @ nu
        total += 0.5 * float(r @ task.weight @ r)
    return total


def solve(taskset: TaskSet) -> QpSolution:
    """Direct KKT solution of the stack of tasks.

    Raises DegenerateConstraintsError on rank-deficient hard constraints and
    IndefiniteCostError when the soft tasks leave the reduced Hessian short of
    positive definite.
    """
    nv = taskset.nv
    if taskset.constraint_rows() > nv:
        raise DegenerateConstraintsError(
            f"{taskset.constraint_rows()} constraint rows exceed {nv} variables")

    H = np.zeros((nv, nv))
    g = np.zeros(nv)
    for task in taskset.soft:
        JW = task.jacobian.T @ task.weight
        H += JW @ task.jacobian
        g -= JW @ task.target
    H += HESSIAN_REGULARIZATION * np.eye(nv)

    if taskset.hard:
        A = np.vstack([c.jacobian for c in taskset.hard])
        b = np.concatenate([c.target for c in taskset.hard])
    else:
        A = np.zeros((0, nv))
        b = np.zeros(0)
    m = A.shape[0]

    if m:
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] <= CONSTRAINT_RANK_TOL * sv[0]:
            names = ", ".join(c.name for c in taskset.hard)
            raise DegenerateConstraintsError(
                f"hard constraints rank deficient (sigma_min/sigma_max = "
                f"{sv[-1] / sv[0]:.2e}); rows: {names}")
        _, _, Vt = np.linalg.svd(A)
        Z = Vt[m:].T
    else:
        Z = np.eye(nv)

    if Z.shape[1]:
        reduced_eigs = np.linalg.eigvalsh(Z.T @ H @ Z)
        if reduced_eigs.min() <= 0.0:
            names = ", ".join(t.name for t in taskset.soft) or "none"
            raise IndefiniteCostError(
                f"reduced cost Hessian not positive definite (min eig = "
                f"{reduced_eigs.min():.2e}); soft-task weights do not cover the "
                f"constraint null space; tasks: {names}")

    K = np.zeros((nv + m, nv + m))
    K[:nv, :nv] = H
    K[:nv, nv:] = A.T
    K[nv:, :nv] = A
    rhs = np.concatenate([-g, b])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as e:
        raise QpError(f"KKT system singular: {e}") from e

    nu = sol[:nv]
    lam = sol[nv:]
    residual = float(np.linalg.norm(A @ nu - b)) if m else 0.0
    if residual >= KKT_RESIDUAL_TOL:
        raise QpError(f"constraint residual {residual:.2e} above tolerance")
    stationarity = np.linalg.norm(H @ nu + g + (A.T @ lam if m else 0.0))
    if stationarity >= KKT_RESIDUAL_TOL:
        raise QpError(f"stationarity residual {stationarity:.2e} above tolerance")
    return QpSolution(nu, residual, objective_value(taskset, nu), lam)


def scale_to_velocity_limits(nu: np.ndarray, limits: np.ndarray) -> np.ndarray:
    """Uniformly scale the solution so every joint respects its rate limit."""
    joints = np.abs(nu[6:])
    with np.errstate(divide="ignore"):
        ratios = np.where(joints > limits, limits / joints, 1.0)
    scale = float(ratios.min(initial=1.0))
    return nu * scale
