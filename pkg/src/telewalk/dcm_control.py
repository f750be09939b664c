"""Instantaneous balance control on the inverted-pendulum abstraction.

Two cascaded laws: the capture-point controller turns a reference trajectory
plus the measured capture point into a desired ground reference point; the
tracking controller turns reference-vs-measured ground point and CoM into a
CoM velocity setpoint. The plant here is the same pendulum abstraction,
discretized exactly so closed-form checks hold to machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GRAVITY = 9.81


class GainBoundError(ValueError):
    """A controller gain violates its stability bound."""


def _sym_eigs(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return np.linalg.eigvalsh((M + M.T) / 2.0)


def is_positive_definite(M: np.ndarray) -> bool:
    return bool(_sym_eigs(M).min() > 0.0)


def omega_from_com_height(z_com: float, gravity: float = GRAVITY) -> float:
    """Pendulum rate from the constant CoM height hypothesis."""
    if z_com <= 0:
        raise ValueError("CoM height must be > 0")
    return math.sqrt(gravity / z_com)


@dataclass(frozen=True)
class GainSet:
    """Balance-layer gains with their validity bounds checked at construction.

    Bounds: kp_dcm - I and ki_dcm positive definite; k_com - omega*I positive
    definite; k_zmp and omega*I - k_zmp positive definite.
    """

    kp_dcm: np.ndarray
    ki_dcm: np.ndarray
    k_zmp: np.ndarray
    k_com: np.ndarray
    omega: float

    def __post_init__(self):
        for name in ("kp_dcm", "ki_dcm", "k_zmp", "k_com"):
            M = np.asarray(getattr(self, name), dtype=float)
            if M.shape != (2, 2):
                raise GainBoundError(f"{name} must be 2x2, got {M.shape}")
            object.__setattr__(self, name, M)
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise GainBoundError(f"omega must be > 0, got {self.omega}")
        I2 = np.eye(2)
        if not is_positive_definite(self.kp_dcm - I2):
            raise GainBoundError(
                "kp_dcm must exceed identity (kp_dcm - I not positive definite)")
        if not is_positive_definite(self.ki_dcm):
            raise GainBoundError("ki_dcm must be positive definite")
        if not is_positive_definite(self.k_com - self.omega * I2):
            raise GainBoundError(
                f"k_com must exceed omega*I (omega = {self.omega:.4g})")
        if not is_positive_definite(self.k_zmp):
            raise GainBoundError("k_zmp must be positive definite")
        if not is_positive_definite(self.omega * I2 - self.k_zmp):
            raise GainBoundError(
                f"k_zmp must stay below omega*I (omega = {self.omega:.4g})")

    @staticmethod
    def diagonal(kp: float, ki: float, kzmp: float, kcom: float,
                 omega: float) -> "GainSet":
        I2 = np.eye(2)
        return GainSet(kp * I2, ki * I2, kzmp * I2, kcom * I2, omega)


@dataclass
class IntegralState:
    """Accumulated error with a componentwise anti-windup clamp."""

    value: np.ndarray
    bound: float = 0.05

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=float)
        if self.bound <= 0:
            raise ValueError("anti-windup bound must be > 0")

    @staticmethod
    def zero(dim: int = 2, bound: float = 0.05) -> "IntegralState":
        return IntegralState(np.zeros(dim), bound)

    def advanced(self, error: np.ndarray, dt: float) -> "IntegralState":
        new = np.clip(self.value + np.asarray(error, dtype=float) * dt,
                      -self.bound, self.bound)
        return IntegralState(new, self.bound)


@dataclass
class LipmState:
    """Ground-plane CoM state of the pendulum plant."""

    x: np.ndarray
    xdot: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(2)
        self.xdot = np.asarray(self.xdot, dtype=float).reshape(2)
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.xdot))):
            raise ValueError("plant state must be finite")


def dcm_controller(xi: np.ndarray, xi_ref: np.ndarray, xidot_ref: np.ndarray,
                   integral: IntegralState, gains: GainSet) -> np.ndarray:
    """Desired ground reference point from capture-point tracking error."""
    xi = np.asarray(xi, dtype=float)
    xi_ref = np.asarray(xi_ref, dtype=float)
    err = xi - xi_ref
    return (xi_ref - np.asarray(xidot_ref, dtype=float) / gains.omega
            + gains.kp_dcm @ err + gains.ki_dcm @ integral.value)


def zmp_com_controller(xdot_ref: np.ndarray, zmp_ref: np.ndarray,
                       zmp_meas: np.ndarray, x_ref: np.ndarray,
                       x_meas: np.ndarray, gains: GainSet) -> np.ndarray:
    """CoM velocity setpoint; the ground-point term enters with a minus sign."""
    return (np.asarray(xdot_ref, dtype=float)
            - gains.k_zmp @ (np.asarray(zmp_ref, dtype=float)
                             - np.asarray(zmp_meas, dtype=float))
            + gains.k_com @ (np.asarray(x_ref, dtype=float)
                             - np.asarray(x_meas, dtype=float)))


def lipm_step(state: LipmState, r_zmp: np.ndarray, omega: float,
              dt: float) -> LipmState:
    """Exact discretization of xddot = omega^2 (x - r) with r held over dt."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if omega <= 0:
        raise ValueError("omega must be > 0")
    r = np.asarray(r_zmp, dtype=float)
    ch, sh = math.cosh(omega * dt), math.sinh(omega * dt)
    d = state.x - r
    x_new = r + d * ch + state.xdot * (sh / omega)
    xdot_new = d * (omega * sh) + state.xdot * ch
    return LipmState(x_new, xdot_new)


def dcm_from_state(state: LipmState, omega: float) -> np.ndarray:
    """Capture point of the pendulum state."""
    if omega <= 0:
        raise ValueError("omega must be > 0")
    return state.x + state.xdot / omega


def com_reference_step(x_ref: np.ndarray, xi_ref: np.ndarray, omega: float,
                       dt: float) -> np.ndarray:
    """Advance the CoM reference toward the capture-point reference.

    The stable first-order mode xdot_ref = omega (xi_ref - x_ref), integrated
    exactly with xi_ref held over the tick.
    """
    xi_ref = np.asarray(xi_ref, dtype=float)
    decay = math.exp(-omega * dt)
    return xi_ref + (np.asarray(x_ref, dtype=float) - xi_ref) * decay
