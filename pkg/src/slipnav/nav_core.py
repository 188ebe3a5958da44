"""Strapdown mechanization and wheel kinematics in a local ENU nav frame.

The nav frame is a local-level East/North/Up tangent frame fixed at the
start of a run. Attitude is carried as the body-to-nav rotation matrix
``C_b_n``; velocity and position are nav-frame vectors. Earth rotation is
negligible at rover speeds and short ranges, so it is off by default.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ImuSample",
    "WheelOdomSample",
    "NavState",
    "VehicleParams",
    "skew",
    "rotation_from_rotvec",
    "orthonormalize",
    "propagate_strapdown",
    "wheel_speed",
]


def _as_vector(x, n, name):
    v = np.asarray(x, dtype=float)
    if v.shape != (n,):
        raise ValueError(f"{name} must be a {n}-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite values")
    return v


@dataclass(frozen=True)
class ImuSample:
    """One IMU sample: angular rate and specific force in the body frame.

    Parameters
    ----------
    t : float
        Sample time, s.
    gyro : array_like, shape (3,)
        Angular rate ``omega_ib_b``, rad/s.
    accel : array_like, shape (3,)
        Specific force ``f_ib_b``, m/s^2. A stationary, level unit reads
        approximately ``[0, 0, +g]``.
    """

    t: float
    gyro: np.ndarray
    accel: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gyro", _as_vector(self.gyro, 3, "gyro"))
        object.__setattr__(self, "accel", _as_vector(self.accel, 3, "accel"))
        if not np.isfinite(self.t):
            raise ValueError("t must be finite")


@dataclass(frozen=True)
class WheelOdomSample:
    """Wheel encoder rates, rad/s, ordered front-left, front-right,
    rear-left, rear-right."""

    t: float
    rates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rates", _as_vector(self.rates, 4, "rates"))
        if not np.isfinite(self.t):
            raise ValueError("t must be finite")


@dataclass(frozen=True)
class NavState:
    """Total navigation state: attitude, velocity, position.

    ``C_b_n`` rotates body-frame vectors into the nav frame. ``v_eb_n`` and
    ``p_eb_n`` are ENU velocity (m/s) and position (m).
    """

    C_b_n: np.ndarray
    v_eb_n: np.ndarray
    p_eb_n: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.C_b_n, dtype=float)
        if C.shape != (3, 3) or not np.all(np.isfinite(C)):
            raise ValueError("C_b_n must be a finite 3x3 matrix")
        object.__setattr__(self, "C_b_n", C)
        object.__setattr__(self, "v_eb_n", _as_vector(self.v_eb_n, 3, "v_eb_n"))
        object.__setattr__(self, "p_eb_n", _as_vector(self.p_eb_n, 3, "p_eb_n"))

    @staticmethod
    def identity() -> "NavState":
        return NavState(np.eye(3), np.zeros(3), np.zeros(3))


@dataclass(frozen=True)
class VehicleParams:
    """Geometry and environment constants for a four-wheel skid-steer rover.

    ``lever_arm`` points from the body origin to the rear-axle midpoint in
    body coordinates. ``earth_rate`` is the projected vertical component of
    earth rotation at the deployment site (the caller folds latitude into
    the scalar); it is ignored unless ``include_earth_rate`` is set.
    """

    wheel_radius: float = 0.1
    track_width: float = 0.6
    lever_arm: np.ndarray = field(default_factory=lambda: np.array([-0.3, 0.0, 0.0]))
    gravity_magnitude: float = 9.80665
    include_earth_rate: bool = False
    earth_rate: float = 7.292115e-5

    def __post_init__(self):
        object.__setattr__(self, "lever_arm", _as_vector(self.lever_arm, 3, "lever_arm"))
        if self.wheel_radius <= 0 or self.track_width <= 0:
            raise ValueError("wheel_radius and track_width must be positive")

    @property
    def gravity_n(self) -> np.ndarray:
        """Gravity vector in ENU, m/s^2 (points down)."""
        return np.array([0.0, 0.0, -self.gravity_magnitude])


def skew(v) -> np.ndarray:
    """Skew-symmetric matrix such that ``skew(a) @ b == np.cross(a, b)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotation_from_rotvec(theta) -> np.ndarray:
    """Rotation matrix for a rotation vector via the closed-form exponential.

    Uses series guards below 1e-8 rad so the zero-rotation case is exact.
    """
    theta = np.asarray(theta, dtype=float)
    angle = float(np.linalg.norm(theta))
    K = skew(theta)
    if angle < 1e-8:
        # second-order series; exact identity at angle 0
        return np.eye(3) + K + 0.5 * (K @ K)
    a = np.sin(angle) / angle
    b = (1.0 - np.cos(angle)) / (angle * angle)
    return np.eye(3) + a * K + b * (K @ K)


def orthonormalize(C: np.ndarray) -> np.ndarray:
    """One symmetric correction step toward the nearest rotation matrix.

    Adequate for the roundoff-level drift of per-step integration; an
    already orthonormal matrix passes through unchanged up to roundoff.
    """
    return C @ (1.5 * np.eye(3) - 0.5 * (C.T @ C))


def propagate_strapdown(state: NavState, imu: ImuSample, dt: float,
                        params: VehicleParams) -> NavState:
    """Advance the total state one IMU interval.

    Attitude integrates the body rate (minus earth rate if enabled) with a
    closed-form rotation increment plus re-orthonormalization; velocity
    integrates rotated specific force plus gravity with the trapezoidal
    attitude mean; position integrates velocity trapezoidally.

    Raises
    ------
    ValueError
        If ``dt`` is not positive or inputs are non-finite.
    """
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive and finite, got {dt}")
    omega = imu.gyro
    if params.include_earth_rate:
        omega = omega - state.C_b_n.T @ np.array([0.0, 0.0, params.earth_rate])
    C_new = orthonormalize(state.C_b_n @ rotation_from_rotvec(omega * dt))
    f_n = 0.5 * (state.C_b_n + C_new) @ imu.accel
    v_new = state.v_eb_n + (f_n + params.gravity_n) * dt
    p_new = state.p_eb_n + 0.5 * (state.v_eb_n + v_new) * dt
    return NavState(C_new, v_new, p_new)


def wheel_speed(odo: WheelOdomSample, params: VehicleParams) -> tuple[float, float]:
    """Skid-steer body speed and yaw rate from the four encoder rates.

    Returns
    -------
    v_odo : float
        Forward speed, m/s: wheel radius times the mean of all four rates.
    yaw_rate : float
        rad/s, positive counterclockwise (right side faster than left).
    """
    r = params.wheel_radius
    rates = odo.rates
    v_odo = r * float(np.mean(rates))
    mean_left = 0.5 * (rates[0] + rates[2])
    mean_right = 0.5 * (rates[1] + rates[3])
    yaw_rate = r * (mean_right - mean_left) / params.track_width
    return v_odo, yaw_rate
