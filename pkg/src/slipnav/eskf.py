"""15-state error-state Kalman filter for wheel-inertial dead reckoning.

Error-state block order is fixed: attitude (0:3), velocity (3:6),
position (6:9), accel bias (9:12), gyro bias (12:15). The error is defined
as estimate minus truth; estimated corrections are therefore subtracted on
injection. Live measurement updates use the Joseph-stabilized covariance
form; every update is gated by a chi-square test on the innovation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .nav_core import (
    ImuSample,
    NavState,
    VehicleParams,
    WheelOdomSample,
    orthonormalize,
    propagate_strapdown,
    skew,
    wheel_speed,
)

__all__ = [
    "ATT", "VEL", "POS", "BA", "BG",
    "FilterConfig",
    "build_F",
    "build_Q",
    "initial_covariance",
    "build_H_odo",
    "kalman_update",
    "Eskf",
]

log = logging.getLogger(__name__)

ATT = slice(0, 3)
VEL = slice(3, 6)
POS = slice(6, 9)
BA = slice(9, 12)
BG = slice(12, 15)

N_STATES = 15

# odometry observation rows: forward speed, the two zero-lateral/vertical
# constraint rows, yaw rate
ODO_ROWS_ALL = (0, 1, 2, 3)
ODO_ROWS_NO_CONSTRAINTS = (0, 3)


@dataclass(frozen=True)
class FilterConfig:
    """Noise densities, measurement variances, and gates.

    Densities are one-sided amplitude spectral densities: gyro/accel noise
    in (rad/s)/sqrt(Hz) and (m/s^2)/sqrt(Hz); bias random walks in
    (m/s^2)/sqrt(s) and (rad/s)/sqrt(s). Measurement entries are variances.
    """

    gyro_noise_density: float = 3.0e-5
    accel_noise_density: float = 1.25e-4
    accel_bias_rw_density: float = 1.0e-5
    gyro_bias_rw_density: float = 1.0e-7

    # R_odo is deliberately much larger than raw encoder noise: the encoder
    # speed carries the slip bias, and a weak gain keeps the pull
    # time-constant long so scheduled stops can reset the transient.
    R_odo: float = 0.36          # forward wheel speed, (m/s)^2
    R_nhc: float = 2.5e-3          # lateral/vertical zero-velocity rows, (m/s)^2
    R_zupt_v: float = 1.0e-4       # stationary velocity rows, (m/s)^2
    R_zupt_g: float = 5.0e-8       # stationary rate rows, (rad/s)^2
    # differential wheel-speed yaw rate: ~sqrt(2)*r*enc_noise/track
    R_odo_yaw: float = 2.5e-5      # yaw-rate row, (rad/s)^2

    beta_max: float = 0.15         # sideslip gate, rad
    chi2_gate_prob: float = 0.999
    odo_max_age: float = 0.15      # s; staler odometry is skipped

    # roll/pitch self-align from the accelerometers during the startup
    # hold; heading comes from the mission plan, so its prior is far tighter
    # than a coarse-leveling tilt prior
    init_tilt_std: float = np.deg2rad(1.0)
    init_yaw_std: float = np.deg2rad(0.15)
    init_vel_std: float = 0.1
    init_pos_std: float = 0.01
    init_ba_std: float = 0.05
    init_bg_std: float = 1.0e-4

    debug_checks: bool = False


def initial_covariance(cfg: FilterConfig) -> np.ndarray:
    d = np.empty(N_STATES)
    d[ATT] = cfg.init_tilt_std ** 2
    d[ATT.stop - 1] = cfg.init_yaw_std ** 2
    d[VEL] = cfg.init_vel_std ** 2
    d[POS] = cfg.init_pos_std ** 2
    d[BA] = cfg.init_ba_std ** 2
    d[BG] = cfg.init_bg_std ** 2
    return np.diag(d)


def build_F(C_b_n: np.ndarray, f_n: np.ndarray, dt: float) -> np.ndarray:
    """Discrete error-state transition matrix (first order in dt).

    Couplings: attitude error is driven by gyro bias through -C_b_n,
    velocity error by attitude error through -skew(f_n) and by accel bias
    through -C_b_n, position error by velocity error.
    """
    F = np.eye(N_STATES)
    F[ATT, BG] = -C_b_n * dt
    F[VEL, ATT] = -skew(f_n) * dt
    F[VEL, BA] = -C_b_n * dt
    F[POS, VEL] = np.eye(3) * dt
    return F


def build_Q(cfg: FilterConfig, dt: float) -> np.ndarray:
    """Discrete process noise: white IMU noise on attitude/velocity, random
    walks on the biases, none directly on position."""
    q = np.zeros(N_STATES)
    q[ATT] = cfg.gyro_noise_density ** 2 * dt
    q[VEL] = cfg.accel_noise_density ** 2 * dt
    q[BA] = cfg.accel_bias_rw_density ** 2 * dt
    q[BG] = cfg.gyro_bias_rw_density ** 2 * dt
    return np.diag(q)


def build_H_odo(C_b_n: np.ndarray, v_n: np.ndarray,
                lever_arm: np.ndarray | None = None) -> np.ndarray:
    """4x15 observation matrix for the wheel-odometry update: body-frame
    velocity at the rear axle (3 rows) plus yaw rate (1 row, observing the
    z gyro bias). The attitude column makes tilt and heading observable
    through the velocity rows; without it the filter never closes its
    attitude uncertainty and keeps over-weighting the encoders."""
    C_n_b = C_b_n.T
    H = np.zeros((4, N_STATES))
    H[0:3, ATT] = -C_n_b @ skew(v_n)
    H[0:3, VEL] = -C_n_b
    if lever_arm is not None:
        H[0:3, BG] = -skew(lever_arm)
    H[3, 14] = 1.0
    return H


_CHI2_CACHE: dict[tuple[int, float], float] = {}


def _chi2_threshold(dof: int, prob: float) -> float:
    key = (dof, prob)
    if key not in _CHI2_CACHE:
        _CHI2_CACHE[key] = float(chi2.ppf(prob, dof))
    return _CHI2_CACHE[key]


def kalman_update(P: np.ndarray, H: np.ndarray, R: np.ndarray,
                  nu: np.ndarray, gate: float | None = None):
    """One gated Joseph-form update.

    Returns ``(delta, P_new, accepted, nis)``. On gate rejection the inputs
    are returned unchanged with ``accepted=False``.
    """
    S = H @ P @ H.T + R
    Sinv_nu = np.linalg.solve(S, nu)
    nis = float(nu @ Sinv_nu)
    if gate is not None and nis > gate:
        return np.zeros(P.shape[0]), P, False, nis
    K = np.linalg.solve(S, H @ P).T
    delta = K @ nu
    I_KH = np.eye(P.shape[0]) - K @ H
    P_new = I_KH @ P @ I_KH.T + K @ R @ K.T
    P_new = 0.5 * (P_new + P_new.T)
    return delta, P_new, True, nis


class Eskf:
    """Strapdown INS with error-state updates from wheel odometry, motion
    constraints, and zero-velocity intervals.

    The class owns the total state (NavState plus IMU biases) and the error
    covariance. ``last_F``/``last_Q`` snapshot the most recent propagation
    model so a covariance forecaster can freeze it.
    """

    def __init__(self, config: FilterConfig, params: VehicleParams,
                 state: NavState | None = None):
        self.config = config
        self.params = params
        self.state = state if state is not None else NavState.identity()
        self.ba = np.zeros(3)
        self.bg = np.zeros(3)
        self.P = initial_covariance(config)
        self.last_F = np.eye(N_STATES)
        self.last_Q = build_Q(config, 0.02)
        self.rejected_updates = 0
        self.psd_violations = 0

    # -- propagation ----------------------------------------------------

    def predict(self, imu: ImuSample, dt: float) -> None:
        corrected = ImuSample(imu.t, imu.gyro - self.bg, imu.accel - self.ba)
        new_state = propagate_strapdown(self.state, corrected, dt, self.params)
        f_n = 0.5 * (self.state.C_b_n + new_state.C_b_n) @ corrected.accel
        F = build_F(self.state.C_b_n, f_n, dt)
        Q = build_Q(self.config, dt)
        self.P = F @ self.P @ F.T + Q
        self.state = new_state
        self.last_F = F
        self.last_Q = Q
        self._finalize_P()

    # -- measurement updates --------------------------------------------

    def update_zupt(self, imu: ImuSample) -> bool:
        """Zero-velocity update: velocity is zero and the gyro should read
        pure bias. Innovation is [-v_hat, -omega_hat]."""
        cfg = self.config
        omega_hat = imu.gyro - self.bg
        nu = np.concatenate([-self.state.v_eb_n, -omega_hat])
        H = np.zeros((6, N_STATES))
        H[0:3, VEL] = -np.eye(3)
        H[3:6, BG] = np.eye(3)
        R = np.diag([cfg.R_zupt_v] * 3 + [cfg.R_zupt_g] * 3)
        return self._apply(H, R, nu)

    def update_nhc(self, imu: ImuSample) -> bool:
        """Lateral/vertical zero-velocity constraint at the rear axle.

        When the estimated sideslip exceeds ``beta_max`` the lateral row is
        dropped and only the vertical row is applied.
        """
        cfg = self.config
        C_n_b = self.state.C_b_n.T
        omega_hat = imu.gyro - self.bg
        L = self.params.lever_arm
        v_axle_b = C_n_b @ self.state.v_eb_n + np.cross(omega_hat, L)
        rows = [1, 2]
        if abs(self.sideslip_angle()) >= cfg.beta_max:
            rows = [2]
        sel = np.eye(3)[rows]
        nu = -(sel @ v_axle_b)
        H = np.zeros((len(rows), N_STATES))
        H[:, ATT] = -(sel @ C_n_b @ skew(self.state.v_eb_n))
        H[:, VEL] = -(sel @ C_n_b)
        H[:, BG] = -(sel @ skew(L))
        R = np.eye(len(rows)) * cfg.R_nhc
        return self._apply(H, R, nu)

    def update_wheel_odometry(self, odo: WheelOdomSample, imu: ImuSample,
                              rows: tuple[int, ...] = ODO_ROWS_ALL) -> bool:
        """Four-dimensional odometry update: forward speed, the two
        zero-constraint rows, and yaw rate. ``rows`` selects a subset (the
        constraint rows are dropped when running without them, the lateral
        row when the sideslip gate trips)."""
        cfg = self.config
        v_odo, yaw_odo = wheel_speed(odo, self.params)
        C_n_b = self.state.C_b_n.T
        omega_hat = imu.gyro - self.bg
        z = np.array([v_odo, 0.0, 0.0, yaw_odo])
        z_hat = np.empty(4)
        z_hat[0:3] = C_n_b @ self.state.v_eb_n + np.cross(omega_hat, self.params.lever_arm)
        z_hat[3] = omega_hat[2]
        H = build_H_odo(self.state.C_b_n, self.state.v_eb_n, self.params.lever_arm)
        R = np.diag([cfg.R_odo, cfg.R_nhc, cfg.R_nhc, cfg.R_odo_yaw])
        idx = list(rows)
        nu = (z - z_hat)[idx]
        return self._apply(H[idx], R[np.ix_(idx, idx)], nu)

    # -- internals -------------------------------------------------------

    def _apply(self, H, R, nu) -> bool:
        gate = _chi2_threshold(len(nu), self.config.chi2_gate_prob)
        delta, P_new, accepted, _ = kalman_update(self.P, H, R, nu, gate)
        if not accepted:
            self.rejected_updates += 1
            return False
        self.P = P_new
        self._inject(delta)
        self._finalize_P()
        return True

    def _inject(self, delta: np.ndarray) -> None:
        # error is estimate-minus-truth: subtract the estimated corrections
        C = orthonormalize((np.eye(3) - skew(delta[ATT])) @ self.state.C_b_n)
        self.state = NavState(
            C,
            self.state.v_eb_n - delta[VEL],
            self.state.p_eb_n - delta[POS],
        )
        self.ba = self.ba - delta[BA]
        self.bg = self.bg - delta[BG]

    def _finalize_P(self) -> None:
        P = 0.5 * (self.P + self.P.T)
        if self.config.debug_checks:
            try:
                np.linalg.cholesky(P + 1e-9 * np.eye(N_STATES))
            except np.linalg.LinAlgError:
                self.psd_violations += 1
                w = np.linalg.eigvalsh(P)[0]
                P = P + (abs(w) + 1e-12) * np.eye(N_STATES)
                log.warning("covariance repaired; min eigenvalue %.3e", w)
        self.P = P

    # -- views ------------------------------------------------------------

    def sideslip_angle(self) -> float:
        v_b = self.state.C_b_n.T @ self.state.v_eb_n
        return float(np.arctan2(v_b[1], v_b[0]))

    def sigma_horizontal(self) -> float:
        return float(np.sqrt(self.P[6, 6] + self.P[7, 7]))

    def build_odo_H(self) -> np.ndarray:
        return build_H_odo(self.state.C_b_n, self.state.v_eb_n,
                           self.params.lever_arm)
