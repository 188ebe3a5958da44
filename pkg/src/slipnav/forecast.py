"""Covariance forecasting for stop scheduling.

Given the filter's frozen propagation model and a GP forecast of slip, the
forecaster runs the Riccati recursion forward over a fixed horizon,
replacing the live odometry noise with a slip-dependent value: predicted
slip mean/spread are pushed through three sigma points of the velocity
mapping v/(1 - s), and the resulting variance fills the velocity rows of
the simulated measurement noise. The horizontal position sigma curve is
then searched for the first threshold crossing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "DENOM_FLOOR",
    "SigmaTransform",
    "sigma_velocity_transform",
    "build_R_gp",
    "ForecastRequest",
    "ForecastResult",
    "forecast_covariance",
    "find_stop_time",
]

# denominators of v/(1-s) are clamped here; below this the transform
# saturates and the result is flagged
DENOM_FLOOR = 0.05


class SigmaTransform(NamedTuple):
    chi_est: float
    var_chi: float
    saturated: bool


def sigma_velocity_transform(mu_vel: float, mu_s: float, sigma_s: float) -> SigmaTransform:
    """Three-sigma-point transform of speed through the slip relation.

    chi_i = mu_vel / (1 - mu_s -+ offsets) with offsets (0, +sigma_s,
    -sigma_s); returns their mean and the 1/3-weighted spread. Denominators
    clamp at DENOM_FLOOR, setting the saturated flag.
    """
    if sigma_s < 0:
        raise ValueError("sigma_s must be non-negative")
    denoms = np.array([
        1.0 - mu_s,
        1.0 - mu_s - sigma_s,
        1.0 - mu_s + sigma_s,
    ])
    saturated = bool(np.any(denoms < DENOM_FLOOR))
    chi = mu_vel / np.maximum(denoms, DENOM_FLOOR)
    chi_est = float(np.mean(chi))
    var_chi = float(np.mean((chi - chi_est) ** 2))
    return SigmaTransform(chi_est, var_chi, saturated)


def build_R_gp(var_chi: float, yaw_var: float = 1.0) -> np.ndarray:
    """4x4 forecast measurement noise: slip-inflated variance on the three
    velocity rows, fixed yaw-rate variance (default the literal 1)."""
    return np.diag([var_chi, var_chi, var_chi, yaw_var])


@dataclass(frozen=True)
class ForecastRequest:
    """Frozen filter snapshot plus GP slip forecast.

    ``gp_mu``/``gp_var`` give predicted slip mean/variance at the simulated
    odometry cadence: entry j applies to the update at
    ``t0 + (j+1) * odo_every / imu_rate``. The propagation model (F, Q, H)
    is held constant over the horizon.
    """

    P0: np.ndarray
    F: np.ndarray
    Q: np.ndarray
    H: np.ndarray
    mu_vel: float
    gp_mu: np.ndarray
    gp_var: np.ndarray
    t0: float = 0.0
    horizon: float = 60.0
    imu_rate: float = 50.0
    odo_every: int = 5
    epsilon: float = 3.0
    sigma_multiplier: float = 1.0
    yaw_var: float = 1.0


@dataclass(frozen=True)
class ForecastResult:
    """sigma_h(t) over the horizon plus the first scheduled crossing.

    ``t`` runs from t0 (inclusive) at the IMU step; ``stop_time`` is the
    absolute time of the first crossing of epsilon by
    sigma_multiplier * sigma_h, None if the curve never crosses.
    """

    t: np.ndarray
    sigma_h: np.ndarray
    stop_time: float | None
    saturated: bool
    step_count: int
    update_count: int
    epsilon: float = 3.0
    meta: dict = field(default_factory=dict)


def forecast_covariance(req: ForecastRequest) -> ForecastResult:
    """Propagate the error covariance over the horizon with simulated
    odometry updates at every ``odo_every``-th IMU step.

    Propagation uses the frozen F and Q; updates use the plain
    (I - K H) P form with symmetrization (the Joseph form is reserved for
    the live filter). sigma_h(t) = sqrt(P_EE + P_NN).
    """
    dt = 1.0 / req.imu_rate
    n_steps = int(round(req.horizon * req.imu_rate))
    n_updates_expected = n_steps // req.odo_every
    if len(req.gp_mu) < n_updates_expected or len(req.gp_var) < n_updates_expected:
        raise ValueError(
            f"GP forecast too short: need {n_updates_expected} points, "
            f"got {len(req.gp_mu)}")

    n = req.P0.shape[0]
    P = 0.5 * (req.P0 + req.P0.T)
    F, Q, H = req.F, req.Q, req.H
    I = np.eye(n)
    t = req.t0 + dt * np.arange(n_steps + 1)
    sigma_h = np.empty(n_steps + 1)
    sigma_h[0] = np.sqrt(P[6, 6] + P[7, 7])
    saturated = False
    updates = 0

    for k in range(1, n_steps + 1):
        P = F @ P @ F.T + Q
        if k % req.odo_every == 0:
            j = k // req.odo_every - 1
            tr = sigma_velocity_transform(
                req.mu_vel, float(req.gp_mu[j]), float(np.sqrt(req.gp_var[j])))
            saturated = saturated or tr.saturated
            R = build_R_gp(tr.var_chi, req.yaw_var)
            S = H @ P @ H.T + R
            K = np.linalg.solve(S, H @ P).T
            P = (I - K @ H) @ P
            P = 0.5 * (P + P.T)
            updates += 1
        sigma_h[k] = np.sqrt(max(P[6, 6] + P[7, 7], 0.0))

    stop = find_stop_time(t, sigma_h, req.epsilon, req.t0,
                          sigma_multiplier=req.sigma_multiplier)
    stop_abs = None if stop is None else req.t0 + stop
    return ForecastResult(
        t=t, sigma_h=sigma_h, stop_time=stop_abs, saturated=saturated,
        step_count=n_steps, update_count=updates, epsilon=req.epsilon,
        meta={"mu_vel": req.mu_vel},
    )


def find_stop_time(t: np.ndarray, sigma_h: np.ndarray, epsilon: float,
                   now: float, sigma_multiplier: float = 1.0) -> float | None:
    """Countdown (s from ``now``) until sigma_multiplier * sigma_h first
    exceeds epsilon; 0 if already above; None if it never crosses."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    above = np.nonzero(sigma_multiplier * np.asarray(sigma_h) > epsilon)[0]
    if above.size == 0:
        return None
    return max(float(t[above[0]] - now), 0.0)
