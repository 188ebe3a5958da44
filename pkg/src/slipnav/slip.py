"""Wheel slip observables derived from the filter velocity and encoders.

Slip ratio compares the filter's forward velocity against the wheel
surface speed; slip angle is the direction of travel relative to the body
x axis. One sample is produced per odometry tick and accumulated into
fixed-duration learning windows. A window must be stop-free: any commanded
stop discards the partial window and collection restarts on resume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nav_core import VehicleParams, WheelOdomSample

__all__ = [
    "slip_ratio",
    "slip_angle",
    "SlipSample",
    "SlipWindow",
    "SlipCollector",
]


def slip_ratio(v_x: float, omega: float, r: float, deadband: float = 0.02) -> float:
    """Longitudinal slip ratio, clamped to [-1, 1].

    Driving (wheel faster than body): ``1 - v_x / (r*omega)``. Braking
    (body faster than wheel): ``r*omega / v_x - 1``. Speeds within
    ``deadband`` m/s of each other count as no slip; a stopped wheel with
    the body still moving is full skid (-1).
    """
    r_omega = r * omega
    # test the product: r*omega can underflow to 0 for denormal omega
    if r_omega == 0.0:
        return 0.0 if abs(v_x) <= deadband else -1.0
    if abs(v_x - r_omega) <= deadband:
        return 0.0
    if v_x < r_omega:
        s = 1.0 - v_x / r_omega
    elif abs(v_x) < 1e-12:
        s = -1.0
    else:
        s = r_omega / v_x - 1.0
    return float(min(1.0, max(-1.0, s)))


def slip_angle(v_y: float, v_x: float) -> float:
    """Sideslip angle beta = atan2(v_y, v_x), rad. Zero when stationary."""
    return float(np.arctan2(v_y, v_x))


@dataclass(frozen=True)
class SlipSample:
    t: float
    s: float
    beta: float


@dataclass(frozen=True)
class SlipWindow:
    """A completed, stop-free learning window of slip observations.

    ``t``/``s``/``beta`` are parallel arrays with strictly increasing time
    tags in [t0, t1]; ``mean_speed`` is the mean filter forward speed over
    the window.
    """

    t0: float
    t1: float
    t: np.ndarray
    s: np.ndarray
    beta: np.ndarray
    mean_speed: float

    def __post_init__(self):
        if len(self.t) == 0:
            raise ValueError("empty slip window")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("slip window time tags must be strictly increasing")

    def __len__(self):
        return len(self.t)


class SlipCollector:
    """Accumulates per-tick slip samples into fixed-duration windows.

    Feed one ``(t, v_body, odo)`` tuple per odometry tick while driving;
    ``add`` returns a ``SlipWindow`` when the configured duration has
    elapsed, and starts the next window. Call ``reset`` whenever the
    vehicle stops so no window spans a stop.
    """

    def __init__(self, duration: float, params: VehicleParams):
        if duration <= 0:
            raise ValueError("duration must be positive")
        self.duration = duration
        self.params = params
        self._t: list[float] = []
        self._s: list[float] = []
        self._beta: list[float] = []
        self._speed: list[float] = []

    def __len__(self):
        return len(self._t)

    def reset(self) -> None:
        self._t.clear()
        self._s.clear()
        self._beta.clear()
        self._speed.clear()

    def add(self, t: float, v_body: np.ndarray, odo: WheelOdomSample) -> SlipWindow | None:
        if self._t and t <= self._t[-1]:
            raise ValueError("time tags must be strictly increasing")
        r = self.params.wheel_radius
        v_x = float(v_body[0])
        # one slip value per axle, averaged into a single sample
        s_front = slip_ratio(v_x, float(np.mean(odo.rates[0:2])), r)
        s_rear = slip_ratio(v_x, float(np.mean(odo.rates[2:4])), r)
        self._t.append(t)
        self._s.append(0.5 * (s_front + s_rear))
        self._beta.append(slip_angle(float(v_body[1]), v_x))
        self._speed.append(v_x)
        if self._t[-1] - self._t[0] >= self.duration - 1e-9:
            window = SlipWindow(
                t0=self._t[0],
                t1=self._t[-1],
                t=np.array(self._t),
                s=np.array(self._s),
                beta=np.array(self._beta),
                mean_speed=float(np.mean(self._speed)),
            )
            self.reset()
            return window
        return None
