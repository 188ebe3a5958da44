"""Stop scheduling: when to halt for a zero-velocity update.

The scheduler runs a five-mode state machine. While driving it collects a
stop-free slip window (COLLECTING, or DRIVING_FREE after a no-crossing
forecast); a completed window dispatches one forecast (AWAITING_FORECAST);
a predicted threshold crossing arms a committed COUNTDOWN; reaching the
stop time holds the vehicle in STOPPED_ZUPT for a fixed dwell, then
collection restarts. Forecast failures degrade to periodic stopping.
Window collection is suspended during a countdown so windows never span a
scheduled stop and every completed window produces exactly one dispatch.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .nav_core import ImuSample

__all__ = [
    "Mode",
    "AutonomyConfig",
    "zupt_stationarity_check",
    "StopScheduler",
    "PeriodicScheduler",
    "NeverStopScheduler",
]

log = logging.getLogger(__name__)


class Mode(enum.Enum):
    COLLECTING = "collecting"
    AWAITING_FORECAST = "awaiting_forecast"
    DRIVING_FREE = "driving_free"
    COUNTDOWN = "countdown"
    STOPPED_ZUPT = "stopped_zupt"


@dataclass(frozen=True)
class AutonomyConfig:
    window_duration: float = 15.0   # s of slip data per forecast
    horizon: float = 60.0           # s of covariance forecast
    epsilon: float = 3.0            # m horizontal 1-sigma threshold
    zupt_duration: float = 5.0      # s dwell per stop
    min_stop_interval: float = 15.0  # s between stop starts
    forward_speed_cmd: float = 0.8  # m/s commanded forward speed
    sigma_multiplier: float = 1.0
    # calibration hold before first motion; lets ZUPTs pin velocity and the
    # gyro biases before heading error can couple into position
    initial_stop_s: float = 10.0

    def __post_init__(self):
        for name in ("window_duration", "horizon", "epsilon", "zupt_duration",
                     "min_stop_interval", "forward_speed_cmd"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.horizon < self.window_duration:
            raise ValueError("horizon must cover at least one window")
        if self.initial_stop_s < 0:
            raise ValueError("initial_stop_s must be >= 0")


def zupt_stationarity_check(samples: Sequence[ImuSample],
                            accel_var_max: float = 0.02,
                            gyro_var_max: float = 1.0e-5,
                            min_duration: float = 0.5,
                            min_samples: int = 10) -> bool:
    """True when the IMU buffer looks stationary.

    Requires at least ``min_duration`` seconds and ``min_samples`` samples;
    every accel axis variance must stay below ``accel_var_max`` (m/s^2)^2
    and every gyro axis below ``gyro_var_max`` (rad/s)^2.
    """
    if len(samples) < min_samples:
        return False
    if samples[-1].t - samples[0].t < min_duration - 1e-9:
        return False
    accel = np.array([s.accel for s in samples])
    gyro = np.array([s.gyro for s in samples])
    return bool(np.all(np.var(accel, axis=0) < accel_var_max)
                and np.all(np.var(gyro, axis=0) < gyro_var_max))


class StopScheduler:
    """Forecast-driven scheduler. Drive the instance with:

    - ``step(t)`` every control tick; returns the commanded speed.
    - ``window_complete(t)`` when a slip window fills; True means the
      caller should run a forecast and report back.
    - ``forecast_ready(t, stop_time)`` / ``forecast_failed(t)``.
    """

    def __init__(self, cfg: AutonomyConfig, t_start: float = 0.0):
        self.cfg = cfg
        self.t_stop = np.inf
        self.last_stop_start = -np.inf
        self.stop_count = 0
        self.fallback_active = False
        self._t = t_start
        if cfg.initial_stop_s > 0:
            # calibration hold, not a scheduled stop: not counted
            self.mode = Mode.STOPPED_ZUPT
            self.t_resume = t_start + cfg.initial_stop_s
            self.last_stop_start = t_start
        else:
            self.mode = Mode.COLLECTING
            self.t_resume = np.inf

    @property
    def collecting(self) -> bool:
        return self.mode in (Mode.COLLECTING, Mode.DRIVING_FREE)

    @property
    def stopped(self) -> bool:
        return self.mode == Mode.STOPPED_ZUPT

    def step(self, t: float) -> float:
        """Advance to time ``t`` and return the commanded forward speed."""
        self._t = t
        if self.mode == Mode.COUNTDOWN and t >= self.t_stop:
            self._begin_stop(t)
        if self.mode == Mode.STOPPED_ZUPT:
            if t >= self.t_resume:
                self.mode = Mode.COLLECTING
                return self.cfg.forward_speed_cmd
            return 0.0
        return self.cfg.forward_speed_cmd

    def window_complete(self, t: float) -> bool:
        if self.mode not in (Mode.COLLECTING, Mode.DRIVING_FREE):
            # windows are not collected in other modes; ignore defensively
            return False
        self.mode = Mode.AWAITING_FORECAST
        return True

    def forecast_ready(self, t: float, stop_time: float | None) -> None:
        """Consume a forecast. ``stop_time`` is the absolute predicted
        threshold-crossing time (None: no crossing inside the horizon)."""
        if self.mode != Mode.AWAITING_FORECAST:
            return
        self.fallback_active = False
        if stop_time is None:
            self.mode = Mode.DRIVING_FREE
            return
        earliest = self.last_stop_start + self.cfg.min_stop_interval
        self.t_stop = max(stop_time, earliest, t)
        self.mode = Mode.COUNTDOWN

    def forecast_failed(self, t: float) -> None:
        """Degrade to the predecessor policy: a stop one window after the
        last stop. That instant has normally already passed when the failure
        surfaces, so the rover stops now and, while failures persist, the
        collect/fail cycle repeats at the window period. A later healthy
        forecast clears the flag."""
        if self.mode != Mode.AWAITING_FORECAST:
            return
        log.warning("forecast failed at t=%.2f; falling back to periodic stop", t)
        self.fallback_active = True
        earliest = self.last_stop_start + self.cfg.min_stop_interval
        self.t_stop = max(self.last_stop_start + self.cfg.window_duration,
                          earliest, t)
        self.mode = Mode.COUNTDOWN

    def _begin_stop(self, t: float) -> None:
        self.mode = Mode.STOPPED_ZUPT
        self.t_resume = t + self.cfg.zupt_duration
        self.last_stop_start = t
        self.t_stop = np.inf
        self.stop_count += 1


class PeriodicScheduler:
    """Fixed-interval stopping with the same driving interface."""

    def __init__(self, cfg: AutonomyConfig, interval: float, t_start: float = 0.0):
        if interval <= 0:
            raise ValueError("interval must be positive")
        self.cfg = cfg
        self.interval = interval
        self.stop_count = 0
        if cfg.initial_stop_s > 0:
            self.mode = Mode.STOPPED_ZUPT
            self.t_resume = t_start + cfg.initial_stop_s
            self.t_next_stop = np.inf
        else:
            self.mode = Mode.DRIVING_FREE
            self.t_next_stop = t_start + interval
            self.t_resume = np.inf

    collecting = False

    @property
    def stopped(self) -> bool:
        return self.mode == Mode.STOPPED_ZUPT

    def step(self, t: float) -> float:
        if self.mode == Mode.STOPPED_ZUPT:
            if t >= self.t_resume:
                self.mode = Mode.DRIVING_FREE
                self.t_next_stop = t + self.interval
                return self.cfg.forward_speed_cmd
            return 0.0
        if t >= self.t_next_stop:
            self.mode = Mode.STOPPED_ZUPT
            self.t_resume = t + self.cfg.zupt_duration
            self.stop_count += 1
            return 0.0
        return self.cfg.forward_speed_cmd

    def window_complete(self, t: float) -> bool:
        return False

    def forecast_ready(self, t, stop_time) -> None:
        pass

    def forecast_failed(self, t) -> None:
        pass


class NeverStopScheduler:
    """Blind driving: no scheduled stops, no forecasts. The initial
    calibration hold is kept so trajectories stay comparable across modes."""

    def __init__(self, cfg: AutonomyConfig):
        self.cfg = cfg
        self.stop_count = 0
        if cfg.initial_stop_s > 0:
            self.mode = Mode.STOPPED_ZUPT
            self.t_resume = cfg.initial_stop_s
        else:
            self.mode = Mode.DRIVING_FREE
            self.t_resume = -np.inf

    collecting = False

    @property
    def stopped(self) -> bool:
        return self.mode == Mode.STOPPED_ZUPT

    def step(self, t: float) -> float:
        if self.mode == Mode.STOPPED_ZUPT:
            if t >= self.t_resume:
                self.mode = Mode.DRIVING_FREE
                return self.cfg.forward_speed_cmd
            return 0.0
        return self.cfg.forward_speed_cmd

    def window_complete(self, t: float) -> bool:
        return False

    def forecast_ready(self, t, stop_time) -> None:
        pass

    def forecast_failed(self, t) -> None:
        pass
