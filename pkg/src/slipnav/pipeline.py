"""End-to-end runs: the filter, the slip learner, and the stop scheduler
wired together, either closed-loop against the simulator or open-loop over
a recorded log.

Replaying a log written by ``simulate`` with the same configuration feeds
the filter a bit-identical input stream, so the output trace is
bit-identical too; scheduler commands are recorded but motion follows the
log.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import gp
from .autonomy import (
    AutonomyConfig,
    NeverStopScheduler,
    PeriodicScheduler,
    StopScheduler,
    zupt_stationarity_check,
)
from .eskf import Eskf, FilterConfig, ODO_ROWS_ALL, ODO_ROWS_NO_CONSTRAINTS
from .forecast import ForecastRequest, forecast_covariance
from .nav_core import ImuSample, VehicleParams, WheelOdomSample
from .runlog import RunLog
from .sim import IMU_RATE, ODO_EVERY, RoverSim, SensorErrorModel, run_meta

__all__ = ["PipelineConfig", "Pipeline", "SimulateResult", "simulate", "replay"]

log = logging.getLogger(__name__)

MODES = ("autonomous", "periodic", "none")


@dataclass
class PipelineConfig:
    filter: FilterConfig = field(default_factory=FilterConfig)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    autonomy: AutonomyConfig = field(default_factory=AutonomyConfig)
    mode: str = "autonomous"            # autonomous | periodic | none
    periodic_interval: float = 15.0
    use_zupt: bool = True
    use_nhc: bool = True
    errors: SensorErrorModel = field(default_factory=SensorErrorModel)
    gp_init: gp.KernelParams = field(default_factory=lambda: gp.DEFAULT_PARAMS)
    # replay-only: apply ZUPT on any stationary stretch, independent of the
    # scheduler (for logs recorded without this pipeline's scheduler)
    zupt_on_stationary: bool = False
    # retain ForecastResult objects (memory-heavy; off for long batches)
    keep_forecasts: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "none":
            # blind wheel-inertial odometry: no stops, no constraint rows
            self.use_zupt = False
            self.use_nhc = False


class Pipeline:
    """Stateful runner: call ``process(imu, odo, dt)`` once per IMU sample;
    the return value is the commanded forward speed for the vehicle."""

    def __init__(self, cfg: PipelineConfig):
        from .slip import SlipCollector

        self.cfg = cfg
        self.eskf = Eskf(cfg.filter, cfg.vehicle)
        if cfg.mode == "autonomous":
            self.scheduler = StopScheduler(cfg.autonomy)
        elif cfg.mode == "periodic":
            self.scheduler = PeriodicScheduler(cfg.autonomy, cfg.periodic_interval)
        else:
            self.scheduler = NeverStopScheduler(cfg.autonomy)
        self.collector = SlipCollector(cfg.autonomy.window_duration, cfg.vehicle)
        self._imu_buffer: deque[ImuSample] = deque(maxlen=int(0.5 * IMU_RATE) + 1)
        self.trace_rows: list[list[float]] = []
        self.decision_rows: list[tuple] = []
        self.forecast_count = 0
        self.forecast_results = []           # kept only when cfg.keep_forecasts
        self.zupt_applied_outside_stop = 0   # structural check; stays 0

    # -- per-sample processing --------------------------------------------

    def process(self, imu: ImuSample, odo: WheelOdomSample | None, dt: float) -> float:
        cfg = self.cfg
        self.eskf.predict(imu, dt)
        self._imu_buffer.append(imu)
        cmd = self.scheduler.step(imu.t)

        if cfg.use_zupt and self._zupt_allowed():
            if zupt_stationarity_check(self._imu_buffer):
                if not (self.scheduler.stopped or cfg.zupt_on_stationary):
                    self.zupt_applied_outside_stop += 1
                self.eskf.update_zupt(imu)

        if odo is not None and not self.scheduler.stopped:
            self._process_odo(imu, odo)

        st = self.eskf.state
        self.trace_rows.append(
            [imu.t, *st.p_eb_n, *st.v_eb_n, self.eskf.sigma_horizontal()])
        return cmd

    def _zupt_allowed(self) -> bool:
        return self.scheduler.stopped or self.cfg.zupt_on_stationary

    def _process_odo(self, imu: ImuSample, odo: WheelOdomSample) -> None:
        cfg = self.cfg
        if imu.t - odo.t > cfg.filter.odo_max_age:
            log.warning("stale odometry at t=%.3f (age %.3f); constraint-only update",
                        imu.t, imu.t - odo.t)
            if cfg.use_nhc:
                self.eskf.update_nhc(imu)
            return
        if cfg.use_nhc:
            rows = ODO_ROWS_ALL
            if abs(self.eskf.sideslip_angle()) >= cfg.filter.beta_max:
                rows = (0, 2, 3)   # sideslip gate drops the lateral row
        else:
            rows = ODO_ROWS_NO_CONSTRAINTS
        self.eskf.update_wheel_odometry(odo, imu, rows)

        if self.scheduler.collecting and not self.scheduler.stopped:
            v_body = self.eskf.state.C_b_n.T @ self.eskf.state.v_eb_n
            window = self.collector.add(imu.t, v_body, odo)
            if window is not None and self.scheduler.window_complete(imu.t):
                self._dispatch_forecast(imu.t, window)
        elif len(self.collector):
            self.collector.reset()

    # -- forecasting -------------------------------------------------------

    def _dispatch_forecast(self, t_now: float, window) -> None:
        cfg = self.cfg
        self.forecast_count += 1
        try:
            t_rel = window.t - window.t0
            hp = gp.optimize_hyperparams(t_rel, window.s, cfg.gp_init)
            model = gp.fit(t_rel, window.s, hp)
            n_upd = int(round(cfg.autonomy.horizon * IMU_RATE)) // ODO_EVERY
            dt_odo = ODO_EVERY / IMU_RATE
            t_star = (window.t1 - window.t0) + dt_odo * np.arange(1, n_upd + 1)
            pred = gp.predict(model, t_star)
            req = ForecastRequest(
                P0=self.eskf.P.copy(),
                F=self.eskf.last_F.copy(),
                Q=self.eskf.last_Q.copy(),
                H=self.eskf.build_odo_H(),
                mu_vel=window.mean_speed,
                gp_mu=pred.mu_star,
                gp_var=pred.var_star,
                t0=t_now,
                horizon=cfg.autonomy.horizon,
                imu_rate=IMU_RATE,
                odo_every=ODO_EVERY,
                epsilon=cfg.autonomy.epsilon,
                sigma_multiplier=cfg.autonomy.sigma_multiplier,
                yaw_var=cfg.filter.R_odo_yaw,
            )
            result = forecast_covariance(req)
        except Exception:
            log.exception("forecast dispatch failed at t=%.2f", t_now)
            self.scheduler.forecast_failed(t_now)
            self.decision_rows.append(
                (t_now, self.scheduler.mode.value, self.scheduler.t_stop,
                 cfg.autonomy.epsilon, None))
            return
        if cfg.keep_forecasts:
            self.forecast_results.append(result)
        if result.saturated:
            # predicted slip mass reached the chi singularity somewhere in the
            # horizon; the noise map is a clamp artifact past that point, so
            # the curve cannot certify sigma_h <= epsilon. Treat as failed.
            self.scheduler.forecast_failed(t_now)
            self.decision_rows.append(
                (t_now, self.scheduler.mode.value, self.scheduler.t_stop,
                 cfg.autonomy.epsilon, float(result.sigma_h[-1])))
            return
        self.scheduler.forecast_ready(t_now, result.stop_time)
        self.decision_rows.append(
            (t_now, self.scheduler.mode.value, result.stop_time,
             cfg.autonomy.epsilon, float(result.sigma_h[-1])))

    # -- outputs -----------------------------------------------------------

    @property
    def trace(self) -> np.ndarray:
        return np.array(self.trace_rows)

    @property
    def stop_count(self) -> int:
        return self.scheduler.stop_count


@dataclass
class SimulateResult:
    log: RunLog
    trace: np.ndarray
    decisions: list[tuple]
    stop_count: int
    pipeline: Pipeline


def simulate(terrain, distance: float, cfg: PipelineConfig, seed: int,
             max_duration: float | None = None) -> SimulateResult:
    """Closed-loop run over synthetic terrain: scheduler commands drive the
    simulated rover. Returns the sensor log actually consumed plus the
    filter trace."""
    sim = RoverSim(terrain, cfg.errors, cfg.vehicle, seed)
    pipe = Pipeline(cfg)
    if max_duration is None:
        max_duration = distance / max(cfg.autonomy.forward_speed_cmd, 0.01) * 4.0 + 240.0
    imu_rows, odo_rows = [], []
    # first command honors the initial hold; the scheduler takes over after
    # the first processed sample
    cmd = 0.0 if cfg.autonomy.initial_stop_s > 0 else cfg.autonomy.forward_speed_cmd
    while sim.distance < distance and sim.t < max_duration - 1e-9:
        imu, odo = sim.step(cmd)
        imu_rows.append([imu.t, *imu.gyro, *imu.accel])
        if odo is not None:
            odo_rows.append([odo.t, *odo.rates])
        cmd = pipe.process(imu, odo, sim.dt)
    run = RunLog(imu=np.array(imu_rows), odo=np.array(odo_rows),
                 truth=sim.truth, meta=run_meta(terrain, seed, distance,
                                                cfg.autonomy.forward_speed_cmd))
    run.meta["mode"] = cfg.mode
    return SimulateResult(log=run, trace=pipe.trace, decisions=pipe.decision_rows,
                          stop_count=pipe.stop_count, pipeline=pipe)


def replay(run: RunLog, cfg: PipelineConfig) -> tuple[np.ndarray, list[tuple], Pipeline]:
    """Open-loop run over a recorded log. Scheduler output is logged but
    motion follows the log. Returns (trace, decisions, pipeline)."""
    imu = run.imu
    odo = run.odo
    rate = float(run.meta.get("imu_rate_hz", 0.0) or 0.0)
    dt = 1.0 / rate if rate > 0 else float(np.median(np.diff(imu[:, 0])))
    pipe = Pipeline(cfg)
    j = 0
    for row in imu:
        t = row[0]
        sample = ImuSample(t, row[1:4], row[4:7])
        odo_sample = None
        while j < len(odo) and odo[j, 0] <= t + 1e-9:
            odo_sample = WheelOdomSample(odo[j, 0], odo[j, 1:5])
            j += 1
        pipe.process(sample, odo_sample, dt)
    return pipe.trace, pipe.decision_rows, pipe
