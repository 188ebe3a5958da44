"""Slip-adaptive wheel-inertial dead reckoning with scheduled
zero-velocity stops.

A strapdown INS fused with wheel odometry and motion constraints through a
15-state error-state Kalman filter; wheel slip is learned online with a
Gaussian process and pushed through a covariance forecaster that schedules
the next zero-velocity stop before the predicted horizontal error crosses
a threshold.
"""

from .autonomy import (
    AutonomyConfig,
    Mode,
    NeverStopScheduler,
    PeriodicScheduler,
    StopScheduler,
    zupt_stationarity_check,
)
from .eskf import Eskf, FilterConfig, build_F, build_H_odo, build_Q, initial_covariance
from .forecast import (
    ForecastRequest,
    ForecastResult,
    build_R_gp,
    find_stop_time,
    forecast_covariance,
    sigma_velocity_transform,
)
from .gp import (
    GpFitError,
    GpModel,
    GpPrediction,
    KernelParams,
    fit,
    kernel_eval,
    log_marginal_likelihood,
    optimize_hyperparams,
    predict,
)
from .metrics import MetricsReport, evaluate
from .nav_core import (
    ImuSample,
    NavState,
    VehicleParams,
    WheelOdomSample,
    propagate_strapdown,
    wheel_speed,
)
from .pipeline import Pipeline, PipelineConfig, SimulateResult, replay, simulate
from .runlog import RunLog, RunLogError, read_runlog, write_runlog
from .sim import (
    RoverSim,
    SensorErrorModel,
    TerrainProfile,
    TerrainSegment,
    generate_run,
    terrain_presets,
)
from .slip import SlipCollector, SlipSample, SlipWindow, slip_angle, slip_ratio

__version__ = "0.1.0"

__all__ = [
    "AutonomyConfig", "Mode", "NeverStopScheduler", "PeriodicScheduler",
    "StopScheduler", "zupt_stationarity_check",
    "Eskf", "FilterConfig", "build_F", "build_H_odo", "build_Q",
    "initial_covariance",
    "ForecastRequest", "ForecastResult", "build_R_gp", "find_stop_time",
    "forecast_covariance", "sigma_velocity_transform",
    "GpFitError", "GpModel", "GpPrediction", "KernelParams", "fit",
    "kernel_eval", "log_marginal_likelihood", "optimize_hyperparams", "predict",
    "MetricsReport", "evaluate",
    "ImuSample", "NavState", "VehicleParams", "WheelOdomSample",
    "propagate_strapdown", "wheel_speed",
    "Pipeline", "PipelineConfig", "SimulateResult", "replay", "simulate",
    "RunLog", "RunLogError", "read_runlog", "write_runlog",
    "RoverSim", "SensorErrorModel", "TerrainProfile", "TerrainSegment",
    "generate_run", "terrain_presets",
    "SlipCollector", "SlipSample", "SlipWindow", "slip_angle", "slip_ratio",
]
