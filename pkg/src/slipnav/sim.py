"""Synthetic skid-steer rover runs with terrain-dependent wheel slip.

Slip enters through the encoders: a slipping wheel spins faster than the
ground speed, so reported rates are surface_speed / (r * (1 - s)). The IMU
is generated by inverting the strapdown mechanization on the truth
trajectory, so a zero-error sensor model reproduces truth exactly through
the filter. All randomness flows through one seeded PCG64 generator; equal
seeds give bit-identical runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .nav_core import ImuSample, VehicleParams, WheelOdomSample, rotation_from_rotvec
from .runlog import RunLog

__all__ = [
    "TerrainSegment",
    "TerrainProfile",
    "SensorErrorModel",
    "terrain_presets",
    "RoverSim",
    "generate_run",
]

IMU_RATE = 50.0
ODO_EVERY = 5          # odometry tick every 5th IMU step (10 Hz)
SLIP_TAU = 2.0         # s, slip process correlation time
MAX_ACCEL = 1.0        # m/s^2 speed ramp
MAX_YAW_RATE = 0.5     # rad/s turn-in-place limit
SLIP_CLIP = (0.0, 0.95)
VIB_THETA_TAU = 0.1    # s, chassis rocking correlation time
VIB_VEL_TAU = 0.04     # s, chassis velocity jitter correlation time


@dataclass(frozen=True)
class TerrainSegment:
    """A stretch of ground with stationary slip statistics."""

    length: float           # m
    slip_mean: float
    slip_std: float
    impulse_rate: float     # events per minute
    impulse_amp: float = 0.25   # mean slip-spike amplitude per event
    slope: float = 0.0      # rad, pitch of the ground along track

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError("segment length must be positive")
        if not 0 <= self.slip_mean < 1:
            raise ValueError("slip_mean must be in [0, 1)")


@dataclass(frozen=True)
class TerrainProfile:
    name: str
    segments: tuple[TerrainSegment, ...]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("profile needs at least one segment")
        object.__setattr__(self, "segments", tuple(self.segments))

    def segment_at(self, distance: float) -> TerrainSegment:
        d = 0.0
        for seg in self.segments:
            d += seg.length
            if distance < d:
                return seg
        return self.segments[-1]

    @property
    def slip_mean(self) -> float:
        total = sum(s.length for s in self.segments)
        return sum(s.slip_mean * s.length for s in self.segments) / total


def terrain_presets() -> dict[str, TerrainProfile]:
    """Four named surfaces with strictly increasing slip mean, spread, and
    impulse rate from paved to rough."""

    def uniform(name, mean, std, rate, amp):
        return TerrainProfile(
            name, (TerrainSegment(1e4, mean, std, rate, impulse_amp=amp),))

    return {
        "paved": uniform("paved", 0.002, 0.005, 0.0, 0.0),
        "unpaved": uniform("unpaved", 0.03, 0.12, 0.8, 0.10),
        "gravel": uniform("gravel", 0.075, 0.26, 4.5, 0.28),
        "rough": uniform("rough", 0.09, 0.28, 5.0, 0.30),
    }


@dataclass(frozen=True)
class SensorErrorModel:
    """IMU and encoder error parameters.

    Noise densities are amplitude spectral densities; biases are constant
    turn-on values plus a random walk. The vibration levels set the size of
    a bounded chassis wobble the vehicle exhibits while moving: it is real
    motion the IMU senses, not added measurement noise, and it is what
    makes the stationarity check discriminate stops from driving.
    """

    accel_noise_density: float = 1.25e-4    # (m/s^2)/sqrt(Hz)
    gyro_noise_density: float = 3.0e-5      # (rad/s)/sqrt(Hz)
    accel_bias: np.ndarray = field(default_factory=lambda: np.array([0.01, -0.005, 0.008]))
    gyro_bias: np.ndarray = field(default_factory=lambda: np.array([5e-5, -3e-5, 1e-4]))
    accel_bias_rw_density: float = 1.0e-5   # (m/s^2)/sqrt(s)
    gyro_bias_rw_density: float = 1.0e-7    # (rad/s)/sqrt(s)
    vibration_accel_std: float = 0.3        # m/s^2 sensed while moving
    vibration_gyro_std: float = 0.008       # rad/s sensed while moving
    encoder_noise_std: float = 0.02         # rad/s per wheel
    encoder_quant: float = 0.002            # rad/s quantization step (0 = off)
    # alignment hand-off: the navigator starts at the nominal heading, the
    # vehicle at a seeded offset drawn from this 1-sigma value
    init_heading_std: float = math.radians(0.25)

    def __post_init__(self):
        object.__setattr__(self, "accel_bias", np.asarray(self.accel_bias, dtype=float))
        object.__setattr__(self, "gyro_bias", np.asarray(self.gyro_bias, dtype=float))

    @staticmethod
    def ideal() -> "SensorErrorModel":
        return SensorErrorModel(
            accel_noise_density=0.0, gyro_noise_density=0.0,
            accel_bias=np.zeros(3), gyro_bias=np.zeros(3),
            accel_bias_rw_density=0.0, gyro_bias_rw_density=0.0,
            vibration_accel_std=0.0, vibration_gyro_std=0.0,
            encoder_noise_std=0.0, encoder_quant=0.0,
            init_heading_std=0.0)


def _yaw_pitch_dcm(yaw: float, pitch: float) -> np.ndarray:
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    Rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    # pitch up about -body-y so +pitch tips the nose up
    Ry = np.array([[cp, 0.0, -sp], [0.0, 1.0, 0.0], [sp, 0.0, cp]])
    return Rz @ Ry


def _rotvec_from_dcm(R: np.ndarray) -> np.ndarray:
    """Inverse of the Rodrigues map for small-to-moderate angles."""
    cos_a = max(-1.0, min(1.0, 0.5 * (np.trace(R) - 1.0)))
    angle = math.acos(cos_a)
    w = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if angle < 1e-8:
        return w
    return w * (angle / math.sin(angle))


class RoverSim:
    """Steppable rover: call ``step(speed_cmd)`` once per IMU interval.

    Returns ``(imu, odo)`` where ``odo`` is None except on every
    ``ODO_EVERY``-th step. Truth rows accumulate in ``truth_rows``.
    """

    def __init__(self, terrain: TerrainProfile, errors: SensorErrorModel,
                 params: VehicleParams, seed: int, heading: float = 0.0,
                 imu_rate: float = IMU_RATE):
        self.terrain = terrain
        self.errors = errors
        self.params = params
        self.dt = 1.0 / imu_rate
        self.rng = np.random.default_rng(seed)
        self.t = 0.0
        self.k = 0
        self.speed = 0.0
        # first draw of the stream: true heading offset vs the nominal one
        # the navigator is aligned to
        self.heading = heading + float(self.rng.normal(0.0, errors.init_heading_std))
        self.pitch = 0.0
        self.distance = 0.0
        self.p = np.zeros(3)
        self.v = np.zeros(3)
        self.C = _yaw_pitch_dcm(self.heading, 0.0)
        self._accel_bias = errors.accel_bias.copy()
        self._gyro_bias = errors.gyro_bias.copy()
        # chassis wobble: mean-reverting angle and velocity perturbations
        # carried in the truth state, scaled so their one-step increments
        # reproduce the configured vibration levels at the IMU
        self._vib_a_th = math.exp(-self.dt / VIB_THETA_TAU)
        self._vib_a_v = math.exp(-self.dt / VIB_VEL_TAU)
        self._vib_sig_th = errors.vibration_gyro_std * self.dt / math.sqrt(
            2.0 * (1.0 - self._vib_a_th))
        self._vib_sig_v = errors.vibration_accel_std * self.dt / math.sqrt(
            2.0 * (1.0 - self._vib_a_v))
        self._vib_theta = np.zeros(3)
        self._vib_vel = np.zeros(3)
        seg = terrain.segment_at(0.0)
        self._slip = seg.slip_mean
        self._impulses: list[tuple[float, float]] = []   # (t_end, amplitude)
        self.truth_rows: list[list[float]] = []
        self._record_truth()

    # -- one IMU interval -------------------------------------------------

    def step(self, speed_cmd: float) -> tuple[ImuSample, WheelOdomSample | None]:
        dt = self.dt
        seg = self.terrain.segment_at(self.distance)

        dv = np.clip(speed_cmd - self.speed, -MAX_ACCEL * dt, MAX_ACCEL * dt)
        self.speed = self.speed + dv
        if abs(self.speed) < 1e-12:
            self.speed = 0.0
        dpitch = np.clip(seg.slope - self.pitch, -0.1 * dt, 0.1 * dt)
        self.pitch += dpitch

        self._vib_theta = self._vib_a_th * self._vib_theta
        self._vib_vel = self._vib_a_v * self._vib_vel
        if self.speed > 0.01:
            if self._vib_sig_th > 0:
                self._vib_theta = self._vib_theta + (
                    self._vib_sig_th * math.sqrt(1.0 - self._vib_a_th ** 2)
                    * self.rng.standard_normal(3))
            if self._vib_sig_v > 0:
                self._vib_vel = self._vib_vel + (
                    self._vib_sig_v * math.sqrt(1.0 - self._vib_a_v ** 2)
                    * self.rng.standard_normal(3))

        C_path = _yaw_pitch_dcm(self.heading, self.pitch)
        C_new = C_path @ rotation_from_rotvec(self._vib_theta)
        v_new = self.speed * C_path[:, 0] + self._vib_vel
        p_new = self.p + 0.5 * (self.v + v_new) * dt
        self.distance += abs(self.speed) * dt

        # invert the mechanization so a perfect IMU replays to this truth
        omega = _rotvec_from_dcm(self.C.T @ C_new) / dt
        g_n = self.params.gravity_n
        C_mid = 0.5 * (self.C + C_new)
        f_b = np.linalg.solve(C_mid, (v_new - self.v) / dt - g_n)

        self.t += dt
        self.k += 1
        self.C, self.v, self.p = C_new, v_new, p_new
        self._record_truth()

        imu = self._measure_imu(omega, f_b)
        odo = self._measure_odo() if self.k % ODO_EVERY == 0 else None
        return imu, odo

    # -- sensors -----------------------------------------------------------

    def _measure_imu(self, omega_b: np.ndarray, f_b: np.ndarray) -> ImuSample:
        e = self.errors
        dt = self.dt
        rate = 1.0 / dt
        self._gyro_bias = self._gyro_bias + e.gyro_bias_rw_density * math.sqrt(dt) * self.rng.standard_normal(3)
        self._accel_bias = self._accel_bias + e.accel_bias_rw_density * math.sqrt(dt) * self.rng.standard_normal(3)
        gyro = omega_b + self._gyro_bias + e.gyro_noise_density * math.sqrt(rate) * self.rng.standard_normal(3)
        accel = f_b + self._accel_bias + e.accel_noise_density * math.sqrt(rate) * self.rng.standard_normal(3)
        return ImuSample(self.t, gyro, accel)

    def _advance_slip(self, seg: TerrainSegment, dt_odo: float) -> float:
        rng = self.rng
        a = dt_odo / SLIP_TAU
        self._slip += (seg.slip_mean - self._slip) * a
        if seg.slip_std > 0:
            self._slip += seg.slip_std * math.sqrt(2.0 * a) * rng.standard_normal()
        if seg.impulse_rate > 0 and rng.random() < seg.impulse_rate / 60.0 * dt_odo:
            amp = seg.impulse_amp * rng.uniform(0.6, 1.4)
            self._impulses.append((self.t + rng.uniform(0.5, 2.0), amp))
        self._impulses = [(te, a_) for te, a_ in self._impulses if te > self.t]
        s = self._slip + sum(a_ for _, a_ in self._impulses)
        return float(np.clip(s, *SLIP_CLIP))

    def _measure_odo(self) -> WheelOdomSample:
        e = self.errors
        seg = self.terrain.segment_at(self.distance)
        dt_odo = self.dt * ODO_EVERY
        s = self._advance_slip(seg, dt_odo)
        if self.speed == 0.0:
            return WheelOdomSample(self.t, np.zeros(4))
        r = self.params.wheel_radius
        half_track = 0.5 * self.params.track_width
        # straight driving here; differential term kept for completeness
        yaw_rate = 0.0
        surface = np.array([
            self.speed - yaw_rate * half_track,
            self.speed + yaw_rate * half_track,
            self.speed - yaw_rate * half_track,
            self.speed + yaw_rate * half_track,
        ])
        rates = surface / (r * (1.0 - s))
        if e.encoder_noise_std > 0:
            rates = rates + e.encoder_noise_std * self.rng.standard_normal(4)
        if e.encoder_quant > 0:
            rates = np.round(rates / e.encoder_quant) * e.encoder_quant
        return WheelOdomSample(self.t, rates)

    def _record_truth(self):
        self.truth_rows.append([self.t, *self.p, *self.v])

    @property
    def truth(self) -> np.ndarray:
        return np.array(self.truth_rows)


def generate_run(distance: float, terrain: TerrainProfile,
                 errors: SensorErrorModel, params: VehicleParams,
                 seed: int, speed: float = 0.8,
                 stops: list[tuple[float, float]] | None = None,
                 max_duration: float | None = None,
                 initial_stop_s: float = 10.0) -> RunLog:
    """Open-loop run: drive ``distance`` meters at ``speed``, optionally
    halting at scripted ``stops`` [(start_s, duration_s), ...]. A leading
    calibration hold of ``initial_stop_s`` seconds matches the closed-loop
    startup discipline; pass 0 to drive immediately."""
    sim = RoverSim(terrain, errors, params, seed)
    stops = sorted(stops or [])
    if initial_stop_s > 0:
        stops = [(0.0, initial_stop_s)] + stops
    if max_duration is None:
        max_duration = distance / max(speed, 0.01) * 3.0 + 120.0
    imu_rows, odo_rows = [], []
    while sim.distance < distance and sim.t < max_duration:
        cmd = speed
        for t0, dur in stops:
            if t0 <= sim.t < t0 + dur:
                cmd = 0.0
                break
        imu, odo = sim.step(cmd)
        imu_rows.append([imu.t, *imu.gyro, *imu.accel])
        if odo is not None:
            odo_rows.append([odo.t, *odo.rates])
    meta = run_meta(terrain, seed, distance, speed)
    return RunLog(imu=np.array(imu_rows), odo=np.array(odo_rows),
                  truth=sim.truth, meta=meta)


def run_meta(terrain: TerrainProfile, seed: int, distance: float,
             speed: float) -> dict:
    return {
        "terrain": terrain.name,
        "seed": str(seed),
        "imu_rate_hz": repr(IMU_RATE),
        "odo_every": str(ODO_EVERY),
        "distance_m": repr(float(distance)),
        "speed_mps": repr(float(speed)),
    }
