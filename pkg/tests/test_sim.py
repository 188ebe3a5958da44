"""Synthetic rover: truth consistency, sensor models, terrain presets."""

import numpy as np
import pytest

from slipnav.nav_core import NavState, VehicleParams, propagate_strapdown
from slipnav.sim import (
    ODO_EVERY,
    SLIP_CLIP,
    RoverSim,
    SensorErrorModel,
    TerrainProfile,
    TerrainSegment,
    terrain_presets,
)


def _flat(mean=0.0, std=0.0, rate=0.0, amp=0.0):
    return TerrainProfile(
        "test", (TerrainSegment(1e4, mean, std, rate, impulse_amp=amp),))


def test_ideal_imu_replays_to_truth():
    """Integrating the noise-free IMU through the strapdown equations must
    reproduce the simulator truth: the IMU is generated by inverting the
    same mechanization."""
    params = VehicleParams()
    sim = RoverSim(_flat(), SensorErrorModel.ideal(), params, seed=1)
    state = NavState(np.eye(3), np.zeros(3), np.zeros(3))
    for _ in range(500):
        imu, _ = sim.step(0.8)
        state = propagate_strapdown(state, imu, sim.dt, params)
    truth = sim.truth
    np.testing.assert_allclose(state.p_eb_n, truth[-1, 1:4], atol=1e-6)
    np.testing.assert_allclose(state.v_eb_n, truth[-1, 4:7], atol=1e-6)


def test_encoder_reads_wheel_over_ground_ratio():
    # constant 20% slip, no noise: surface speed = v/(1-s)
    params = VehicleParams()
    sim = RoverSim(_flat(mean=0.2), SensorErrorModel.ideal(), params, seed=2)
    odo = None
    for _ in range(600):     # past the 1 m/s^2 ramp to steady speed
        _, o = sim.step(0.8)
        if o is not None:
            odo = o
    v_wheel = np.mean(odo.rates) * params.wheel_radius
    assert v_wheel == pytest.approx(0.8 / (1 - 0.2), rel=1e-6)


def test_odo_cadence_and_stationary_rates():
    sim = RoverSim(_flat(), SensorErrorModel.ideal(), VehicleParams(), seed=3)
    ticks = []
    for k in range(1, 51):
        _, odo = sim.step(0.0)
        if odo is not None:
            ticks.append(k)
            np.testing.assert_array_equal(odo.rates, np.zeros(4))
    assert ticks == [k for k in range(1, 51) if k % ODO_EVERY == 0]


def test_slip_stays_in_clip_range():
    presets = terrain_presets()
    sim = RoverSim(presets["rough"], SensorErrorModel.ideal(),
                   VehicleParams(), seed=4)
    worst = 0.0
    for _ in range(5000):
        _, odo = sim.step(0.8)
        if odo is not None and sim.speed > 0.1:
            s = 1.0 - sim.speed / (np.mean(odo.rates) * 0.1)
            worst = max(worst, s)
            assert SLIP_CLIP[0] - 1e-9 <= s <= SLIP_CLIP[1] + 1e-9
    assert worst > 0.3   # rough terrain actually slips


def test_preset_severity_ordering():
    p = terrain_presets()
    names = ["paved", "unpaved", "gravel", "rough"]
    means = [p[n].segments[0].slip_mean for n in names]
    stds = [p[n].segments[0].slip_std for n in names]
    rates = [p[n].segments[0].impulse_rate for n in names]
    assert means == sorted(means) and len(set(means)) == 4
    assert stds == sorted(stds) and len(set(stds)) == 4
    assert rates == sorted(rates) and len(set(rates)) == 4


def test_same_seed_bit_identical():
    presets = terrain_presets()
    a = RoverSim(presets["gravel"], SensorErrorModel(), VehicleParams(), seed=9)
    b = RoverSim(presets["gravel"], SensorErrorModel(), VehicleParams(), seed=9)
    for _ in range(300):
        imu_a, odo_a = a.step(0.8)
        imu_b, odo_b = b.step(0.8)
        np.testing.assert_array_equal(imu_a.accel, imu_b.accel)
        np.testing.assert_array_equal(imu_a.gyro, imu_b.gyro)
        assert (odo_a is None) == (odo_b is None)
        if odo_a is not None:
            np.testing.assert_array_equal(odo_a.rates, odo_b.rates)


def test_vibration_present_moving_absent_stopped():
    sim = RoverSim(_flat(), SensorErrorModel(), VehicleParams(), seed=5)
    still = [sim.step(0.0)[0].accel for _ in range(200)]
    moving = []
    for _ in range(400):
        imu, _ = sim.step(0.8)
        moving.append(imu.accel)
    var_still = np.var(np.array(still)[:, 0])
    var_moving = np.var(np.array(moving[200:])[:, 0])
    assert var_moving > 20 * var_still


def test_terrain_validation():
    with pytest.raises(ValueError):
        TerrainSegment(0.0, 0.1, 0.1, 1.0)
    with pytest.raises(ValueError):
        TerrainSegment(10.0, 1.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        TerrainProfile("empty", ())


def test_segment_lookup_by_distance():
    prof = TerrainProfile("mixed", (
        TerrainSegment(100.0, 0.01, 0.0, 0.0),
        TerrainSegment(50.0, 0.2, 0.0, 0.0),
    ))
    assert prof.segment_at(0.0).slip_mean == 0.01
    assert prof.segment_at(99.9).slip_mean == 0.01
    assert prof.segment_at(100.1).slip_mean == 0.2
    assert prof.segment_at(1e6).slip_mean == 0.2   # past the end: last segment
    assert prof.slip_mean == pytest.approx((0.01 * 100 + 0.2 * 50) / 150)
