"""Trajectory scoring: alignment, stop detection, error metrics."""

import numpy as np
import pytest

from slipnav.metrics import align_by_time, detect_stops, evaluate


def test_align_exact_grids():
    t = np.arange(10) * 0.1
    ia, ib = align_by_time(t, t)
    np.testing.assert_array_equal(ia, np.arange(10))
    np.testing.assert_array_equal(ib, np.arange(10))


def test_align_nearest_within_tolerance():
    t_a = np.array([0.10, 0.21, 0.50])
    t_b = np.array([0.0, 0.1, 0.2, 0.3])
    ia, ib = align_by_time(t_a, t_b, tol=0.02)
    np.testing.assert_array_equal(ia, [0, 1])
    np.testing.assert_array_equal(ib, [1, 2])  # 0.5 matches nothing


def test_detect_stops_finds_dwell():
    t = np.arange(0, 30, 0.1)
    speed = np.where((t >= 10) & (t < 15), 0.0, 0.8)
    stops = detect_stops(t, speed)
    assert len(stops) == 1
    s, e = stops[0]
    assert s == pytest.approx(10.0, abs=0.11)
    assert e == pytest.approx(14.9, abs=0.11)


def test_detect_stops_ignores_blips():
    t = np.arange(0, 10, 0.1)
    speed = np.full_like(t, 0.8)
    speed[50:53] = 0.0   # 0.3 s dip, under min_duration
    assert detect_stops(t, speed) == []


def test_detect_stops_trailing_stop_kept():
    t = np.arange(0, 10, 0.1)
    speed = np.where(t < 8, 0.8, 0.0)
    stops = detect_stops(t, speed)
    assert len(stops) == 1
    assert stops[0][1] == pytest.approx(t[-1])


def _truth_straight(T=30.0, dt=0.1, v=0.5):
    t = np.arange(0, T + dt / 2, dt)
    e = v * t
    z = np.zeros_like(t)
    ve = np.full_like(t, v)
    return np.column_stack([t, e, z, z, ve, z, z])


def test_evaluate_perfect_estimate():
    truth = _truth_straight()
    est = truth[:, 0:7].copy()
    rep = evaluate(est, truth)
    assert rep.final_error_3d_m == 0.0
    assert rep.enu_error_pct == 0.0
    assert rep.traversed_distance_m == pytest.approx(15.0, rel=1e-6)
    assert rep.stop_count == 0
    assert rep.matched_samples == len(truth)


def test_evaluate_constant_offset():
    truth = _truth_straight()
    est = truth[:, 0:7].copy()
    est[:, 1] += 3.0   # 3 m east bias
    rep = evaluate(est, truth)
    assert rep.final_error_3d_m == pytest.approx(3.0)
    assert rep.enu_error_pct == pytest.approx(100.0 * 3.0 / 15.0)
    assert rep.median_horizontal_error_m == pytest.approx(3.0)
    assert rep.rmse_e == pytest.approx(3.0)
    assert rep.rmse_n == 0.0


def test_evaluate_counts_mid_run_stops_only():
    # drive, stop 5 s, drive; plus a leading hold that must not count
    dt = 0.1
    t = np.arange(0, 40, dt)
    v = np.where(t < 5, 0.0, np.where((t >= 20) & (t < 25), 0.0, 0.5))
    e = np.concatenate([[0.0], np.cumsum(v[:-1] * dt)])
    z = np.zeros_like(t)
    truth = np.column_stack([t, e, z, z, v, z, z])
    rep = evaluate(truth[:, 0:7], truth)
    assert rep.stop_count == 1
    assert rep.stop_rate_pct == pytest.approx(100.0 * 5.0 / t[-1], rel=0.05)


def test_evaluate_rejects_disjoint_time_ranges():
    truth = _truth_straight()
    est = truth.copy()
    est[:, 0] += 1e4
    with pytest.raises(ValueError):
        evaluate(est, truth)
