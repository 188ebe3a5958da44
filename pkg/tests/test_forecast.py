"""Sigma transform, noise construction, and covariance forecasting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slipnav.eskf import FilterConfig, Eskf, initial_covariance
from slipnav.forecast import (
    DENOM_FLOOR,
    ForecastRequest,
    build_R_gp,
    find_stop_time,
    forecast_covariance,
    sigma_velocity_transform,
)
from slipnav.nav_core import ImuSample, VehicleParams


# Frozen hand oracle for the three-point transform at (0.8, 0.5, 0.1):
# denominators (0.5, 0.4, 0.6) -> chi = (1.6, 2.0, 4/3);
# mean = 74/45, population variance of the three points.
CHI_ORACLE = (1.6 + 2.0 + 4.0 / 3.0) / 3.0
VAR_ORACLE = ((1.6 - CHI_ORACLE) ** 2 + (2.0 - CHI_ORACLE) ** 2
              + (4.0 / 3.0 - CHI_ORACLE) ** 2) / 3.0


def test_sigma_transform_hand_oracle():
    tr = sigma_velocity_transform(0.8, 0.5, 0.1)
    assert tr.chi_est == pytest.approx(1.6444444444444446, abs=1e-6)
    assert tr.var_chi == pytest.approx(0.0750617283950617, abs=1e-6)
    assert tr.chi_est == pytest.approx(CHI_ORACLE, abs=1e-12)
    assert tr.var_chi == pytest.approx(VAR_ORACLE, abs=1e-12)
    assert not tr.saturated


def test_sigma_transform_zero_spread():
    tr = sigma_velocity_transform(0.8, 0.2, 0.0)
    assert tr.chi_est == pytest.approx(1.0)
    assert tr.var_chi == 0.0
    assert not tr.saturated


def test_sigma_transform_saturates_near_full_slip():
    tr = sigma_velocity_transform(0.8, 0.9, 0.1)
    assert tr.saturated
    # denominators (0.1, 0.0, 0.2); the middle clamps to DENOM_FLOOR so its
    # sigma point is 20 x mu_vel = 16; mean of (8, 16, 4) is 28/3
    assert tr.chi_est == pytest.approx(28.0 / 3.0, rel=1e-12)


def test_sigma_transform_clamp_caps_chi():
    tr = sigma_velocity_transform(1.0, 1.5, 0.0)
    assert tr.saturated
    assert tr.chi_est == pytest.approx(1.0 / DENOM_FLOOR)


def test_sigma_transform_rejects_negative_spread():
    with pytest.raises(ValueError):
        sigma_velocity_transform(0.8, 0.1, -0.01)


@given(mu_vel=st.floats(0.01, 5.0), mu_s=st.floats(-0.5, 0.8),
       sigma_s=st.floats(0.0, 0.5))
@settings(max_examples=200, deadline=None)
def test_sigma_transform_variance_nonnegative(mu_vel, mu_s, sigma_s):
    tr = sigma_velocity_transform(mu_vel, mu_s, sigma_s)
    assert tr.var_chi >= 0.0
    assert np.isfinite(tr.chi_est)


@given(mu_vel=st.floats(0.1, 2.0), mu_s=st.floats(0.0, 0.5))
@settings(max_examples=100, deadline=None)
def test_sigma_transform_variance_grows_with_spread(mu_vel, mu_s):
    lo = sigma_velocity_transform(mu_vel, mu_s, 0.05).var_chi
    hi = sigma_velocity_transform(mu_vel, mu_s, 0.20).var_chi
    assert hi >= lo


def test_build_r_gp_layout():
    R = build_R_gp(0.25, yaw_var=0.5)
    np.testing.assert_array_equal(R, np.diag([0.25, 0.25, 0.25, 0.5]))
    # default yaw variance is the literal one
    assert build_R_gp(0.1)[3, 3] == 1.0


def test_find_stop_time_countdown():
    # monotone synthetic curve crossing epsilon = 3 at t = 42
    t = np.linspace(0.0, 60.0, 601) + 15.0
    sigma = 3.0 * (t - 15.0) / 27.0
    got = find_stop_time(t, sigma, 3.0, now=15.0)
    assert got == pytest.approx(27.0, abs=0.2)


def test_find_stop_time_no_crossing_and_all_above():
    t = np.linspace(0.0, 60.0, 100)
    assert find_stop_time(t, np.full(100, 0.5), np.inf, now=0.0) is None
    assert find_stop_time(t, np.full(100, 0.5), 3.0, now=0.0) is None
    assert find_stop_time(t, np.full(100, 5.0), 3.0, now=0.0) == 0.0


def test_find_stop_time_sigma_multiplier():
    t = np.linspace(0.0, 10.0, 11)
    sigma = np.linspace(0.0, 2.0, 11)
    # x1: never crosses 3; x2: crosses where 2*sigma > 3 => sigma > 1.5
    assert find_stop_time(t, sigma, 3.0, 0.0, sigma_multiplier=1.0) is None
    got = find_stop_time(t, sigma, 3.0, 0.0, sigma_multiplier=2.0)
    assert got == pytest.approx(8.0)


def test_find_stop_time_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        find_stop_time(np.arange(3.0), np.arange(3.0), 0.0, 0.0)


@given(eps1=st.floats(0.5, 5.0), eps2=st.floats(0.5, 5.0),
       seed=st.integers(0, 2**31))
@settings(max_examples=200, deadline=None)
def test_find_stop_time_monotone_in_epsilon(eps1, eps2, seed):
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 60.0, 301)
    sigma = np.cumsum(np.abs(rng.normal(size=301))) * 0.02
    lo, hi = sorted((eps1, eps2))
    s_lo = find_stop_time(t, sigma, lo, 0.0)
    s_hi = find_stop_time(t, sigma, hi, 0.0)
    if s_hi is not None:
        assert s_lo is not None
        assert s_lo <= s_hi


def _forecast_request(**overrides):
    cfg = FilterConfig()
    eskf = Eskf(cfg, VehicleParams())
    # drive briefly so F/Q snapshots exist
    imu = ImuSample(0.0, np.zeros(3), [0.0, 0.0, 9.80665])
    eskf.predict(imu, 0.02)
    n_upd = 600
    base = dict(
        P0=initial_covariance(cfg),
        F=eskf.last_F.copy(),
        Q=eskf.last_Q.copy(),
        H=eskf.build_odo_H(),
        mu_vel=0.8,
        gp_mu=np.full(n_upd, 0.05),
        gp_var=np.full(n_upd, 1e-4),
        t0=20.0,
        horizon=60.0,
        imu_rate=50.0,
        odo_every=5,
        epsilon=3.0,
    )
    base.update(overrides)
    return ForecastRequest(**base)


def test_forecast_step_and_update_counts():
    # 60 s at 50 Hz with an update every 5th step
    res = forecast_covariance(_forecast_request())
    assert res.step_count == 3000
    assert res.update_count == 600
    assert len(res.t) == 3001
    assert res.t[0] == 20.0


def test_forecast_sigma0_matches_p0():
    req = _forecast_request()
    res = forecast_covariance(req)
    expected = np.sqrt(req.P0[6, 6] + req.P0[7, 7])
    assert res.sigma_h[0] == pytest.approx(expected, rel=1e-12)


def test_forecast_determinism_bit_identical():
    req = _forecast_request()
    a = forecast_covariance(req)
    b = forecast_covariance(req)
    assert np.array_equal(a.sigma_h, b.sigma_h)
    assert a.stop_time == b.stop_time


def test_forecast_saturation_flag_propagates():
    res = forecast_covariance(_forecast_request(
        gp_mu=np.full(600, 0.9), gp_var=np.full(600, 0.04)))
    assert res.saturated


def test_forecast_sigma_grows_with_slip_variance():
    quiet = forecast_covariance(_forecast_request())
    noisy = forecast_covariance(_forecast_request(gp_var=np.full(600, 0.25)))
    assert noisy.sigma_h[-1] > quiet.sigma_h[-1]


def test_forecast_rejects_short_gp_vectors():
    with pytest.raises(ValueError):
        forecast_covariance(_forecast_request(gp_mu=np.zeros(10),
                                              gp_var=np.zeros(10)))


def test_covariance_monotone_in_R_single_step():
    """Loewner: inflating R never shrinks the updated covariance."""
    rng = np.random.default_rng(7)
    n, m = 6, 3
    violations = 0
    for _ in range(1000):
        A = rng.normal(size=(n, n))
        P = A @ A.T + 1e-6 * np.eye(n)
        H = rng.normal(size=(m, n))
        B = rng.normal(size=(m, m))
        R1 = B @ B.T + 1e-6 * np.eye(m)
        R2 = R1 + np.abs(rng.normal()) * np.eye(m)   # R2 dominates R1
        upd = []
        for R in (R1, R2):
            S = H @ P @ H.T + R
            K = np.linalg.solve(S, H @ P).T
            Pu = (np.eye(n) - K @ H) @ P
            upd.append(0.5 * (Pu + Pu.T))
        diff = upd[1] - upd[0]
        if np.linalg.eigvalsh(0.5 * (diff + diff.T)).min() < -1e-9:
            violations += 1
    assert violations == 0
