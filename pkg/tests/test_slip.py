"""Slip observables and window collection."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slipnav.nav_core import VehicleParams, WheelOdomSample
from slipnav.slip import SlipCollector, SlipWindow, slip_angle, slip_ratio

R = 0.1


def test_slip_ratio_no_slip():
    # wheel surface speed exactly matches body speed
    assert slip_ratio(0.8, 8.0, R) == 0.0


def test_slip_ratio_driving_spin():
    # wheel 25% faster than body: s = 1 - 0.8/1.0
    assert slip_ratio(0.8, 10.0, R) == pytest.approx(0.2)


def test_slip_ratio_braking_skid():
    # body faster than wheel: r*omega/v - 1 = 0.6/0.8 - 1
    assert slip_ratio(0.8, 6.0, R) == pytest.approx(-0.25)


def test_slip_ratio_deadband():
    assert slip_ratio(0.8, 8.1, R) == 0.0        # 0.81 vs 0.80, within 0.02
    assert slip_ratio(0.0, 0.0, R) == 0.0        # parked
    assert slip_ratio(0.01, 0.0, R) == 0.0       # creep under deadband


def test_slip_ratio_locked_wheel_full_skid():
    assert slip_ratio(0.8, 0.0, R) == -1.0


def test_slip_ratio_spinning_in_place_clamped():
    # wheel spinning, body stopped: s -> 1 (clamp)
    assert slip_ratio(0.0, 10.0, R) == 1.0


@given(v=st.floats(-3, 3), omega=st.floats(-40, 40), r=st.floats(0.02, 0.5))
def test_slip_ratio_always_in_unit_interval(v, omega, r):
    s = slip_ratio(v, omega, r)
    assert -1.0 <= s <= 1.0


def test_slip_angle():
    assert slip_angle(0.0, 0.8) == 0.0
    assert slip_angle(0.8, 0.8) == pytest.approx(np.pi / 4)
    assert slip_angle(0.0, 0.0) == 0.0


def _odo(t, rate):
    return WheelOdomSample(t, [rate] * 4)


def test_collector_emits_window_after_duration():
    col = SlipCollector(2.0, VehicleParams(wheel_radius=R))
    w = None
    t = 0.0
    while w is None:
        t += 0.1
        w = col.add(t, np.array([0.8, 0.0, 0.0]), _odo(t, 10.0))
    assert isinstance(w, SlipWindow)
    assert w.t1 - w.t0 >= 2.0 - 1e-9
    np.testing.assert_allclose(w.s, 0.2)
    assert w.mean_speed == pytest.approx(0.8)
    # collection restarted
    assert len(col) == 0


def test_collector_averages_axles():
    col = SlipCollector(10.0, VehicleParams(wheel_radius=R))
    # front axle matched (s=0), rear spinning 25% fast (s=0.2)
    col.add(0.1, np.array([0.8, 0.0, 0.0]), WheelOdomSample(0.1, [8.0, 8.0, 10.0, 10.0]))
    w_partial = col._s[-1]
    assert w_partial == pytest.approx(0.1)


def test_collector_reset_discards_partial():
    col = SlipCollector(2.0, VehicleParams(wheel_radius=R))
    col.add(0.1, np.array([0.8, 0.0, 0.0]), _odo(0.1, 8.0))
    col.add(0.2, np.array([0.8, 0.0, 0.0]), _odo(0.2, 8.0))
    assert len(col) == 2
    col.reset()
    assert len(col) == 0
    # window timer restarts from the next sample
    w = col.add(0.3, np.array([0.8, 0.0, 0.0]), _odo(0.3, 8.0))
    assert w is None


def test_collector_rejects_non_increasing_time():
    col = SlipCollector(2.0, VehicleParams(wheel_radius=R))
    col.add(0.1, np.array([0.8, 0.0, 0.0]), _odo(0.1, 8.0))
    with pytest.raises(ValueError):
        col.add(0.1, np.array([0.8, 0.0, 0.0]), _odo(0.1, 8.0))


def test_collector_rejects_bad_duration():
    with pytest.raises(ValueError):
        SlipCollector(0.0, VehicleParams())


def test_window_validation():
    with pytest.raises(ValueError):
        SlipWindow(0.0, 1.0, np.array([]), np.array([]), np.array([]), 0.8)
    with pytest.raises(ValueError):
        SlipWindow(0.0, 1.0, np.array([0.1, 0.1]), np.zeros(2), np.zeros(2), 0.8)
