"""Accuracy and stop-behavior metrics for a completed run.

Estimates are aligned to truth by nearest time tag within a fixed
tolerance; unmatched samples are dropped. Stops are detected from truth
speed (a maximal interval below 1 mm/s lasting at least one second).
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

__all__ = ["MetricsReport", "evaluate", "align_by_time", "detect_stops"]

ALIGN_TOL = 0.06  # s


@dataclass(frozen=True)
class MetricsReport:
    traversed_distance_m: float
    traversal_time_s: float
    stop_count: int
    stop_rate_pct: float
    enu_error_pct: float
    median_horizontal_error_m: float
    final_error_3d_m: float
    rmse_e: float
    rmse_n: float
    rmse_u: float
    matched_samples: int

    def to_dict(self) -> dict:
        return asdict(self)


def align_by_time(t_a: np.ndarray, t_b: np.ndarray,
                  tol: float = ALIGN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Indices (ia, ib) pairing each a-sample with its nearest b-sample
    within ``tol`` seconds."""
    t_a = np.asarray(t_a, dtype=float)
    t_b = np.asarray(t_b, dtype=float)
    pos = np.searchsorted(t_b, t_a)
    left = np.clip(pos - 1, 0, len(t_b) - 1)
    right = np.clip(pos, 0, len(t_b) - 1)
    pick = np.where(np.abs(t_b[right] - t_a) < np.abs(t_b[left] - t_a), right, left)
    ok = np.abs(t_b[pick] - t_a) <= tol
    return np.nonzero(ok)[0], pick[ok]


def detect_stops(t: np.ndarray, speed: np.ndarray,
                 speed_eps: float = 1e-3, min_duration: float = 1.0) -> list[tuple[float, float]]:
    """Maximal intervals where speed stays below ``speed_eps`` for at least
    ``min_duration`` seconds, as (start, end) times."""
    still = speed < speed_eps
    stops = []
    start = None
    for i in range(len(t)):
        if still[i] and start is None:
            start = t[i]
        elif not still[i] and start is not None:
            if t[i - 1] - start >= min_duration:
                stops.append((start, t[i - 1]))
            start = None
    if start is not None and t[-1] - start >= min_duration:
        stops.append((start, t[-1]))
    return stops


def evaluate(est: np.ndarray, truth: np.ndarray,
              align_tol: float = ALIGN_TOL) -> MetricsReport:
    """Score an estimate trace against truth.

    ``est`` columns: t, e, n, u (extra columns ignored). ``truth`` columns:
    t, e, n, u, v_e, v_n, v_u.
    """
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    ie, it = align_by_time(est[:, 0], truth[:, 0], align_tol)
    if ie.size == 0:
        raise ValueError("no estimate samples align with truth")
    err = est[ie, 1:4] - truth[it, 1:4]

    d_steps = np.linalg.norm(np.diff(truth[:, 1:4], axis=0), axis=1)
    distance = float(np.sum(d_steps))
    duration = float(truth[-1, 0] - truth[0, 0])

    speed = np.linalg.norm(truth[:, 4:7], axis=1)
    stops = detect_stops(truth[:, 0], speed)
    # exclude any leading pre-drive interval from the stop count
    stops = [s for s in stops if s[0] > truth[0, 0] + 1e-9]
    stopped_time = float(sum(e - s for s, e in stops))

    final_err = float(np.linalg.norm(err[-1]))
    horiz = np.linalg.norm(err[:, 0:2], axis=1)
    rmse = np.sqrt(np.mean(err ** 2, axis=0))
    return MetricsReport(
        traversed_distance_m=distance,
        traversal_time_s=duration,
        stop_count=len(stops),
        stop_rate_pct=100.0 * stopped_time / duration if duration > 0 else 0.0,
        enu_error_pct=100.0 * final_err / distance if distance > 0 else float("inf"),
        median_horizontal_error_m=float(np.median(horiz)),
        final_error_3d_m=final_err,
        rmse_e=float(rmse[0]),
        rmse_n=float(rmse[1]),
        rmse_u=float(rmse[2]),
        matched_samples=int(ie.size),
    )
