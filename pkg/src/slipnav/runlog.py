"""On-disk run logs: plain CSV streams plus a key=value metadata file.

A run directory holds ``imu.csv`` (t_s, wx, wy, wz, fx, fy, fz at the IMU
rate), ``odo.csv`` (t_s, w_fl, w_fr, w_rl, w_rr at the odometry rate),
``truth.csv`` (t_s, e_m, n_m, u_m, v_e, v_n, v_u; optional for field logs),
and ``meta.txt``. Floats are written with shortest round-trip formatting so
a write/read cycle is bit-exact.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RunLogError",
    "RunLog",
    "write_runlog",
    "read_runlog",
    "write_trace",
    "read_trace",
    "write_decisions",
    "TRACE_HEADER",
    "DECISION_HEADER",
]

IMU_HEADER = "t_s,wx,wy,wz,fx,fy,fz"
ODO_HEADER = "t_s,w_fl,w_fr,w_rl,w_rr"
TRUTH_HEADER = "t_s,e_m,n_m,u_m,v_e,v_n,v_u"
TRACE_HEADER = "t_s,e_m,n_m,u_m,v_e,v_n,v_u,sigma_h_m"
DECISION_HEADER = "t_s,mode,predicted_stop_t_s,epsilon_m,sigma_h_at_horizon_m"


class RunLogError(ValueError):
    """Malformed log content; the message carries file and line number."""


@dataclass
class RunLog:
    """In-memory run log. ``imu`` is (N,7), ``odo`` (M,5), ``truth``
    (K,7) or None, column orders matching the CSV headers."""

    imu: np.ndarray
    odo: np.ndarray
    truth: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def _format_row(row) -> str:
    return ",".join(repr(float(x)) for x in row)


def _write_csv(path: str, header: str, rows: np.ndarray) -> None:
    with open(path, "w") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(_format_row(row) + "\n")


def _read_csv(path: str, header: str) -> np.ndarray:
    ncols = len(header.split(","))
    rows = []
    with open(path) as f:
        first = f.readline().rstrip("\n")
        if first != header:
            raise RunLogError(f"{path}:1: expected header '{header}', got '{first}'")
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != ncols:
                raise RunLogError(
                    f"{path}:{lineno}: expected {ncols} fields, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as e:
                raise RunLogError(f"{path}:{lineno}: {e}") from None
    if not rows:
        raise RunLogError(f"{path}: no data rows")
    out = np.array(rows)
    if np.any(np.diff(out[:, 0]) <= 0):
        bad = int(np.nonzero(np.diff(out[:, 0]) <= 0)[0][0])
        raise RunLogError(
            f"{path}:{bad + 3}: time tags must be strictly increasing")
    return out


def write_runlog(directory: str, log: RunLog) -> None:
    os.makedirs(directory, exist_ok=True)
    _write_csv(os.path.join(directory, "imu.csv"), IMU_HEADER, log.imu)
    _write_csv(os.path.join(directory, "odo.csv"), ODO_HEADER, log.odo)
    if log.truth is not None:
        _write_csv(os.path.join(directory, "truth.csv"), TRUTH_HEADER, log.truth)
    with open(os.path.join(directory, "meta.txt"), "w") as f:
        for k, v in log.meta.items():
            f.write(f"{k}={v}\n")


def read_runlog(directory: str) -> RunLog:
    imu = _read_csv(os.path.join(directory, "imu.csv"), IMU_HEADER)
    odo = _read_csv(os.path.join(directory, "odo.csv"), ODO_HEADER)
    truth_path = os.path.join(directory, "truth.csv")
    truth = _read_csv(truth_path, TRUTH_HEADER) if os.path.exists(truth_path) else None
    meta = {}
    meta_path = os.path.join(directory, "meta.txt")
    if os.path.exists(meta_path):
        with open(meta_path) as f:
            for lineno, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                if "=" not in line:
                    raise RunLogError(f"{meta_path}:{lineno}: expected key=value")
                k, _, v = line.partition("=")
                meta[k.strip()] = v.strip()
    return RunLog(imu=imu, odo=odo, truth=truth, meta=meta)


def write_trace(path: str, rows: np.ndarray) -> None:
    """Estimated trajectory: t_s, ENU position, ENU velocity, sigma_h."""
    _write_csv(path, TRACE_HEADER, rows)


def read_trace(path: str) -> np.ndarray:
    return _read_csv(path, TRACE_HEADER)


def write_decisions(path: str, rows: list[tuple]) -> None:
    """Decision log: one row per scheduler event/forecast."""
    with open(path, "w") as f:
        f.write(DECISION_HEADER + "\n")
        for t, mode, stop_t, eps, sig in rows:
            stop_s = "" if stop_t is None else repr(float(stop_t))
            sig_s = "" if sig is None else repr(float(sig))
            f.write(f"{repr(float(t))},{mode},{stop_s},{repr(float(eps))},{sig_s}\n")
