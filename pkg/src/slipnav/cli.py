"""Command line front end.

Subcommands: ``simulate`` (closed-loop synthetic run), ``replay``
(open-loop over a recorded log), ``evaluate`` (score a trace against
truth), ``forecast-demo`` (one slip forecast from a log, dumped as a
sigma_h(t) CSV). Exit codes: 0 success, 1 runtime failure, 2 bad
arguments or configuration.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .autonomy import AutonomyConfig
from .eskf import FilterConfig
from .metrics import evaluate as evaluate_metrics
from .nav_core import VehicleParams
from .pipeline import MODES, PipelineConfig, replay, simulate
from .runlog import (
    RunLogError,
    read_runlog,
    read_trace,
    write_decisions,
    write_runlog,
    write_trace,
)
from .sim import SensorErrorModel, terrain_presets

__all__ = ["main", "load_config"]

_SECTIONS = {
    "filter": FilterConfig,
    "autonomy": AutonomyConfig,
    "vehicle": VehicleParams,
    "sim": SensorErrorModel,
    "pipeline": PipelineConfig,
}
_PIPELINE_SCALARS = ("mode", "periodic_interval", "use_zupt", "use_nhc",
                     "zupt_on_stationary")


class ConfigError(ValueError):
    pass


def _coerce(raw: str, current):
    if isinstance(current, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected boolean, got {raw!r}")
    if isinstance(current, (int, np.integer)) and not isinstance(current, bool):
        return int(raw)
    if isinstance(current, (float, np.floating)):
        return float(raw)
    if isinstance(current, np.ndarray):
        vals = [float(x) for x in raw.split(",")]
        return np.array(vals)
    return raw


def load_config(path: str | None) -> PipelineConfig:
    """Parse a flat key=value file with section-prefixed keys, e.g.
    ``filter.R_odo=0.04`` or ``autonomy.epsilon=2.0``."""
    overrides: dict[str, dict] = {name: {} for name in _SECTIONS}
    if path is not None:
        try:
            lines = open(path).read().splitlines()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        for lineno, line in enumerate(lines, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, _, raw = line.partition("=")
            key = key.strip()
            raw = raw.strip()
            if "." not in key:
                raise ConfigError(
                    f"{path}:{lineno}: key must be section.field, got {key!r}")
            section, _, fieldname = key.partition(".")
            if section not in _SECTIONS:
                raise ConfigError(
                    f"{path}:{lineno}: unknown section {section!r} "
                    f"(expected one of {sorted(_SECTIONS)})")
            cls = _SECTIONS[section]
            names = {f.name for f in dataclasses.fields(cls)}
            if section == "pipeline":
                names = set(_PIPELINE_SCALARS)
            if fieldname not in names:
                raise ConfigError(
                    f"{path}:{lineno}: unknown field {fieldname!r} in "
                    f"section {section!r}")
            defaults = cls() if section != "pipeline" else PipelineConfig()
            try:
                overrides[section][fieldname] = _coerce(raw, getattr(defaults, fieldname))
            except (ValueError, ConfigError) as e:
                raise ConfigError(f"{path}:{lineno}: {e}") from None
    try:
        cfg = PipelineConfig(
            filter=FilterConfig(**overrides["filter"]),
            autonomy=AutonomyConfig(**overrides["autonomy"]),
            vehicle=VehicleParams(**overrides["vehicle"]),
            errors=SensorErrorModel(**overrides["sim"]),
            **overrides["pipeline"],
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return cfg


def _apply_cli_overrides(cfg: PipelineConfig, args) -> PipelineConfig:
    auto = cfg.autonomy
    updates = {}
    if getattr(args, "epsilon", None) is not None:
        updates["epsilon"] = args.epsilon
    if getattr(args, "window", None) is not None:
        updates["window_duration"] = args.window
    if getattr(args, "horizon", None) is not None:
        updates["horizon"] = args.horizon
    if updates:
        cfg.autonomy = dataclasses.replace(auto, **updates)
    if getattr(args, "mode", None) is not None:
        cfg.mode = args.mode
        cfg.__post_init__()
    return cfg


def _write_outputs(out_dir: str, trace, decisions, report) -> None:
    os.makedirs(out_dir, exist_ok=True)
    write_trace(os.path.join(out_dir, "est.csv"), trace)
    write_decisions(os.path.join(out_dir, "decisions.csv"), decisions)
    if report is not None:
        with open(os.path.join(out_dir, "metrics.json"), "w") as f:
            json.dump(report.to_dict(), f, indent=2)
            f.write("\n")


def _cmd_simulate(args) -> int:
    presets = terrain_presets()
    if args.terrain not in presets:
        print(f"error: unknown terrain {args.terrain!r} "
              f"(choose from {sorted(presets)})", file=sys.stderr)
        return 2
    cfg = load_config(args.config)
    cfg = _apply_cli_overrides(cfg, args)
    result = simulate(presets[args.terrain], args.distance, cfg, args.seed)
    report = evaluate_metrics(result.trace, result.log.truth)
    write_runlog(args.out, result.log)
    _write_outputs(args.out, result.trace, result.decisions, report)
    print(f"terrain={args.terrain} mode={cfg.mode} seed={args.seed}")
    print(f"distance={report.traversed_distance_m:.1f} m in "
          f"{report.traversal_time_s:.1f} s, stops={report.stop_count}")
    print(f"final 3-D error={report.final_error_3d_m:.2f} m "
          f"({report.enu_error_pct:.2f}% of distance)")
    print(f"outputs in {args.out}")
    return 0


def _cmd_replay(args) -> int:
    cfg = load_config(args.config)
    cfg = _apply_cli_overrides(cfg, args)
    run = read_runlog(args.log)
    trace, decisions, _ = replay(run, cfg)
    report = None
    if run.truth is not None:
        report = evaluate_metrics(trace, run.truth)
    _write_outputs(args.out, trace, decisions, report)
    if report is not None:
        print(f"final 3-D error={report.final_error_3d_m:.2f} m "
              f"({report.enu_error_pct:.2f}% of distance)")
    print(f"outputs in {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    est = read_trace(args.est)
    truth = np.loadtxt(args.truth, delimiter=",", skiprows=1)
    report = evaluate_metrics(est, truth)
    text = json.dumps(report.to_dict(), indent=2)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    print(text)
    return 0


def _cmd_forecast_demo(args) -> int:
    cfg = load_config(args.config)
    cfg = _apply_cli_overrides(cfg, args)
    cfg.keep_forecasts = True
    run = read_runlog(args.log)
    _, _, pipe = replay(run, cfg)
    if not pipe.forecast_results:
        print("error: log too short; no slip window completed", file=sys.stderr)
        return 1
    fc = pipe.forecast_results[0]
    with open(args.out, "w") as f:
        f.write("t_s,sigma_h_m\n")
        for t, s in zip(fc.t, fc.sigma_h):
            f.write(f"{float(t)!r},{float(s)!r}\n")
    stop = "none within horizon" if fc.stop_time is None else f"{fc.stop_time:.2f} s"
    print(f"forecast at t={fc.t[0]:.2f} s, epsilon={fc.epsilon} m, "
          f"predicted stop: {stop}")
    print(f"sigma_h curve in {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="slipnav",
        description="Slip-adaptive wheel-inertial dead reckoning with "
                    "scheduled zero-velocity stops.")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="closed-loop synthetic run")
    sim.add_argument("--terrain", default="unpaved",
                     help="terrain preset (paved, unpaved, gravel, rough)")
    sim.add_argument("--distance", type=float, default=150.0, help="meters")
    sim.add_argument("--mode", choices=MODES, default=None)
    sim.add_argument("--epsilon", type=float, default=None,
                     help="horizontal sigma threshold, m")
    sim.add_argument("--window", type=float, default=None,
                     help="slip window duration, s")
    sim.add_argument("--horizon", type=float, default=None,
                     help="forecast horizon, s")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--config", default=None, help="key=value config file")
    sim.add_argument("--out", required=True, help="output directory")
    sim.set_defaults(func=_cmd_simulate)

    rep = sub.add_parser("replay", help="open-loop filter run over a log")
    rep.add_argument("--log", required=True, help="run directory")
    rep.add_argument("--mode", choices=MODES, default=None)
    rep.add_argument("--epsilon", type=float, default=None)
    rep.add_argument("--window", type=float, default=None)
    rep.add_argument("--horizon", type=float, default=None)
    rep.add_argument("--config", default=None)
    rep.add_argument("--out", required=True)
    rep.set_defaults(func=_cmd_replay)

    ev = sub.add_parser("evaluate", help="score an estimate trace against truth")
    ev.add_argument("--est", required=True, help="est.csv path")
    ev.add_argument("--truth", required=True, help="truth.csv path")
    ev.add_argument("--out", default=None, help="optional metrics.json path")
    ev.set_defaults(func=_cmd_evaluate)

    fd = sub.add_parser("forecast-demo",
                        help="run one slip forecast from a log")
    fd.add_argument("--log", required=True, help="run directory")
    fd.add_argument("--epsilon", type=float, default=None)
    fd.add_argument("--window", type=float, default=None)
    fd.add_argument("--horizon", type=float, default=None)
    fd.add_argument("--config", default=None)
    fd.add_argument("--out", required=True, help="sigma_h CSV path")
    fd.set_defaults(func=_cmd_forecast_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (RunLogError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
