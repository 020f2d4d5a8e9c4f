"""Command-line interface: ``run``, ``sweep`` and ``presets``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import load_config, parse_config_text
from .errors import ConfigError, PilotQKDError
from .pipeline import run_scenario, run_sweep
from .presets import PRESETS, get_preset, preset_from_text

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_CHECK = 4

logger = logging.getLogger("pilotqkd")


def parse_grid(text):
    """``a:b:n`` (inclusive linspace) or a comma-separated list."""
    try:
        if ":" in text:
            a, b, n = text.split(":")
            n = int(n)
            if n < 1:
                raise ValueError
            return np.linspace(float(a), float(b), n).tolist()
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad grid {text!r}; expected a:b:n or v1,v2,...", field="grid") from None
    if not values:
        raise ConfigError("empty grid", field="grid")
    return values


def resolve_scenario(source):
    """Config and preset (if any) from a preset name or a config file."""
    if source in PRESETS:
        preset = get_preset(source)
        return preset.config, preset
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config_text(text), preset_from_text(text)


def _cmd_run(args):
    cfg, preset = resolve_scenario(args.config)
    if args.check and preset is None:
        logger.warning("no preset header found; --check has nothing to compare")
    report = run_scenario(cfg, args.seed, args.out, preset=preset)
    est, rate = report["estimation"], report["key_rate"]
    print(f"SNR {est['snr']:.4g}  xi {100 * est['xi_total']:.4g} %SNU  "
          f"xi_S {100 * est['xi_trusted']:.4g} %SNU  R_S {rate['key_rate'] / 1e6:.4g} Mb/s")
    if args.out is not None:
        print(f"wrote {Path(args.out) / 'report.json'}")
    if args.check and "check" in report:
        for name, row in report["check"]["metrics"].items():
            status = {True: "pass", False: "FAIL", None: "info"}[row["pass"]]
            print(f"  {status:4s} {name}: measured {row['measured']:.4g}, reported {row['value']:.4g}")
        if not report["check"]["passed"]:
            return EXIT_CHECK
    return EXIT_OK


def _cmd_sweep(args):
    cfg, _ = resolve_scenario(args.config)
    grid = parse_grid(args.grid)
    rows, summary = run_sweep(cfg, args.param, grid, args.seed, args.out, workers=args.workers)
    param = summary["parameter"]
    for r in rows:
        print(f"{param}={r[param]:.6g}  xi {100 * r['xi_total_raw']:.4g} %SNU  "
              f"xi_S {100 * r['xi_trusted_raw']:.4g} %SNU  R_S {r['key_rate'] / 1e6:.4g} Mb/s")
    trend = summary["trend"]["xi_total_raw"]
    print(f"xi minimum at {param}={trend['x_at_min']:.6g}; increasing beyond: "
          f"{trend['increasing_beyond_min']}; max slope {trend['max_slope']:.4g}")
    return EXIT_OK


def _cmd_presets(args):
    if args.action == "list":
        for name, p in PRESETS.items():
            print(f"{name:28s} {p.description}")
        return EXIT_OK
    if not args.name:
        raise ConfigError("presets emit needs a preset name")
    try:
        preset = get_preset(args.name)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    sys.stdout.write(preset.to_text())
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="pilotqkd", description="Pilot-tone CV-QKD link simulator.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one frame")
    run.add_argument("config", help="config file or preset name")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--check", action="store_true", help="compare against the preset's reported values")
    run.add_argument("--out", type=Path, default=None, help="directory for report.json and CSV files")
    run.set_defaults(func=_cmd_run)

    sweep = sub.add_parser("sweep", help="sweep one parameter")
    sweep.add_argument("config", help="config file or preset name")
    sweep.add_argument("--param", required=True,
                       help="relative_filter_bandwidth (B_fil), filter_bandwidth, fiber_length_km, "
                            "n_classical_channels or photons_per_symbol")
    sweep.add_argument("--grid", required=True, help="a:b:n or v1,v2,...")
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--out", type=Path, default=None)
    sweep.set_defaults(func=_cmd_sweep)

    presets = sub.add_parser("presets", help="list or emit presets")
    presets.add_argument("action", choices=("list", "emit"))
    presets.add_argument("name", nargs="?")
    presets.set_defaults(func=_cmd_presets)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PilotQKDError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION


if __name__ == "__main__":
    sys.exit(main())
