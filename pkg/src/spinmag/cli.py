"""Command-line front end.

Subcommands::

    spinmag spin-noise  --config cfg.toml --out dir [--seed N] [--duration S] [--frame F]
    spinmag sensitivity --config cfg.toml --out dir [--seed N] [--duration S] [--frame F]
    spinmag predict     --config cfg.toml [--seed N] [--duration S] [--frame F]

``--config`` also accepts a ``manifest.json`` from a previous run for exact
reproduction.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import AnalysisError, ConfigError, ParameterError
from .pipelines import run_predict, run_sensitivity, run_spin_noise

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _add_common(parser: argparse.ArgumentParser, with_out: bool) -> None:
    parser.add_argument("--config", required=True, help="experiment config TOML (or a manifest.json)")
    if with_out:
        parser.add_argument("--out", required=True, help="output directory for CSV/JSON artifacts")
    parser.add_argument("--seed", type=int, default=None, help="override the configured RNG seed")
    parser.add_argument("--duration", type=float, default=None, metavar="S", help="override run duration (s)")
    parser.add_argument(
        "--frame", choices=("carrier", "baseband"), default=None, help="override the simulation frame"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinmag",
        description="Simulate and analyze spin-noise-limited scalar atomic magnetometers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_noise = sub.add_parser("spin-noise", help="raw polarimeter noise spectrum and Lorentzian fit")
    _add_common(p_noise, with_out=True)

    p_sens = sub.add_parser("sensitivity", help="lock-in noise, calibration, sensitivity and bandwidth")
    _add_common(p_sens, with_out=True)

    p_pred = sub.add_parser("predict", help="closed-form predictions (no simulation), JSON to stdout")
    _add_common(p_pred, with_out=False)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be a non-negative integer", file=sys.stderr)
        return EXIT_CONFIG
    kwargs = dict(seed=args.seed, duration_s=args.duration, frame=args.frame)
    try:
        if args.command == "predict":
            report = run_predict(args.config, **kwargs)
            print(json.dumps(report, indent=2, sort_keys=True))
        elif args.command == "spin-noise":
            report = run_spin_noise(args.config, args.out, **kwargs)
            _summarize_spin_noise(report)
        else:
            report = run_sensitivity(args.config, args.out, **kwargs)
            _summarize_sensitivity(report)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AnalysisError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _summarize_spin_noise(report: dict) -> None:
    if report.get("degenerate"):
        print("spin-noise: degenerate spectrum (no spin peak); see spin_noise_report.json")
        return
    fit = report["fit"]
    ratio = fit["peak_floor_ratio"]
    print(
        "spin-noise: center {:.6g} Hz, HWHM {:.4g} Hz, peak/floor {:.3g}, "
        "phi_rms {:.4g} rad (predicted {:.4g})".format(
            fit["center_hz"],
            fit["hwhm_hz"],
            ratio if ratio is not None else float("nan"),
            report["phi_rms_measured_rad"],
            report["phi_rms_predicted_rad"],
        )
    )


def _summarize_sensitivity(report: dict) -> None:
    bw = report["measured_bandwidth_hz"]
    print(
        "sensitivity: DC {:.4g} T/sqrt(Hz), bandwidth {} Hz "
        "(closed form {:.4g}, flat-noise reference {:.4g})".format(
            report["dc_sensitivity_tesla_per_sqrt_hz"],
            f"{bw:.4g}" if bw is not None else "beyond Nyquist",
            report["closed_form_bandwidth_hz"],
            report["demolition_closed_form_bandwidth_hz"],
        )
    )


if __name__ == "__main__":
    raise SystemExit(main())
