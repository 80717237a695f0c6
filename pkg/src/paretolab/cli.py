"""Command-line front end.

    paretolab run <config.json> [--seed N]
    paretolab estimate <samples.csv>
    paretolab plotdata <samples.csv> --bins B

Exit codes: 0 success, 1 validation error (bad config / bad input data),
2 runtime error.
"""

import argparse
import os
import sys

from .core import (DomainError, InsufficientDataError, ParameterError)
from .inference import fit_tail
from . import experiments, runio


def _cmd_run(args):
    with open(args.config) as fh:
        text = fh.read()
    config = runio.parse_config(text, seed_override=args.seed)
    runner = {
        "baseline": experiments.run_baseline,
        "conservation": experiments.run_conservation,
        "intervention": experiments.run_intervention,
        "thermalization": experiments.run_thermalization,
    }[config.experiment]
    report = runner(config)
    os.makedirs(config.output_dir, exist_ok=True)
    csv_path = os.path.join(config.output_dir,
                            f"{config.experiment}_timeseries.csv")
    json_path = os.path.join(config.output_dir,
                             f"{config.experiment}_summary.json")
    runio.write_timeseries(report, csv_path)
    runio.write_summary(report, json_path)
    print(f"config digest: {config.digest}")
    for name, v in report.verdicts.items():
        print(f"{config.experiment}.{name}: {v['status']}"
              + (f" (value={v['value']}, tolerance={v['tolerance']})"
                 if v["value"] is not None else ""))
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")


def _cmd_estimate(args):
    samples = runio.read_samples(args.samples)
    fit = fit_tail(samples)
    print(f"alpha_hat: {fit.alpha_hat!r}")
    print(f"x_min: {fit.x_min!r}")
    print(f"stderr: {fit.stderr!r}")
    print(f"ks_distance: {fit.ks_distance!r}")
    print(f"n_tail: {fit.n_tail}")


def _cmd_plotdata(args):
    samples = runio.read_samples(args.samples)
    stem = os.path.splitext(args.samples)[0]
    ccdf_path, hist_path = stem + "_ccdf.csv", stem + "_hist.csv"
    runio.emit_plot_data(samples, args.bins, ccdf_path, hist_path)
    print(f"wrote {ccdf_path}")
    print(f"wrote {hist_path}")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="paretolab")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    p_run.set_defaults(func=_cmd_run)
    p_est = sub.add_parser("estimate", help="fit the tail of a sample file")
    p_est.add_argument("samples")
    p_est.set_defaults(func=_cmd_estimate)
    p_plot = sub.add_parser("plotdata", help="emit CCDF and histogram data")
    p_plot.add_argument("samples")
    p_plot.add_argument("--bins", type=int, required=True)
    p_plot.set_defaults(func=_cmd_plotdata)
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (runio.ConfigError, ParameterError, DomainError,
            InsufficientDataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
