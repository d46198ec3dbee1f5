"""Command-line entry point.

Exit codes: 0 success; 2 estimates produced but the backtest failed;
3 invalid configuration or arguments; 4 numeric failure during training.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .backtest import run_backtest
from .nn import TrainingDivergedError, load_params
from .pipeline import (ExperimentConfig, build_model, default_backtest_sets,
                       emit_outputs, run_experiment, run_reference,
                       simulate_pairs_chunked, phase_seed)
from .sampling import mean_shift

EXIT_OK = 0
EXIT_BACKTEST_FAILED = 2
EXIT_INVALID_CONFIG = 3
EXIT_NUMERIC_FAILURE = 4


def _load_config(path: str, seed=None, out=None) -> ExperimentConfig:
    with open(path) as fh:
        doc = json.load(fh)
    if seed is not None:
        doc["seed"] = seed
        doc.setdefault("training", {})["seed"] = seed
    if out is not None:
        doc["output_dir"] = out
    return ExperimentConfig.from_dict(doc)


def _cmd_run(args) -> int:
    config = _load_config(args.config, args.seed, args.out)
    result = run_experiment(config, threads=args.threads)
    out_dir = config.output_dir or "."
    paths = emit_outputs(result, out_dir)
    for measure, est in result.estimates.items():
        print(f"{config.model} [{measure}] "
              f"VaR_{config.alpha_var:.3f} = {est['var'].var:.4f}  "
              f"ES_{config.alpha_es:.3f} = {est['es'].es:.4f}")
    print(f"backtest {'passed' if result.backtest.passed else 'FAILED'}; "
          f"outputs in {Path(out_dir).resolve()}")
    if not result.backtest.passed:
        return EXIT_BACKTEST_FAILED
    return EXIT_OK


def _cmd_reference(args) -> int:
    doc = run_reference(args.model, args.alpha_var, args.alpha_es, args.n, args.seed)
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def _cmd_backtest(args) -> int:
    arch, params = load_params(args.params)
    config = _load_config(args.config)
    if arch.input_dim != config.architecture.input_dim:
        raise ValueError("network input dimension does not match the configured model")
    model = build_model(config.model)
    spec = None
    if config.measure == "is":
        profile = model.monotonicity_profile(seed=phase_seed(config.seed, "pilot"))
        spec = mean_shift(model.loading_matrix, profile, config.is_level)
    pairs = simulate_pairs_chunked(model, config.n_test, 1,
                                   phase_seed(config.seed, "test"), spec)
    sets = default_backtest_sets(config.model, pairs.x)
    report = run_backtest(params, arch, pairs.x, pairs.y, sets,
                          config.backtest_multiplier)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK if report.passed else EXIT_BACKTEST_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riskcap",
                                     description="Monte Carlo VaR/ES risk engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured experiment end to end")
    p_run.add_argument("--config", required=True, help="experiment config JSON")
    p_run.add_argument("--seed", type=int, default=None, help="override the master seed")
    p_run.add_argument("--threads", type=int, default=None,
                       help="simulation worker cap (default: serial)")
    p_run.add_argument("--out", default=None, help="output directory override")
    p_run.set_defaults(func=_cmd_run)

    p_ref = sub.add_parser("reference", help="compute or echo reference risk figures")
    p_ref.add_argument("--model", required=True, choices=["put", "options20", "va-gmib"])
    p_ref.add_argument("--n", type=int, default=1_000_000, help="reference sample size")
    p_ref.add_argument("--alpha-var", type=float, default=0.995, dest="alpha_var")
    p_ref.add_argument("--alpha-es", type=float, default=0.99, dest="alpha_es")
    p_ref.add_argument("--seed", type=int, default=0)
    p_ref.add_argument("--out", default=None, help="also write the JSON here")
    p_ref.set_defaults(func=_cmd_reference)

    p_bt = sub.add_parser("backtest", help="backtest a saved network on fresh data")
    p_bt.add_argument("--params", required=True, help="network parameter JSON")
    p_bt.add_argument("--config", required=True, help="experiment config JSON")
    p_bt.add_argument("--out", default=None, help="also write the report here")
    p_bt.set_defaults(func=_cmd_backtest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID_CONFIG if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC_FAILURE
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_CONFIG


if __name__ == "__main__":
    sys.exit(main())
