"""Command-line entry point.

Subcommands:
  simulate   build a scenario and emit the dataset (plus truth POVM/probes)
  fit        reconstruct a POVM from a dataset CSV and probe JSON
  benchmark  full pipeline (build -> simulate -> fit -> score) per config
  sweep      grid over N / k / noise strength / method combinations

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import experiments
from .engine import OptimConfig, fit as run_fit
from .errors import ConfigError, NumericError
from .experiments import ExperimentConfig, build_scenario, run_experiment
from .povm import validate_povm
from .probes import ProbabilityTable, ProbeEnsemble, generate_dataset


def _apply_overrides(raw: dict, args) -> dict:
    if args.seed is not None:
        raw["base_seed"] = args.seed
    if args.out is not None:
        raw["out_prefix"] = args.out
    if args.deterministic:
        raw["deterministic"] = True
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value or a.b=value")
        key, value = item.split("=", 1)
        target = raw
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
            if not isinstance(target, dict):
                raise ConfigError(f"cannot override through non-mapping key {part!r}")
        target[parts[-1]] = json.loads(value) if _looks_like_json(value) else value
    return raw


def _looks_like_json(value: str) -> bool:
    try:
        json.loads(value)
        return True
    except json.JSONDecodeError:
        return False


def _load_config(args) -> tuple[ExperimentConfig, dict]:
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    raw = _apply_overrides(raw, args)
    sweep = raw.pop("sweep", {})
    return ExperimentConfig.from_dict(raw), sweep


def _cmd_simulate(args) -> int:
    config, _ = _load_config(args)
    truth, probes = build_scenario(config, config.base_seed)
    table = generate_dataset(truth, probes, config.noise)
    experiments._ensure_parent(config.out_prefix)
    table.save_csv(f"{config.out_prefix}_data.csv")
    truth.save(f"{config.out_prefix}_povm.json")
    probes.save(f"{config.out_prefix}_probes.json")
    print(f"wrote {config.out_prefix}_data.csv ({table.n_outcomes}x{table.n_probes})")
    return 0


def _cmd_fit(args) -> int:
    config, _ = _load_config(args)
    table = ProbabilityTable.load_csv(args.data)
    probes = ProbeEnsemble.load(args.probes)
    import dataclasses

    optimizer = dataclasses.replace(config.optimizer, seed=config.base_seed)
    est, trace = run_fit(table, probes, optimizer, metric_every=config.metric_every)
    experiments._ensure_parent(config.out_prefix)
    est.save(f"{config.out_prefix}_povm.json")
    trace.save_csv(f"{config.out_prefix}_trace.csv", deterministic=config.deterministic)
    report = validate_povm(est, 1e-7)
    print(
        f"fitted {est.n_outcomes} effects (dim {est.dim}); final loss "
        f"{trace.losses[-1]:.6e}; valid at 1e-7: {report.is_valid}"
    )
    return 0


def _cmd_benchmark(args) -> int:
    config, _ = _load_config(args)
    report = run_experiment(config)
    paths = experiments.emit_report(report, "csv")
    paths += experiments.emit_report(report, "json")
    for row in report.rows:
        print(
            f"{row['scenario']}[{row['param']}] {row['method']} repeat {row['repeat']}: "
            f"mean_frob={row['mean_frob']:.3e} mean_wass={row['mean_wass']:.3e}"
        )
    print("reports: " + ", ".join(paths))
    return 0


def _cmd_sweep(args) -> int:
    config, sweep = _load_config(args)
    if not sweep:
        raise ConfigError("sweep subcommand needs a 'sweep' section in the config")
    rows, _ = experiments.run_sweep(config, sweep)
    path = f"{config.out_prefix}_sweep_summary.csv"
    experiments.write_summary_csv(rows, path, config.deterministic)
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="povmfit",
        description="POVM reconstruction benchmarks via mini-batch SGD",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override base seed")
        p.add_argument("--out", default=None, help="override output path prefix")
        p.add_argument("--deterministic", action="store_true",
                       help="byte-stable outputs (wall-clock fields left empty)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override any config field (dotted path, JSON value)")

    add_common(sub.add_parser("simulate", help="emit dataset, truth POVM and probes"))
    p_fit = sub.add_parser("fit", help="fit a POVM to an existing dataset")
    add_common(p_fit)
    p_fit.add_argument("--data", required=True, help="probability table CSV")
    p_fit.add_argument("--probes", required=True, help="probe ensemble JSON")
    add_common(sub.add_parser("benchmark", help="full pipeline per config"))
    add_common(sub.add_parser("sweep", help="grid over N/k/noise/method"))
    return parser


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "benchmark": _cmd_benchmark,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        # ConfigError, DimensionError and unreadable inputs all count as
        # configuration problems
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
