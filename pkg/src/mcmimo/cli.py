"""Config-driven command line front end.

Subcommands:
    run              one scenario, per-drop table
    sweep            one scenario swept along an axis (M, K, n_clusters, G)
    compare-configs  grouping strategies x schedules x scenario shapes

Every invocation writes manifest.json first, then results.csv / results.json
and a rendered figure into the output directory.  Exit codes: 0 success,
2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from datetime import datetime, timezone

from . import report
from .config import (
    SWEEP_AXES,
    ConfigError,
    load_config,
    parse_scenario_shape,
)
from .harness import ScenarioConfig, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
FULL_SCALE_DROPS = 50
FULL_SCALE_REALIZATIONS = 50


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcmimo",
        description="Monte Carlo link simulator for multicast massive MIMO downlink")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", required=True, help="path to the experiment config")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")
        sp.add_argument("--out", default=None,
                        help="output directory (default: out/<command>)")
        sp.add_argument("--workers", type=int, default=1,
                        help="drop-level process parallelism")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="config override, repeatable")
        sp.add_argument("--full-scale", action="store_true",
                        help="run the full 50x50 Monte Carlo instead of desk scale")

    add_common(sub.add_parser("run", help="run one scenario"))
    sp = sub.add_parser("sweep", help="sweep a scenario along one axis")
    add_common(sp)
    sp.add_argument("--axis", default=None, help=f"one of {', '.join(SWEEP_AXES)}")
    sp.add_argument("--values", default=None, help="comma-separated integer values")
    add_common(sub.add_parser("compare-configs",
                              help="grouping strategies across scenario shapes"))
    return parser


def _parse_cli_values(text: str) -> list:
    tokens = [t for t in (tok.strip() for tok in text.split(",")) if t]
    if not tokens:
        raise ConfigError("sweep values are empty")
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise ConfigError(f"sweep values must be integers, got {text!r}")


def _apply_axis(scenario: ScenarioConfig, axis: str, value: int) -> ScenarioConfig:
    if axis == "M":
        return dataclasses.replace(scenario, M=value)
    if axis == "K":
        if value % scenario.n_clusters:
            raise ConfigError(
                f"K={value} is not divisible by n_clusters={scenario.n_clusters}")
        return dataclasses.replace(scenario, users_per_cluster=value // scenario.n_clusters)
    if axis == "n_clusters":
        return dataclasses.replace(scenario, n_clusters=value)
    if axis == "G":
        return dataclasses.replace(scenario, G=value, strategy="fixed")
    raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")


def _empty_cell(status: str) -> dict:
    return {"status": status, "mean_ase": 0.0, "std_ase": 0.0, "mean_ase_one": 0.0,
            "mean_ase_two": 0.0, "mean_ase_best": 0.0, "mean_min_se": 0.0,
            "infeasible_rate": 1.0, "n_drops": 0, "n_errors": 0}


def _cmd_run(scenario: ScenarioConfig, args) -> list:
    result = run_experiment(scenario, workers=args.workers)
    return report.write_run_outputs(result, args.out_dir)


def _cmd_sweep(scenario: ScenarioConfig, axis: str, values: list, args) -> list:
    rows = []
    for value in values:
        base = {"axis": axis, "value": value}
        try:
            cell_cfg = _apply_axis(scenario, axis, value).validate()
        except (ConfigError, ValueError) as exc:
            print(f"sweep cell {axis}={value} skipped: {exc}", file=sys.stderr)
            rows.append({**base, **_empty_cell("error")})
            continue
        result = run_experiment(cell_cfg, workers=args.workers)
        summary = result.summary()
        rows.append({**base, "status": report.cell_status(summary), **summary})
    return report.write_sweep_outputs(rows, axis, {"scenario": scenario.to_dict()},
                                      args.out_dir)


def _schedule_slice(records, schedule: str) -> dict:
    import numpy as np

    if schedule == "best":
        ases = [r.ase_best for r in records]
        min_ses = [r.min_se_one if r.chosen == "one" else r.min_se_two for r in records]
        feas = [r.feasible_one if r.chosen == "one" else r.feasible_two for r in records]
    else:
        ases = [getattr(r, f"ase_{schedule}") for r in records]
        min_ses = [getattr(r, f"min_se_{schedule}") for r in records]
        feas = [getattr(r, f"feasible_{schedule}") for r in records]
    n_errors = sum(1 for r in records if r.error)
    return {
        "mean_ase": float(np.mean(ases)),
        "std_ase": float(np.std(ases)),
        "mean_min_se": float(np.mean(min_ses)),
        "infeasible_rate": float(np.mean([not f for f in feas])),
        "n_drops": len(records),
        "n_errors": n_errors,
    }


def _cmd_compare(scenario: ScenarioConfig, compare: dict, args) -> list:
    rows = []
    for shape in compare["scenarios"]:
        n_clusters, per_cluster = parse_scenario_shape(shape)
        for strategy in compare["strategies"]:
            cfg = dataclasses.replace(scenario, n_clusters=n_clusters,
                                      users_per_cluster=per_cluster,
                                      strategy=strategy, schedule="best")
            base_cells = [{"scenario": shape, "strategy": strategy, "schedule": s}
                          for s in compare["schedules"]]
            try:
                result = run_experiment(cfg.validate(), workers=args.workers)
            except Exception as exc:
                print(f"compare cell {shape}/{strategy} failed: {exc}", file=sys.stderr)
                rows.extend({**cell, **{k: v for k, v in _empty_cell("error").items()
                                        if k in report.COMPARE_COLUMNS}}
                            for cell in base_cells)
                continue
            for cell in base_cells:
                stats = _schedule_slice(result.records, cell["schedule"])
                rows.append({**cell, "status": report.cell_status(stats), **stats})
    return report.write_compare_outputs(rows, {"scenario": scenario.to_dict(),
                                               "compare": compare}, args.out_dir)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        resolved = load_config(args.config, args.overrides)
        scenario = resolved.scenario
        if args.seed is not None:
            scenario = dataclasses.replace(scenario, seed=args.seed)
        if args.full_scale:
            scenario = dataclasses.replace(scenario, n_drops=FULL_SCALE_DROPS,
                                           n_realizations=FULL_SCALE_REALIZATIONS)
        scenario.validate()
        resolved = dataclasses.replace(resolved, scenario=scenario)
        axis = values = None
        if args.command == "sweep":
            axis = args.axis or resolved.sweep.get("axis")
            if axis is None:
                raise ConfigError("sweep needs an axis (--axis or sweep.axis)")
            if axis not in SWEEP_AXES:
                raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
            if args.values is not None:
                values = _parse_cli_values(args.values)
            else:
                values = resolved.sweep.get("values")
            if not values:
                raise ConfigError("sweep needs a non-empty value list "
                                  "(--values or sweep.values)")
            resolved.sweep.update(axis=axis, values=values)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    args.out_dir = args.out or os.path.join("out", args.command)
    os.makedirs(args.out_dir, exist_ok=True)
    manifest = {
        "command": args.command,
        "config_path": os.path.abspath(args.config),
        "config_hash": resolved.content_hash(),
        "output_dir": os.path.abspath(args.out_dir),
        "overrides": list(args.overrides),
        "workers": args.workers,
        "full_scale": bool(args.full_scale),
        "resolved": resolved.payload(),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    report.write_json(os.path.join(args.out_dir, "manifest.json"), manifest)

    try:
        if args.command == "run":
            files = _cmd_run(scenario, args)
        elif args.command == "sweep":
            files = _cmd_sweep(scenario, axis, values, args)
        else:
            files = _cmd_compare(scenario, resolved.compare, args)
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in files:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
