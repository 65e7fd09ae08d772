"""Delimited result tables, JSON summaries, and the companion figures.

CSV values are written with 6 significant digits and '\\n' line endings so a
rerun with the same seed produces byte-identical files on any platform.
Figures are rendered headless (Agg) next to the tables; matplotlib is only
imported when a figure is actually drawn.
"""

from __future__ import annotations

import dataclasses
import json
import os

RUN_COLUMNS = ("drop", "n_groups", "theta", "chosen", "ase", "ase_one", "ase_two",
               "ase_best", "min_se", "sum_power_w", "feasible", "error")
SWEEP_COLUMNS = ("axis", "value", "status", "mean_ase", "std_ase", "mean_ase_one",
                 "mean_ase_two", "mean_ase_best", "mean_min_se", "infeasible_rate",
                 "n_drops", "n_errors")
COMPARE_COLUMNS = ("scenario", "strategy", "schedule", "status", "mean_ase", "std_ase",
                   "mean_min_se", "infeasible_rate", "n_drops", "n_errors")


def format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def write_csv(path: str, columns, rows) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(format_cell(row[c]) for c in columns))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path: str, payload) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_rows(result) -> list:
    rows = []
    for r in result.records:
        row = dataclasses.asdict(r)
        rows.append({c: row[c] for c in RUN_COLUMNS})
    return rows


def cell_status(summary: dict) -> str:
    if summary["n_errors"] == summary["n_drops"]:
        return "error"
    if summary["infeasible_rate"] >= 1.0:
        return "infeasible"
    return "ok"


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_run_figure(result, path: str) -> None:
    """Per-drop ASE of both schedules with the chosen value overlaid."""
    plt = _pyplot()
    drops = [r.drop for r in result.records]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(drops, [r.ase_one for r in result.records], "o-", label="one interval")
    ax.plot(drops, [r.ase_two for r in result.records], "s-", label="two intervals")
    ax.plot(drops, [r.ase for r in result.records], "k.", label="reported")
    ax.set_xlabel("drop")
    ax.set_ylabel("ASE (bit/s/Hz)")
    ax.set_title(f"{result.config.strategy} grouping, schedule={result.config.schedule}")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_sweep_figure(rows, axis: str, path: str) -> None:
    plt = _pyplot()
    ok = [r for r in rows if r["status"] != "error"]
    xs = [r["value"] for r in ok]
    fig, ax = plt.subplots(figsize=(7, 4))
    for col, style, label in (("mean_ase_one", "o-", "one interval"),
                              ("mean_ase_two", "s-", "two intervals"),
                              ("mean_ase_best", "k^--", "best")):
        ax.plot(xs, [r[col] for r in ok], style, label=label)
    ax.set_xlabel(axis)
    ax.set_ylabel("mean ASE (bit/s/Hz)")
    ax.set_title(f"ASE vs {axis}")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_compare_figure(rows, path: str) -> None:
    """Grouped bars of mean ASE per scenario and strategy, best schedule only."""
    plt = _pyplot()
    best = [r for r in rows if r["schedule"] == "best"]
    if not best:
        best = rows
    scenarios = sorted({r["scenario"] for r in best})
    strategies = sorted({r["strategy"] for r in best})
    fig, ax = plt.subplots(figsize=(1.5 + 1.8 * len(scenarios), 4))
    width = 0.8 / max(len(strategies), 1)
    for i, strat in enumerate(strategies):
        vals, errs = [], []
        for sc in scenarios:
            match = [r for r in best if r["scenario"] == sc and r["strategy"] == strat]
            vals.append(match[0]["mean_ase"] if match else 0.0)
            errs.append(match[0]["std_ase"] if match else 0.0)
        offset = (i - (len(strategies) - 1) / 2) * width
        ax.bar([j + offset for j in range(len(scenarios))], vals, width,
               yerr=errs, capsize=3, label=strat)
    ax.set_xticks(range(len(scenarios)))
    ax.set_xticklabels(scenarios)
    ax.set_xlabel("scenario (clusters x users)")
    ax.set_ylabel("mean ASE (bit/s/Hz)")
    ax.legend()
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_run_outputs(result, out_dir: str) -> list:
    rows = run_rows(result)
    csv_path = os.path.join(out_dir, "results.csv")
    json_path = os.path.join(out_dir, "results.json")
    fig_path = os.path.join(out_dir, "ase_per_drop.png")
    write_csv(csv_path, RUN_COLUMNS, rows)
    write_json(json_path, {
        "summary": result.summary(),
        "scenario": result.config.to_dict(),
        "records": [dataclasses.asdict(r) for r in result.records],
    })
    render_run_figure(result, fig_path)
    return [csv_path, json_path, fig_path]


def write_sweep_outputs(rows, axis: str, meta: dict, out_dir: str) -> list:
    csv_path = os.path.join(out_dir, "results.csv")
    json_path = os.path.join(out_dir, "results.json")
    fig_path = os.path.join(out_dir, f"ase_vs_{axis}.png")
    write_csv(csv_path, SWEEP_COLUMNS, rows)
    write_json(json_path, {"axis": axis, "cells": rows, **meta})
    render_sweep_figure(rows, axis, fig_path)
    return [csv_path, json_path, fig_path]


def write_compare_outputs(rows, meta: dict, out_dir: str) -> list:
    csv_path = os.path.join(out_dir, "results.csv")
    json_path = os.path.join(out_dir, "results.json")
    fig_path = os.path.join(out_dir, "ase_comparison.png")
    write_csv(csv_path, COMPARE_COLUMNS, rows)
    write_json(json_path, {"cells": rows, **meta})
    render_compare_figure(rows, fig_path)
    return [csv_path, json_path, fig_path]
