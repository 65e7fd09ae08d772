"""Flat key-value experiment configs with dotted sections and strict key checking.

Format, one assignment per line:

    # comment
    scenario.M = 64
    n_clusters = 10            # bare keys belong to the scenario section
    sweep.axis = M
    sweep.values = [16, 32, 64]
    compare.strategies = [single, clusters, unicast, optimal]
    compare.scenarios = [2x10, 20x1]

Unknown keys are rejected by name; silent typos would otherwise corrupt whole
sweeps.  Values are scalars (int, float, bool, bare or quoted string) or
bracketed lists of scalars.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

from .harness import ScenarioConfig

INT_FIELDS = frozenset({"M", "n_clusters", "users_per_cluster", "tau_c", "n_rays",
                        "n_drops", "n_realizations", "seed", "G"})
FLOAT_FIELDS = frozenset({"cell_radius_m", "cluster_radius_m", "min_bs_dist_m",
                          "asd_deg", "f_ghz", "bandwidth_hz", "noise_psd_dbm_hz",
                          "noise_figure_db", "p_dl_w", "pilot_power_w",
                          "shadowing_var_db", "shadowing_intra_corr", "delta", "eps"})
STR_FIELDS = frozenset({"strategy", "schedule", "theta_policy", "budget_mode"})
LIST_FIELDS = frozenset({"G_candidates"})
SCENARIO_KEYS = INT_FIELDS | FLOAT_FIELDS | STR_FIELDS | LIST_FIELDS
SWEEP_KEYS = frozenset({"axis", "values"})
COMPARE_KEYS = frozenset({"strategies", "schedules", "scenarios"})
SWEEP_AXES = ("M", "K", "n_clusters", "G")

_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)?$")
_SCENARIO_RE = re.compile(r"^(\d+)x(\d+)$")


class ConfigError(ValueError):
    """Anything wrong with a config file, an override, or a CLI parameter."""


def _parse_scalar(token: str):
    token = token.strip()
    low = token.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    for cast in (int, float):
        try:
            return cast(token)
        except ValueError:
            pass
    if len(token) >= 2 and token[0] == token[-1] and token[0] in "'\"":
        return token[1:-1]
    return token


def parse_value(text: str):
    text = text.strip()
    if not text:
        raise ConfigError("empty value")
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        return [] if not inner else [_parse_scalar(t) for t in inner.split(",")]
    return _parse_scalar(text)


def parse_config_text(text: str) -> dict:
    """Key -> parsed value; raises ConfigError with the line number on bad lines."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not _KEY_RE.match(key):
            raise ConfigError(f"line {lineno}: malformed key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = parse_value(value)
    return out


def _coerce_scenario_value(name: str, value):
    if name in INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} expects an integer, got {value!r}")
        if float(value) != int(value):
            raise ConfigError(f"{name} expects an integer, got {value!r}")
        return int(value)
    if name in FLOAT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} expects a number, got {value!r}")
        return float(value)
    if name in STR_FIELDS:
        if not isinstance(value, str):
            raise ConfigError(f"{name} expects a name, got {value!r}")
        return value
    # list-valued: G_candidates
    if value is None:
        return None
    if not isinstance(value, list):
        raise ConfigError(f"{name} expects a list, got {value!r}")
    try:
        return tuple(int(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} expects a list of integers, got {value!r}")


@dataclass
class ResolvedConfig:
    """A parsed config file split into its sections, ready to run."""

    scenario: ScenarioConfig
    sweep: dict = field(default_factory=dict)     # axis: str, values: list[int]
    compare: dict = field(default_factory=dict)   # strategies/schedules/scenarios lists

    def payload(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "sweep": {k: self.sweep[k] for k in sorted(self.sweep)},
            "compare": {k: self.compare[k] for k in sorted(self.compare)},
        }

    def content_hash(self) -> str:
        blob = json.dumps(self.payload(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _split_sections(mapping: dict):
    scenario, sweep, compare = {}, {}, {}
    for key, value in mapping.items():
        section, _, name = key.rpartition(".")
        if section in ("", "scenario"):
            if name not in SCENARIO_KEYS:
                raise ConfigError(f"unknown scenario key {name!r}")
            scenario[name] = _coerce_scenario_value(name, value)
        elif section == "sweep":
            if name not in SWEEP_KEYS:
                raise ConfigError(f"unknown sweep key {name!r}")
            sweep[name] = value
        elif section == "compare":
            if name not in COMPARE_KEYS:
                raise ConfigError(f"unknown compare key {name!r}")
            compare[name] = value
        else:
            raise ConfigError(f"unknown config section {section!r} in key {key!r}")
    return scenario, sweep, compare


def _check_sweep(sweep: dict) -> dict:
    out = {}
    if "axis" in sweep:
        axis = sweep["axis"]
        if axis not in SWEEP_AXES:
            raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
        out["axis"] = axis
    if "values" in sweep:
        values = sweep["values"]
        if not isinstance(values, list) or not values:
            raise ConfigError("sweep values must be a non-empty list")
        try:
            out["values"] = [int(v) for v in values]
        except (TypeError, ValueError):
            raise ConfigError(f"sweep values must be integers, got {values!r}")
    return out


def _check_compare(compare: dict, scenario: ScenarioConfig) -> dict:
    from .harness import SCHEDULES, STRATEGIES

    out = {
        "strategies": ["single", "clusters", "unicast", "optimal"],
        "schedules": ["one", "two", "best"],
        "scenarios": [f"{scenario.n_clusters}x{scenario.users_per_cluster}"],
    }
    for key, allowed in (("strategies", STRATEGIES), ("schedules", SCHEDULES)):
        if key in compare:
            vals = compare[key]
            if not isinstance(vals, list) or not vals:
                raise ConfigError(f"compare {key} must be a non-empty list")
            for v in vals:
                if v not in allowed:
                    raise ConfigError(f"unknown compare {key[:-1]} {v!r}")
            out[key] = list(vals)
    if "scenarios" in compare:
        vals = compare["scenarios"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError("compare scenarios must be a non-empty list")
        for v in vals:
            parse_scenario_shape(str(v))
        out["scenarios"] = [str(v) for v in vals]
    return out


def parse_scenario_shape(shape: str) -> tuple:
    """'NxU' -> (n_clusters, users_per_cluster)."""
    m = _SCENARIO_RE.match(shape.strip())
    if not m:
        raise ConfigError(f"scenario shape must look like '2x10', got {shape!r}")
    n, u = int(m.group(1)), int(m.group(2))
    if n < 1 or u < 1:
        raise ConfigError(f"scenario shape needs positive counts, got {shape!r}")
    return n, u


def apply_overrides(mapping: dict, overrides) -> dict:
    """--set KEY=VALUE pairs layered over the file mapping (last one wins)."""
    out = dict(mapping)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override must look like KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        key = key.strip()
        if not _KEY_RE.match(key):
            raise ConfigError(f"malformed override key {key!r}")
        out[key] = parse_value(value)
    return out


def resolve_config(mapping: dict) -> ResolvedConfig:
    scenario_kw, sweep, compare = _split_sections(mapping)
    try:
        scenario = ScenarioConfig(**scenario_kw)
        scenario.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return ResolvedConfig(scenario=scenario, sweep=_check_sweep(sweep),
                          compare=_check_compare(compare, scenario))


def load_config(path: str, overrides=()) -> ResolvedConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return resolve_config(apply_overrides(parse_config_text(text), overrides))
