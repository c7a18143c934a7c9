"""Flat key = value experiment configuration with typed defaults.

The format is intentionally plain so experiment folders diff cleanly: one
dotted key per line, ``#`` comments, values typed by their defaults. Every
command writes the effective config (defaults merged with the file) back into
its output directory, and re-running from that file reproduces the run.
"""

from __future__ import annotations

import datetime as dt
from pathlib import Path

from .agent import AgentConfig
from .data import OccupancyThresholds, ProfileCluster, SyntheticProfile
from .env import RewardParams, normalize_reward_params


class ConfigError(ValueError):
    pass


#: Every known key with its default; the default's type fixes the parse rule.
DEFAULTS: dict[str, object] = {
    "data.events": "",
    "data.bays": "",
    "data.occupancy": "",
    "data.synthetic": "bimodal_noon:0",
    "data.days": 89,
    "data.bay_count": 40,
    "data.min_bays": 10,
    "data.start": "2014-03-03",
    "data.peak": 0.95,
    "data.noise": 0.04,
    "split.train": 0.5,
    "split.validation": 0.25,
    "split.test": 0.25,
    "thresholds.high": 0.8,
    "thresholds.medium": 0.6,
    "reward.e1": 1.0,
    "reward.e2": 1.0,
    "reward.w": 18.0,
    "reward.energy_always_on": False,
    "train.gamma": 0.99,
    "train.lr": 1e-3,
    "train.batch_size": 64,
    "train.target_sync": 1000,
    "train.buffer_capacity": 100_000,
    "train.warmup": 5000,
    "train.epsilon_start": 1.0,
    "train.epsilon_end": 0.05,
    "train.epsilon_decay_steps": 200_000,
    "train.per_alpha": 0.6,
    "train.per_beta_start": 0.4,
    "train.per_beta_end": 1.0,
    "train.per_eps": 1e-3,
    "train.episodes": 300,
    "train.episode_length": 2880,
    "train.history": 9,
    "train.hidden": "32,16",
    "train.validation_interval": 25,
    "train.seed": 0,
    "eval.shifts": "-6,-5,-4,-3,-2,-1,0,1,2,3,4,5,6",
    "eval.noise_deltas": "0,10,20,30",
    "eval.skip_zero_high": False,
    "sweep.w_values": "2,40",
    "output.dir": "camduty-run",
}


def _parse_value(key: str, text: str) -> object:
    default = DEFAULTS[key]
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        text = text[1:-1]
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in ("true", "yes", "1"):
                return True
            if lowered in ("false", "no", "0"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from None


def parse_config(text: str, path: str = "<config>") -> dict[str, object]:
    """Parse config text into a fully defaulted key -> value map.

    Unknown keys are errors naming the key; so are duplicate keys.
    """
    values = dict(DEFAULTS)
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        values[key] = _parse_value(key, value)
    return values


def load_config(path: str | Path | None, overrides: dict[str, object] | None = None) -> dict[str, object]:
    """Config file (or pure defaults when None) plus programmatic overrides."""
    if path is None:
        values = dict(DEFAULTS)
    else:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        values = parse_config(p.read_text(), path=str(p))
    for key, val in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        # String overrides (e.g. from CLI flags) go through the same typed
        # parser as file values; non-strings are taken as already typed.
        if isinstance(val, str) and not isinstance(DEFAULTS[key], str):
            values[key] = _parse_value(key, val)
        else:
            values[key] = val
    return values


def format_config(values: dict[str, object]) -> str:
    """Render a config map in the file format, keys sorted, booleans lowercase."""
    lines = []
    for key in sorted(values):
        v = values[key]
        if isinstance(v, bool):
            out = "true" if v else "false"
        elif isinstance(v, str):
            out = f'"{v}"'
        else:
            out = repr(v)
        lines.append(f"{key} = {out}")
    return "\n".join(lines) + "\n"


def write_effective_config(values: dict[str, object], out_dir: str | Path) -> Path:
    path = Path(out_dir) / "effective.cfg"
    path.write_text(format_config(values))
    return path


# ---------------------------------------------------------------------------
# Typed views
# ---------------------------------------------------------------------------

def _int_list(text: str, key: str) -> list[int]:
    try:
        return [int(part) for part in str(text).split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad list in {key}: {exc}") from None


def _float_list(text: str, key: str) -> list[float]:
    try:
        return [float(part) for part in str(text).split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad list in {key}: {exc}") from None


def thresholds_from(values: dict[str, object]) -> OccupancyThresholds:
    return OccupancyThresholds(
        high=float(values["thresholds.high"]), medium=float(values["thresholds.medium"])
    )


def reward_from(values: dict[str, object]) -> RewardParams:
    return normalize_reward_params(
        float(values["reward.e1"]),
        float(values["reward.e2"]),
        float(values["reward.w"]),
        energy_always_on=bool(values["reward.energy_always_on"]),
    )


def agent_config_from(values: dict[str, object]) -> AgentConfig:
    return AgentConfig(
        gamma=float(values["train.gamma"]),
        lr=float(values["train.lr"]),
        batch_size=int(values["train.batch_size"]),
        target_sync=int(values["train.target_sync"]),
        buffer_capacity=int(values["train.buffer_capacity"]),
        warmup=int(values["train.warmup"]),
        epsilon_start=float(values["train.epsilon_start"]),
        epsilon_end=float(values["train.epsilon_end"]),
        epsilon_decay_steps=int(values["train.epsilon_decay_steps"]),
        per_alpha=float(values["train.per_alpha"]),
        per_beta_start=float(values["train.per_beta_start"]),
        per_beta_end=float(values["train.per_beta_end"]),
        per_eps=float(values["train.per_eps"]),
        episodes=int(values["train.episodes"]),
        episode_length=int(values["train.episode_length"]),
        history=int(values["train.history"]),
        hidden=tuple(_int_list(str(values["train.hidden"]), "train.hidden")),
        validation_interval=int(values["train.validation_interval"]),
        seed=int(values["train.seed"]),
    )


def synthetic_profiles_from(values: dict[str, object]) -> list[SyntheticProfile]:
    """Parse ``data.synthetic``: comma list of cluster:seed entries."""
    spec = str(values["data.synthetic"]).strip()
    if not spec:
        return []
    by_name = {c.value: c for c in ProfileCluster}
    out = []
    for entry in spec.split(","):
        entry = entry.strip()
        name, _, seed_text = entry.partition(":")
        if name not in by_name:
            raise ConfigError(
                f"data.synthetic: unknown profile {name!r}; "
                f"expected one of {sorted(by_name)}"
            )
        try:
            seed = int(seed_text) if seed_text else 0
        except ValueError:
            raise ConfigError(f"data.synthetic: bad seed in {entry!r}") from None
        out.append(
            SyntheticProfile(
                cluster=by_name[name],
                peak_occupancy=float(values["data.peak"]),
                noise_scale=float(values["data.noise"]),
                seed=seed,
            )
        )
    return out


def start_date_from(values: dict[str, object]) -> dt.datetime:
    try:
        return dt.datetime.fromisoformat(str(values["data.start"]))
    except ValueError as exc:
        raise ConfigError(f"data.start: {exc}") from None


def shifts_from(values: dict[str, object]) -> list[int]:
    return _int_list(str(values["eval.shifts"]), "eval.shifts")


def noise_deltas_from(values: dict[str, object]) -> list[float]:
    return _float_list(str(values["eval.noise_deltas"]), "eval.noise_deltas")


def sweep_w_from(values: dict[str, object]) -> list[float]:
    return _float_list(str(values["sweep.w_values"]), "sweep.w_values")
