"""Project configuration files tying a network, partition and specification together."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .logic.dra import RabinAutomaton
from .logic.formula import Formula, FormulaError
from .logic.hoa import import_hoa
from .logic.parser import parse_formula, resolve
from .network import NetworkError, TrafficNetwork
from .partition import GeneralPartition, GriddedPartition, PartitionError, partition_from_dict


class ConfigError(ValueError):
    pass


@dataclass
class ProjectConfig:
    path: Path | None
    network: TrafficNetwork
    partition: GriddedPartition | GeneralPartition
    partition_spec: dict
    formula: Formula | None = None
    formula_text: str | None = None
    automaton: RabinAutomaton | None = None
    sigma_init: int | None = None
    window: int = 75
    horizon: int = 75
    seeds: list[int] = field(default_factory=lambda: [0])
    steps: int = 300
    baseline_dwell: int = 4


def _require(data: dict, key: str, where: str) -> Any:
    if key not in data:
        raise ConfigError(f"{where}: missing key {key!r}")
    return data[key]


def _int(value, where: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where}: must be at least {minimum}")
    return value


def config_from_dict(data: dict, base: Path | None = None) -> ProjectConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be an object")
    base = base or Path(".")
    net_spec = _require(data, "network", "config")
    try:
        if isinstance(net_spec, str):
            net_path = base / net_spec
            if not net_path.exists():
                raise ConfigError(f"config.network: file not found: {net_path}")
            with open(net_path, encoding="utf-8") as fh:
                net = TrafficNetwork.from_dict(json.load(fh))
        elif isinstance(net_spec, dict):
            net = TrafficNetwork.from_dict(net_spec)
        else:
            raise ConfigError("config.network: expected a file name or an object")
    except NetworkError as exc:
        raise ConfigError(f"config.network: {exc}") from None

    part_spec = _require(data, "partition", "config")
    if not isinstance(part_spec, dict):
        raise ConfigError("config.partition: expected an object")
    try:
        partition = partition_from_dict(net, part_spec)
    except PartitionError as exc:
        raise ConfigError(f"config.partition: {exc}") from None

    cfg = ProjectConfig(base / "config.json" if base else None, net, partition, part_spec)
    if "formula" in data:
        text = data["formula"]
        if not isinstance(text, str):
            raise ConfigError("config.formula: expected a string")
        try:
            cfg.formula = parse_formula(text, net)
        except FormulaError as exc:
            raise ConfigError(f"config.formula: {exc}") from None
        cfg.formula_text = text
    if "hoa" in data:
        hoa_path = base / data["hoa"]
        if not hoa_path.exists():
            raise ConfigError(f"config.hoa: file not found: {hoa_path}")
        try:
            cfg.automaton = import_hoa(hoa_path.read_text(encoding="utf-8"))
            for ap in cfg.automaton.aps:
                resolve(ap, net)
        except (ValueError, FormulaError) as exc:
            raise ConfigError(f"config.hoa: {exc}") from None
    if cfg.formula is None and cfg.automaton is None:
        raise ConfigError("config: one of 'formula' or 'hoa' is required")

    sigma = data.get("sigma_init")
    if isinstance(sigma, dict):
        try:
            sigma = net.signal_from_phases({str(k): v for k, v in sigma.items()}).index
        except (KeyError, NetworkError) as exc:
            raise ConfigError(f"config.sigma_init: {exc}") from None
    elif sigma is not None:
        sigma = _int(sigma, "config.sigma_init", 0)
        if sigma >= len(net.signals):
            raise ConfigError(f"config.sigma_init: index {sigma} out of range")
    cfg.sigma_init = sigma

    mon = data.get("monitor", {})
    if not isinstance(mon, dict):
        raise ConfigError("config.monitor: expected an object")
    cfg.window = _int(mon.get("window", cfg.window), "config.monitor.window", 1)
    cfg.horizon = _int(mon.get("horizon", cfg.horizon), "config.monitor.horizon", 1)
    seeds = data.get("seeds", cfg.seeds)
    if not isinstance(seeds, list):
        raise ConfigError("config.seeds: expected a list of integers")
    cfg.seeds = [_int(s, f"config.seeds[{i}]") for i, s in enumerate(seeds)]
    cfg.steps = _int(data.get("steps", cfg.steps), "config.steps", 0)
    cfg.baseline_dwell = _int(data.get("baseline", {}).get("dwell", cfg.baseline_dwell), "config.baseline.dwell", 1)
    return cfg


def load_config(path: str | Path) -> ProjectConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from None
    cfg = config_from_dict(data, path.parent)
    cfg.path = path
    return cfg
