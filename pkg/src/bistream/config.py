"""Scenario configuration: an INI-style file of ``key = value`` lines in sections.

Every value is in base units (bits/s, bytes, seconds) so a parsed file
serializes back to the same numbers with no unit conversion in between.
Unknown sections or keys are errors, and so are out-of-range values; each
error names the ``section.key`` it came from.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace
from typing import Any, Callable

from .engine import MODES, SCHEDULERS, EngineParams
from .mapping import STRATEGIES, Strategy
from .model import ConfigurationError
from .topology import CatalogParams, PlatformParams, WorkloadParams

PRESETS = ("ci", "paper")


@dataclass(frozen=True)
class ScenarioParams:
    name: str = "default"
    nodes: int = 100
    links: int = 99
    attach: int = 1
    seed: int = 1
    replications: int = 10


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: ScenarioParams = ScenarioParams()
    platform: PlatformParams = PlatformParams()
    catalog: CatalogParams = CatalogParams()
    workload: WorkloadParams = WorkloadParams()
    engine: EngineParams = EngineParams()

    @property
    def seeds(self) -> list[int]:
        s = self.scenario
        return list(range(s.seed, s.seed + s.replications))

    def with_value(self, path: str, value) -> "ScenarioConfig":
        """Copy with one ``section.key`` replaced (value in config form)."""
        return parse_config(serialize_config(self), overrides={path: value})


# -- schema -------------------------------------------------------------------


@dataclass(frozen=True)
class Key:
    section: str
    name: str
    kind: str  # int | float | bool | str | pair | choice
    target: str  # attribute path inside ScenarioConfig, e.g. "engine.strategy.p0"
    check: Callable[[Any], bool] = lambda v: True
    why: str = ""
    choices: tuple = ()
    optional: bool = False


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _range(v):
    return 0 < v[0] <= v[1]


def _nonneg_range(v):
    return 0 <= v[0] <= v[1]


SCHEMA: tuple[Key, ...] = (
    Key("scenario", "name", "str", "scenario.name"),
    Key("scenario", "nodes", "int", "scenario.nodes", lambda v: v >= 2, "at least 2"),
    Key("scenario", "links", "int", "scenario.links", _nonneg, ">= 0"),
    Key("scenario", "attach", "int", "scenario.attach", lambda v: v >= 1, ">= 1"),
    Key("scenario", "seed", "int", "scenario.seed", _nonneg, ">= 0"),
    Key("scenario", "replications", "int", "scenario.replications", lambda v: v >= 1, ">= 1"),
    Key("platform", "k_instances", "int", "platform.k_instances", lambda v: v >= 1, ">= 1"),
    Key("platform", "service_multiplier", "float", "platform.service_multiplier", _nonneg, ">= 0"),
    Key("platform", "mean_delivery_rate_bps", "float", "platform.mean_delivery_rate", _pos, "> 0"),
    Key("platform", "lastmile_bps", "pair", "platform.lastmile_range", _nonneg_range, "0 <= lo <= hi"),
    Key("platform", "dedicated_bw_bps", "pair", "platform.dedicated_bw_range", _range, "0 < lo <= hi"),
    Key("platform", "dedicated_delay_s", "pair", "platform.dedicated_delay_range", _nonneg_range, "0 <= lo <= hi"),
    Key("platform", "public_delay_s", "pair", "platform.public_delay_range", _nonneg_range, "0 <= lo <= hi"),
    Key("platform", "base_cost", "int", "platform.base_cost", lambda v: v >= 1, ">= 1"),
    Key("platform", "delay_cost", "bool", "platform.delay_cost"),
    Key("platform", "allow_replacement", "bool", "platform.allow_replacement"),
    Key("catalog", "services", "int", "catalog.services", lambda v: v >= 1, ">= 1"),
    Key("catalog", "cpu_factor", "pair", "catalog.cpu_factor_range", _range, "0 < lo <= hi"),
    Key("catalog", "shrinkage", "pair", "catalog.shrinkage_range", _range, "0 < lo <= hi"),
    Key("workload", "count", "int", "workload.count", _nonneg, ">= 0"),
    Key("workload", "arrival_rate_per_hour", "float", "workload.arrival_rate", _pos, "> 0"),
    Key("workload", "components", "int", "workload.components", lambda v: v >= 1, ">= 1"),
    Key("workload", "delivery_rate_bps", "pair", "workload.rate_range", _range, "0 < lo <= hi"),
    Key("workload", "volume_bytes", "pair", "workload.volume_range", _range, "0 < lo <= hi"),
    Key("workload", "window_s", "float", "workload.window", _pos, "> 0"),
    Key("workload", "price", "pair", "workload.price_range", _nonneg_range, "0 <= lo <= hi"),
    Key("protocol", "strategy", "choice", "engine.strategy.kind", choices=STRATEGIES),
    Key("protocol", "anneal_p0", "float", "engine.strategy.p0", lambda v: 0 <= v <= 1, "in [0, 1]"),
    Key("protocol", "anneal_lambda", "float", "engine.strategy.lam", _nonneg, ">= 0"),
    Key("protocol", "neighbors_k", "int", "engine.strategy.k", lambda v: v >= 1, ">= 1"),
    Key("protocol", "forwarding_price", "int", "engine.forwarding_price", lambda v: v >= 1, ">= 1"),
    Key("protocol", "max_null", "int", "engine.max_null", _nonneg, ">= 0", optional=True),
    Key("protocol", "tolerance", "float", "engine.tolerance", _nonneg, ">= 0"),
    Key("protocol", "directory_staleness", "float", "engine.directory_staleness", lambda v: 0 <= v <= 1, "in [0, 1]"),
    Key("protocol", "remap_on_failure", "bool", "engine.remap_on_failure"),
    Key("scheduler", "scheduler", "choice", "engine.scheduler", choices=SCHEDULERS),
    Key("scheduler", "epoch_s", "float", "engine.epoch", _pos, "> 0"),
    Key("scheduler", "catchup_cap", "float", "engine.catchup_cap", lambda v: v >= 1, ">= 1"),
    Key("scheduler", "gross_budget", "bool", "engine.gross_budget"),
    Key("scheduler", "multi_hop", "bool", "engine.multi_hop"),
    Key("engine", "mode", "choice", "engine.mode", choices=MODES),
    Key("engine", "step_s", "float", "engine.step", _pos, "> 0"),
    Key("engine", "tick_s", "float", "engine.tick", _pos, "> 0"),
    Key("engine", "sigma", "float", "engine.sigma", _nonneg, ">= 0"),
    Key("engine", "downlink_squeeze", "bool", "engine.downlink_squeeze"),
    Key("engine", "check_every", "int", "engine.check_every", _nonneg, ">= 0"),
)
SECTIONS = tuple(dict.fromkeys(k.section for k in SCHEMA))
BY_PATH = {f"{k.section}.{k.name}": k for k in SCHEMA}
_TRUE, _FALSE = ("true", "yes", "on", "1"), ("false", "no", "off", "0")


def _get(cfg, target: str):
    obj = cfg
    for part in target.split("."):
        obj = getattr(obj, part)
    return obj


def _set(obj, parts: list[str], value):
    if len(parts) == 1:
        return replace(obj, **{parts[0]: value})
    child = getattr(obj, parts[0])
    return replace(obj, **{parts[0]: _set(child, parts[1:], value)})


def _fail(key: Key, raw, reason: str):
    raise ConfigurationError(f"{key.section}.{key.name} = {raw!r}: {reason}")


def _convert(key: Key, raw: str):
    text = raw.strip()
    if key.optional and text.lower() in ("", "none", "auto"):
        return None
    try:
        if key.kind == "int":
            value = int(text)
        elif key.kind == "float":
            value = float(text)
        elif key.kind == "bool":
            low = text.lower()
            if low not in _TRUE + _FALSE:
                raise ValueError("expected true/false")
            value = low in _TRUE
        elif key.kind == "pair":
            parts = [p for p in text.replace(",", " ").split() if p]
            if len(parts) != 2:
                raise ValueError("expected two numbers")
            value = tuple(float(p) for p in parts)
        elif key.kind == "choice":
            if text not in key.choices:
                raise ValueError(f"expected one of {', '.join(key.choices)}")
            value = text
        else:
            value = text
    except ValueError as exc:
        _fail(key, raw, str(exc))
    if key.kind == "pair" and key.target in ("workload.price_range",):
        if any(v != int(v) for v in value):
            _fail(key, raw, "prices are whole revenue units")
        value = tuple(int(v) for v in value)
    if not key.check(value):
        _fail(key, raw, f"out of range (must be {key.why})")
    return value


def _format(key: Key, value) -> str:
    if value is None:
        return "none"
    if key.kind == "bool":
        return "true" if value else "false"
    if key.kind == "float":
        return repr(float(value))
    if key.kind == "pair":
        return ", ".join(repr(v) for v in value)
    return str(value)


def preset(name: str) -> ScenarioConfig:
    """Named starting points: ``ci`` (10 replications) and ``paper`` (100)."""
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    reps = 10 if name == "ci" else 100
    return ScenarioConfig(scenario=ScenarioParams(name=name, replications=reps))


def parse_config(text: str, base: ScenarioConfig | None = None, overrides: dict[str, Any] | None = None) -> ScenarioConfig:
    """Parse INI text on top of ``base`` (defaults when omitted).

    ``overrides`` maps ``section.key`` to a value in config form and is
    applied after the file.
    """
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"unreadable config: {exc}") from exc
    values: dict[str, str] = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigurationError(f"unknown section [{section}]")
        for name, raw in parser.items(section):
            path = f"{section}.{name}"
            if path not in BY_PATH:
                raise ConfigurationError(f"unknown key {path}")
            values[path] = raw
    for path, raw in (overrides or {}).items():
        if path not in BY_PATH:
            raise ConfigurationError(f"unknown key {path}")
        values[path] = raw if isinstance(raw, str) else _format(BY_PATH[path], raw)
    cfg = base or ScenarioConfig()
    for path, raw in values.items():
        key = BY_PATH[path]
        cfg = _set(cfg, key.target.split("."), _convert(key, raw))
    try:
        # re-run the dataclass post-init checks on the combined values
        cfg = replace(cfg, engine=replace(cfg.engine, strategy=Strategy(**{f.name: getattr(cfg.engine.strategy, f.name) for f in fields(Strategy)})))
        cfg = replace(cfg, engine=replace(cfg.engine))
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    s = cfg.scenario
    if s.links > s.nodes * (s.nodes - 1) // 2:
        raise ConfigurationError(f"scenario.links = {s.links}: more than a complete graph on {s.nodes} nodes")
    return cfg


def serialize_config(cfg: ScenarioConfig) -> str:
    lines: list[str] = []
    for section in SECTIONS:
        if lines:
            lines.append("")
        lines.append(f"[{section}]")
        for key in SCHEMA:
            if key.section == section:
                lines.append(f"{key.name} = {_format(key, _get(cfg, key.target))}")
    return "\n".join(lines) + "\n"


def load_config(path: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text, base)
