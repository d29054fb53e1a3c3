"""Scenario files (TOML) with line-anchored diagnostics.

Grammar (all keys lower case; ``#`` starts a comment)::

    direction = "morning"            # or "evening"

    [network]
    capacities = [50, 30, 10]        # mu_1..mu_N, bottleneck 1 nearest the destination
    free_flow_times = [0, 0, 0]      # optional, default all zero
    demands = [100, 350, 250]
    horizon = 60

    [schedule]
    family = "v"                     # "v" or "piecewise"
    early_slope = 0.5                # v only
    late_slope = 0.5                 # v only
    desired_time = 30                # v only
    # breakpoints = [0, 30, 60]      # piecewise only
    # values = [15, 0, 15]           # piecewise only

    [grid]                           # optional, for numeric runs
    K = 600
    dk = 0.1

    [output]                         # optional
    directory = "out/example1"
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import tomli

from .core import CorridorNetwork, Direction, PiecewiseLinearSchedule, ScheduleDelay, VSchedule
from .errors import ConfigError
from .numeric.grid import TimeGrid

_SECTIONS = {
    None: {"direction", "network", "schedule", "grid", "output", "name"},
    "network": {"capacities", "free_flow_times", "demands", "horizon"},
    "schedule": {"family", "early_slope", "late_slope", "desired_time", "breakpoints", "values"},
    "grid": {"K", "dk"},
    "output": {"directory"},
}


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    network: CorridorNetwork
    schedule: ScheduleDelay
    grid: TimeGrid | None
    output: Path | None
    name: str
    source: Path | None = None


def _line_of(text: str, section: str | None, key: str) -> int | None:
    current = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        m = re.match(r"^\[([^\]]+)\]$", line)
        if m:
            current = m.group(1).strip()
            continue
        if current == section and re.match(rf"^{re.escape(key)}\s*=", line):
            return n
    if section is not None:
        for n, raw in enumerate(text.splitlines(), start=1):
            if raw.strip() == f"[{section}]":
                return n
    return None


def parse_config(text: str, path: str | Path | None = None) -> ScenarioConfig:
    where = str(path) if path is not None else "<config>"
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML syntax error: {exc}", where, int(m.group(1)) if m else None) from None

    def fail(msg, section=None, key=None):
        line = _line_of(text, section, key) if key is not None else None
        raise ConfigError(msg, where, line)

    for section, allowed in _SECTIONS.items():
        block = data if section is None else data.get(section, {})
        if not isinstance(block, dict):
            fail(f"[{section}] must be a table", None, section)
        for key in block:
            if key not in allowed:
                fail(f"unknown key '{key}'" + (f" in [{section}]" if section else ""), section, key)

    def get(section, key, default=..., kind=float):
        block = data.get(section, {}) if section else data
        if key not in block:
            if default is ...:
                fail(f"missing key '{key}'" + (f" in [{section}]" if section else ""), section, key)
            return default
        val = block[key]
        try:
            if kind is list:
                if not isinstance(val, list) or not val:
                    raise TypeError
                return [float(v) for v in val]
            if kind is str:
                if not isinstance(val, str):
                    raise TypeError
                return val
            if isinstance(val, (bool, list, dict, str)):
                raise TypeError
            return kind(val)
        except (TypeError, ValueError):
            fail(f"'{key}' has an invalid value {val!r}", section, key)

    if "network" not in data:
        fail("missing [network] section")
    if "schedule" not in data:
        fail("missing [schedule] section")

    try:
        direction = Direction.parse(get(None, "direction", "morning", str))
    except ValueError as exc:
        fail(str(exc), None, "direction")

    mu = get("network", "capacities", kind=list)
    Q = get("network", "demands", kind=list)
    c = get("network", "free_flow_times", [0.0] * len(mu), kind=list)
    T = get("network", "horizon")
    try:
        net = CorridorNetwork(mu, c, Q, T, direction)
    except ValueError as exc:
        key = {"capacities": "capacities", "demands": "demands", "free_flow": "free_flow_times",
               "horizon": "horizon"}
        hit = next((k for tag, k in key.items() if tag in str(exc)), "capacities")
        fail(f"invalid network: {exc}", "network", hit)

    family = get("schedule", "family", "v", str).lower()
    try:
        if family == "v":
            sched = VSchedule(get("schedule", "early_slope"), get("schedule", "late_slope"),
                              get("schedule", "desired_time"))
        elif family == "piecewise":
            sched = PiecewiseLinearSchedule(get("schedule", "breakpoints", kind=list),
                                            get("schedule", "values", kind=list))
        else:
            fail(f"unknown schedule family '{family}' (use 'v' or 'piecewise')", "schedule", "family")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        fail(f"invalid schedule: {exc}", "schedule", "family")

    grid = None
    if "grid" in data:
        K = get("grid", "K", kind=int)
        dk = get("grid", "dk", net.horizon / K)
        try:
            grid = TimeGrid(K, dk)
            grid.check_horizon(net.horizon)
        except ValueError as exc:
            fail(f"invalid grid: {exc}", "grid", "dk" if "dk" in data["grid"] else "K")

    out = data.get("output", {}).get("directory")
    name = data.get("name") or (Path(path).stem if path is not None else "scenario")
    return ScenarioConfig(net, sched, grid, Path(out) if out else None, str(name),
                          Path(path) if path is not None else None)


def load_config(path: str | Path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(p)) from None
    return parse_config(text, p)


def parse_grid_flag(value: str, horizon: float) -> TimeGrid:
    """``K=600,dk=0.1`` (either key may be omitted when the other and T fix it)."""
    parts = {}
    for item in value.split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise ConfigError(f"grid flag item '{item}' must look like key=value")
        k, v = item.split("=", 1)
        parts[k.strip()] = v.strip()
    try:
        if "K" in parts:
            K = int(parts["K"])
            dk = float(parts.get("dk", horizon / K))
        elif "dk" in parts:
            dk = float(parts["dk"])
            K = int(round(horizon / dk))
        else:
            raise ConfigError("grid flag needs K= and/or dk=")
        grid = TimeGrid(K, dk)
        grid.check_horizon(horizon)
    except ValueError as exc:
        raise ConfigError(f"invalid --grid: {exc}") from None
    return grid
