"""Run configuration files (TOML) and their validation."""

from __future__ import annotations

import copy
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .dynamics import TimeGrid
from .models import (
    GAMMA32_TARGETS,
    DriveField,
    GaussianDrive,
    LambdaParams,
    PiecewiseLinearDrive,
    TwoLevelParams,
    ZeroDrive,
)
from .optimizer import OptimizerConfig
from .sweep import MODES, SweepAxis

SYSTEM_KEYS = {
    "two_level": {"type", "delta_c", "g", "kappa", "gamma"},
    "lambda": {"type", "delta_c", "delta_d", "g", "kappa", "gamma", "gamma12_fraction", "gamma32_fraction"},
}
DRIVE_KEYS = {
    "zero": {"type"},
    "gaussian": {"type", "amplitude", "center", "width"},
    "piecewise_linear": {"type", "knots", "dt"},
}
TOP_KEYS = {"gamma32_target", "system", "drive", "grid", "output", "reference", "sweep", "optimizer"}
GRID_KEYS = {"t_end", "n_steps", "integrator"}
OUTPUT_KEYS = {"prefix"}
SWEEP_KEYS = {"mode", "optimize", "axis1", "axis2"}
AXIS_KEYS = {"name", "start", "stop", "count", "spacing"}
OPTIMIZER_KEYS = {f.name for f in fields(OptimizerConfig)}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SourceConfig:
    system: str
    params: TwoLevelParams | LambdaParams
    drive: DriveField


@dataclass(frozen=True)
class SweepSettings:
    axis1: SweepAxis
    axis2: SweepAxis
    mode: str = "identical"
    optimize: bool = False


@dataclass(frozen=True)
class RunConfig:
    source: SourceConfig
    grid: TimeGrid
    prefix: str
    gamma32_target: str
    reference: SourceConfig | None
    sweep: SweepSettings | None
    optimizer: OptimizerConfig
    raw: dict


def _check_keys(table: Any, allowed: set[str], where: str):
    if not isinstance(table, dict):
        raise ConfigError(f"'{where}' must be a table")
    for key in table:
        if key not in allowed:
            name = f"{where}.{key}" if where else key
            raise ConfigError(f"unknown key '{name}'")


def _build(cls, table: dict, where: str, skip=("type",)):
    kwargs = {k: v for k, v in table.items() if k not in skip}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}] {exc}") from None


def parse_drive(table: dict | None, where: str = "drive") -> DriveField:
    if table is None:
        return ZeroDrive()
    kind = table.get("type", "gaussian")
    if kind not in DRIVE_KEYS:
        raise ConfigError(f"{where}.type must be one of {sorted(DRIVE_KEYS)}, got {kind!r}")
    _check_keys(table, DRIVE_KEYS[kind], where)
    cls = {"zero": ZeroDrive, "gaussian": GaussianDrive, "piecewise_linear": PiecewiseLinearDrive}[kind]
    if kind == "piecewise_linear" and "knots" in table:
        table = {**table, "knots": tuple(table["knots"])}
    return _build(cls, table, where)


def parse_source(table: dict, drive_table: dict | None, where: str) -> SourceConfig:
    kind = table.get("type")
    if kind not in SYSTEM_KEYS:
        raise ConfigError(f"{where}.type must be one of {sorted(SYSTEM_KEYS)}, got {kind!r}")
    allowed = SYSTEM_KEYS[kind] | ({"drive"} if where == "reference" else set())
    _check_keys(table, allowed, where)
    params_cls = TwoLevelParams if kind == "two_level" else LambdaParams
    params = _build(params_cls, table, where, skip=("type", "drive"))
    if kind == "two_level":
        if drive_table is not None:
            raise ConfigError(f"the two-level system takes no drive ('{where}' drive given)")
        return SourceConfig(kind, params, ZeroDrive())
    return SourceConfig(kind, params, parse_drive(drive_table, f"{where}.drive" if where == "reference" else "drive"))


def parse_config(raw: dict) -> RunConfig:
    raw = copy.deepcopy(raw)
    _check_keys(raw, TOP_KEYS, "")
    if "system" not in raw:
        raise ConfigError("missing [system] table")
    gamma32_target = raw.get("gamma32_target", "g0")
    if gamma32_target not in GAMMA32_TARGETS:
        raise ConfigError(f"gamma32_target must be one of {GAMMA32_TARGETS}, got {gamma32_target!r}")
    source = parse_source(raw["system"], raw.get("drive"), "system")

    grid_t = raw.get("grid", {})
    _check_keys(grid_t, GRID_KEYS, "grid")
    grid = _build(TimeGrid, grid_t, "grid")

    out_t = raw.get("output", {})
    _check_keys(out_t, OUTPUT_KEYS, "output")
    prefix = str(out_t.get("prefix", "cavity_hom"))

    reference = None
    if "reference" in raw:
        ref_t = raw["reference"]
        reference = parse_source(ref_t, ref_t.get("drive") if isinstance(ref_t, dict) else None, "reference")
        if reference.system == "lambda" and "drive" not in ref_t:
            # without its own drive the reference is pumped like the source
            reference = SourceConfig(reference.system, reference.params, source.drive)

    sweep = None
    if "sweep" in raw:
        sw = raw["sweep"]
        _check_keys(sw, SWEEP_KEYS, "sweep")
        axes = []
        for name in ("axis1", "axis2"):
            if name not in sw:
                raise ConfigError(f"missing [sweep.{name}] table")
            _check_keys(sw[name], AXIS_KEYS, f"sweep.{name}")
            axes.append(_build(SweepAxis, sw[name], f"sweep.{name}", skip=()))
        mode = sw.get("mode", "identical")
        if mode not in MODES:
            raise ConfigError(f"sweep.mode must be one of {MODES}, got {mode!r}")
        sweep = SweepSettings(axes[0], axes[1], mode, bool(sw.get("optimize", False)))

    opt_t = raw.get("optimizer", {})
    _check_keys(opt_t, OPTIMIZER_KEYS, "optimizer")
    optimizer = _build(OptimizerConfig, opt_t, "optimizer", skip=())

    return RunConfig(source, grid, prefix, gamma32_target, reference, sweep, optimizer, raw)


def _parse_scalar(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` assignments (value parsed as a TOML literal)."""
    raw = copy.deepcopy(raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        path, value = item.split("=", 1)
        keys = path.strip().split(".")
        node = raw
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {path!r} does not address a table entry")
        node[keys[-1]] = _parse_scalar(value.strip())
    return raw


def load_config(path: str | Path, overrides: list[str] | None = None) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(apply_overrides(raw, overrides or []))
