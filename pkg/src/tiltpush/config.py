"""TOML scenario files, dotted-key overrides and the built-in pushing templates."""

from __future__ import annotations

import dataclasses
import difflib
from typing import Any, Iterable

import tomli
import tomli_w

from .actuation import ActuatorDynamics
from .control import ControlGains
from .environment import WallModel
from .simulator import (
    ConfigError,
    InitialState,
    PlateCommand,
    ScenarioConfig,
    SimSettings,
    Waypoint,
)
from .vehicle import ParameterRangeError, VehicleParams


class ConfigParseError(ConfigError):
    def __init__(self, msg: str, line: int | None = None, col: int | None = None):
        where = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(f"{msg}{where}")
        self.line = line
        self.col = col


# section name -> (dataclass, {toml key: field name})
_SECTIONS: dict[str, tuple[type, dict[str, str]]] = {
    "vehicle": (VehicleParams, {}),
    "gains": (ControlGains, {}),
    "actuators": (ActuatorDynamics, {}),
    "initial": (InitialState, {}),
    "sim": (SimSettings, {}),
}
_WALL_KEYS = {"enabled": None, "point": "point_w", "normal": "normal_w", "k_n": "k_n",
              "c_n": "c_n", "mu": "mu", "k_v": "k_v"}
_WAYPOINT_KEYS = ("t", "delta_p", "p", "psi")
_PLATE_KEYS = ("t", "l")
_TOP_KEYS = ("name", "vehicle", "gains", "actuators", "wall", "initial", "sim", "waypoints", "plate")


def _field_names(cls: type) -> list[str]:
    return [f.name for f in dataclasses.fields(cls)]


def valid_keys() -> list[str]:
    """Every dotted key accepted in a scenario file or ``--set`` override."""
    keys = ["name"]
    for section, (cls, _) in _SECTIONS.items():
        keys += [f"{section}.{name}" for name in _field_names(cls)]
    keys += [f"wall.{k}" for k in _WALL_KEYS]
    keys += [f"waypoints.{k}" for k in _WAYPOINT_KEYS]
    keys += [f"plate.{k}" for k in _PLATE_KEYS]
    return keys


def _unknown(key: str, candidates: Iterable[str]) -> ConfigError:
    candidates = list(candidates)
    head, _, leaf = key.rpartition(".")
    # a truncated key ("sim.dt") is best matched by completion, not edit distance
    near = [c for c in candidates if c.rpartition(".")[0] == head and c.rpartition(".")[2].startswith(leaf)]
    near = near or difflib.get_close_matches(key, candidates, n=1, cutoff=0.0)
    hint = f"; did you mean '{near[0]}'?" if near else ""
    return ConfigError(f"unknown key '{key}'{hint}")


def _check_keys(table: dict, allowed: Iterable[str], prefix: str) -> None:
    allowed = list(allowed)
    for key in table:
        if key not in allowed:
            raise _unknown(f"{prefix}{key}", [f"{prefix}{a}" for a in allowed])


def _tuplify(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    return value


def _build(cls: type, table: dict, section: str):
    _check_keys(table, _field_names(cls), f"{section}.")
    try:
        return cls(**{k: _tuplify(v) for k, v in table.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from exc


def config_from_dict(data: dict) -> ScenarioConfig:
    """Validated scenario from a plain nested dict; omitted values take defaults."""
    _check_keys(data, _TOP_KEYS, "")
    kwargs: dict[str, Any] = {}
    if "name" in data:
        kwargs["name"] = str(data["name"])
    for section, (cls, _) in _SECTIONS.items():
        if section in data:
            kwargs[section] = _build(cls, data[section], section)

    wall_table = dict(data.get("wall", {}))
    _check_keys(wall_table, _WALL_KEYS, "wall.")
    if wall_table.pop("enabled", True):
        kwargs["wall"] = _build(
            WallModel, {_WALL_KEYS[k]: v for k, v in wall_table.items()}, "wall"
        )
    else:
        kwargs["wall"] = None

    kwargs["waypoints"] = tuple(
        _build(Waypoint, wp, f"waypoints[{i}]") for i, wp in enumerate(data.get("waypoints", []))
    )
    kwargs["plate"] = tuple(
        _build(PlateCommand, pc, f"plate[{i}]") for i, pc in enumerate(data.get("plate", []))
    )
    try:
        return ScenarioConfig(**kwargs)
    except ParameterRangeError as exc:
        raise ConfigError(str(exc)) from exc


def _listify(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_listify(v) for v in value]
    return value


def _drop_none(d: dict) -> dict:
    return {k: _listify(v) for k, v in d.items() if v is not None}


def config_to_dict(cfg: ScenarioConfig) -> dict:
    out: dict[str, Any] = {"name": cfg.name}
    for section in _SECTIONS:
        out[section] = _drop_none(dataclasses.asdict(getattr(cfg, section)))
    if cfg.wall is None:
        out["wall"] = {"enabled": False}
    else:
        w = cfg.wall
        out["wall"] = {"enabled": True, "point": list(w.point_w), "normal": list(w.normal_w),
                       "k_n": w.k_n, "c_n": w.c_n, "mu": w.mu, "k_v": w.k_v}
    out["waypoints"] = [_drop_none(dataclasses.asdict(w)) for w in cfg.waypoints]
    out["plate"] = [dataclasses.asdict(p) for p in cfg.plate]
    return out


def dump_config(cfg: ScenarioConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def loads_raw(text: str) -> dict:
    """TOML text to a plain dict, without validation."""
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigParseError(
            f"malformed scenario file: {exc.msg if hasattr(exc, 'msg') else exc}",
            getattr(exc, "lineno", None),
            getattr(exc, "colno", None),
        ) from exc


def parse_value(text: str) -> Any:
    """Interpret an override value as a TOML literal, else as a bare string."""
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def apply_overrides(data: dict, overrides: Iterable[str]) -> dict:
    """Apply ``section.key=value`` overrides to a scenario dict (returns a copy).

    For array tables (``waypoints``, ``plate``) the value is applied to every
    entry, or to one entry with ``waypoints.2.delta_p=1.0``.
    """
    data = {k: (dict(v) if isinstance(v, dict) else [dict(x) for x in v] if isinstance(v, list) else v)
            for k, v in data.items()}
    keys = valid_keys()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        key, raw = item.split("=", 1)
        key = key.strip()
        value = parse_value(raw.strip())
        parts = key.split(".")
        if parts[0] in ("waypoints", "plate"):
            index = None
            if len(parts) == 3 and parts[1].isdigit():
                index = int(parts[1])
                parts = [parts[0], parts[2]]
            if len(parts) != 2 or ".".join(parts) not in keys:
                raise _unknown(key, keys)
            rows = data.setdefault(parts[0], [])
            targets = rows if index is None else [rows[index]] if index < len(rows) else None
            if targets is None:
                raise ConfigError(f"override '{key}': no {parts[0]} entry {index}")
            for row in targets:
                row[parts[1]] = value
                if parts[0] == "waypoints" and parts[1] in ("delta_p", "p"):
                    row.pop("p" if parts[1] == "delta_p" else "delta_p", None)
        elif key == "name":
            data["name"] = str(value)
        else:
            if key not in keys:
                raise _unknown(key, keys)
            data.setdefault(parts[0], {})[parts[1]] = value
    return data


def parse_config(text: str, overrides: Iterable[str] = ()) -> ScenarioConfig:
    """Parse and validate a TOML scenario, applying dotted-key overrides."""
    return config_from_dict(apply_overrides(loads_raw(text), overrides))


def read_config_text(path) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except FileNotFoundError as exc:
        raise ConfigError(f"scenario file not found: {path}") from exc


def load_config(path, overrides: Iterable[str] = ()) -> ScenarioConfig:
    return parse_config(read_config_text(path), overrides)


# -- built-in templates -------------------------------------------------------------

# Wall 1 m ahead of the start point; the first waypoint parks the tip 10 cm short of it.
_WALL = WallModel(point_w=(1.0, 0.0, 1.0), normal_w=(-1.0, 0.0, 0.0))
_APPROACH = -0.1


def case1_template() -> ScenarioConfig:
    """Contact at 0.6 m, shift the plate to l_max, then push harder in 0.2 m steps."""
    return ScenarioConfig(
        name="case1",
        wall=_WALL,
        waypoints=(
            Waypoint(t=0.0, delta_p=_APPROACH),
            Waypoint(t=4.0, delta_p=0.6),
            Waypoint(t=28.0, delta_p=0.8),
            Waypoint(t=36.0, delta_p=1.0),
            Waypoint(t=44.0, delta_p=1.2),
        ),
        plate=(PlateCommand(t=0.0, l=0.0), PlateCommand(t=7.0, l=0.18)),
        sim=SimSettings(duration=52.0),
    )


def case2_template(delta_ps: Iterable[float] = (0.4, 0.6, 0.8), segment: float = 8.0) -> ScenarioConfig:
    """Push with the plate held at l=0 through the given setpoint sequence."""
    delta_ps = tuple(delta_ps)
    waypoints = [Waypoint(t=0.0, delta_p=_APPROACH)]
    waypoints += [Waypoint(t=4.0 + segment * i, delta_p=dp) for i, dp in enumerate(delta_ps)]
    return ScenarioConfig(
        name="case2" if delta_ps == (0.4, 0.6, 0.8) else "case2_" + "_".join(f"{d:g}" for d in delta_ps),
        wall=_WALL,
        waypoints=tuple(waypoints),
        plate=(PlateCommand(t=0.0, l=0.0),),
        sim=SimSettings(duration=4.0 + segment * len(delta_ps)),
    )


def hover_template(duration: float = 10.0, l: float = 0.0) -> ScenarioConfig:
    """Free hover at 1 m with the plate held at ``l``."""
    return ScenarioConfig(
        name="hover" if l == 0.0 else f"hover_l{l:g}",
        wall=None,
        initial=InitialState(p=(0.0, 0.0, 1.0), yaw=0.0, l=l),
        waypoints=(Waypoint(t=0.0, p=(0.0, 0.0, 1.0)),),
        plate=(PlateCommand(t=0.0, l=l),),
        sim=SimSettings(duration=duration),
    )


TEMPLATES = {"case1": case1_template, "case2": case2_template, "hover": hover_template}

