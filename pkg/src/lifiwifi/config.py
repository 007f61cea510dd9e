"""Simulation configuration: dataclasses, presets and the YAML loader.

Every section rejects unknown keys, so a typo such as ``learing_rate`` fails
loudly instead of silently falling back to a default.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml


class ConfigError(ValueError):
    """Raised for unparseable or invalid configuration."""


# LiFi AP layouts (x, y) on the ceiling of the default 10 x 10 m room.
LAYOUTS = {
    "interference_free": [(2.5, 2.5), (2.5, 7.5), (7.5, 2.5), (7.5, 7.5)],
    "interference_prone": [(3.5, 3.5), (3.5, 6.5), (6.5, 3.5), (6.5, 6.5)],
    "dense": [(2.5, 2.5), (2.5, 7.5), (7.5, 2.5), (7.5, 7.5), (5.0, 2.5), (5.0, 7.5)],
}
SCENARIOS = (*LAYOUTS, "custom")

# network setting -> (N_l, N_w)
NETWORK_SETTINGS = {1: (2, 5), 2: (3, 7)}

SOLVERS = ("es", "sss", "greedy", "sppo")


def _check(cond: bool, name: str, constraint: str) -> None:
    if not cond:
        raise ConfigError(f"{name}: must satisfy {constraint}")


@dataclass(frozen=True)
class Room:
    width_x: float = 10.0
    depth_y: float = 10.0
    ceiling_height: float = 3.5
    user_plane_gap_range: tuple[float, float] = (1.5, 2.0)

    def __post_init__(self):
        object.__setattr__(self, "user_plane_gap_range", tuple(float(v) for v in self.user_plane_gap_range))
        _check(self.width_x > 0, "room.width_x", "> 0")
        _check(self.depth_y > 0, "room.depth_y", "> 0")
        _check(self.ceiling_height > 0, "room.ceiling_height", "> 0")
        lo, hi = self.user_plane_gap_range
        _check(0 < lo <= hi < self.ceiling_height, "room.user_plane_gap_range",
               "0 < low <= high < ceiling_height")


@dataclass(frozen=True)
class LifiParams:
    """Optical front-end constants. Angles are stored in radians."""

    pd_area: float = 1e-4
    optical_filter_gain: float = 1.0
    fov_semi_angle: float = math.pi / 2
    refractive_index: float = 1.5
    half_intensity_angle: float = math.pi / 3
    responsivity: float = 0.53
    tx_optical_power: float = 3.0
    noise_psd: float = 1e-21
    bandwidth: float = 40e6

    def __post_init__(self):
        for f in dataclasses.fields(self):
            _check(getattr(self, f.name) > 0, f"lifi.{f.name}", "> 0")
        _check(self.fov_semi_angle <= math.pi / 2, "lifi.fov_semi_angle", "<= 90 degrees")
        _check(self.half_intensity_angle < math.pi / 2, "lifi.half_intensity_angle", "< 90 degrees")


@dataclass(frozen=True)
class WifiParams:
    breakpoint_distance: float = 5.0
    carrier_freq: float = 2.4e9
    tx_power: float = 0.1
    noise_psd: float = 4.002e-17
    bandwidth: float = 10e6
    shadow_sigma_near: float = 3.0
    shadow_sigma_far: float = 5.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            _check(getattr(self, f.name) > 0, f"wifi.{f.name}", "> 0")


@dataclass(frozen=True)
class CapacityLimits:
    per_lifi: int = 2
    per_wifi: int = 5

    def __post_init__(self):
        _check(int(self.per_lifi) >= 1, "caps.per_lifi", ">= 1")
        _check(int(self.per_wifi) >= 1, "caps.per_wifi", ">= 1")


@dataclass(frozen=True)
class RequiredRate:
    """Truncated Gaussian for per-user demand, bits/second."""

    mean: float = 50e6
    std: float = 10e6
    floor: float = 1e6

    def __post_init__(self):
        _check(self.std >= 0, "required_rate.std", ">= 0")
        _check(self.floor > 0, "required_rate.floor", "> 0")


@dataclass(frozen=True)
class TrainerConfig:
    learning_rate: float = 1e-3
    clip_epsilon: float = 0.1
    discount: float = 0.99
    epochs_per_update: int = 8
    update_interval: int = 450
    max_episodes: int = 2000
    episode_length: int = 100
    hidden_units: int = 64
    value_loss_weight: float = 0.5
    entropy_bonus_weight: float = 0.1
    state_scale: float = 5.0
    redraw_positions: bool = True
    bootstrap_truncation: bool = True
    gae_lambda: float = 0.7

    def __post_init__(self):
        _check(self.learning_rate > 0, "trainer.learning_rate", "> 0")
        _check(0 < self.clip_epsilon < 1, "trainer.clip_epsilon", "in (0, 1)")
        _check(0 < self.discount < 1, "trainer.discount", "in (0, 1)")
        _check(self.epochs_per_update >= 1, "trainer.epochs_per_update", ">= 1")
        _check(self.update_interval >= 1, "trainer.update_interval", ">= 1")
        _check(self.max_episodes >= 1, "trainer.max_episodes", ">= 1")
        _check(self.episode_length >= 1, "trainer.episode_length", ">= 1")
        _check(self.hidden_units >= 1, "trainer.hidden_units", ">= 1")
        _check(self.value_loss_weight >= 0, "trainer.value_loss_weight", ">= 0")
        _check(self.entropy_bonus_weight >= 0, "trainer.entropy_bonus_weight", ">= 0")
        _check(self.state_scale > 0, "trainer.state_scale", "> 0")
        _check(0 <= self.gae_lambda <= 1, "trainer.gae_lambda", "in [0, 1]")


@dataclass(frozen=True)
class SimConfig:
    room: Room = field(default_factory=Room)
    scenario: str = "interference_free"
    lifi_positions: tuple | None = None
    wifi_positions: tuple | None = None
    setting: int | None = 1
    caps: CapacityLimits = field(default_factory=CapacityLimits)
    user_count: int = 8
    mobility: str = "static"
    dt: float = 0.1
    speed_range: tuple[float, float] = (0.5, 2.0)
    dwell_time: float = 0.0
    lifi: LifiParams = field(default_factory=LifiParams)
    wifi: WifiParams = field(default_factory=WifiParams)
    channel_mode: str = "stochastic"
    blockage_rate: float = 0.0
    blockage_attenuation: float = 1e-3
    required_rate: RequiredRate = field(default_factory=RequiredRate)
    reward_mode: str = "sum_rate"
    penalty_coeff: float = 10.0
    rate_scale: float = 1e8
    solvers: tuple[str, ...] = SOLVERS
    es_budget: float = 1e8
    eval_slots: int = 1000
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    seed: int = 0
    output_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        _check(self.scenario in SCENARIOS, "scenario", f"one of {SCENARIOS}")
        if self.setting is not None:
            _check(self.setting in NETWORK_SETTINGS, "setting", "1, 2 or null")
            n_l, n_w = NETWORK_SETTINGS[self.setting]
            object.__setattr__(self, "caps", CapacityLimits(n_l, n_w))
        if self.scenario == "custom":
            _check(bool(self.lifi_positions) or bool(self.wifi_positions), "lifi_positions",
                   "non-empty for the custom scenario")
        object.__setattr__(self, "speed_range", tuple(float(v) for v in self.speed_range))
        object.__setattr__(self, "solvers", tuple(self.solvers))
        _check(self.user_count >= 0, "user_count", ">= 0")
        _check(self.mobility in ("static", "rwp"), "mobility", "'static' or 'rwp'")
        _check(self.dt > 0, "dt", "> 0")
        lo, hi = self.speed_range
        _check(0 < lo <= hi, "speed_range", "0 < min <= max")
        _check(self.dwell_time >= 0, "dwell_time", ">= 0")
        _check(self.channel_mode in ("stochastic", "deterministic"), "channel_mode",
               "'stochastic' or 'deterministic'")
        _check(0 <= self.blockage_rate <= 1, "blockage_rate", "in [0, 1]")
        _check(0 <= self.blockage_attenuation <= 1, "blockage_attenuation", "in [0, 1]")
        _check(self.reward_mode in ("sum_rate", "fairness"), "reward_mode", "'sum_rate' or 'fairness'")
        _check(self.penalty_coeff >= 0, "penalty_coeff", ">= 0")
        _check(self.rate_scale > 0, "rate_scale", "> 0")
        _check(all(s in SOLVERS for s in self.solvers), "solvers", f"subset of {SOLVERS}")
        _check(self.es_budget >= 1, "es_budget", ">= 1")
        _check(self.eval_slots >= 1, "eval_slots", ">= 1")
        _check(self.workers >= 1, "workers", ">= 1")
        lifi, wifi = self.ap_positions()
        room = self.room
        for x, y, z in lifi + wifi:
            _check(0 <= x <= room.width_x and 0 <= y <= room.depth_y and 0 < z <= room.ceiling_height,
                   "ap positions", "inside the room")
        for *_, z in lifi:
            _check(z == room.ceiling_height, "lifi_positions", "on the ceiling plane")

    @property
    def deterministic(self) -> bool:
        return self.channel_mode == "deterministic"

    def ap_positions(self) -> tuple[list, list]:
        """(lifi, wifi) lists of (x, y, z); z defaults to the ceiling."""
        h = self.room.ceiling_height
        if self.scenario == "custom":
            lifi = list(self.lifi_positions or [])
        else:
            lifi = LAYOUTS[self.scenario] if self.lifi_positions is None else list(self.lifi_positions)
        wifi = self.wifi_positions
        if wifi is None:
            wifi = [(self.room.width_x / 2, self.room.depth_y / 2)]
        pad = lambda p: tuple(float(v) for v in p) if len(p) == 3 else (float(p[0]), float(p[1]), h)
        return [pad(p) for p in lifi], [pad(p) for p in wifi]

    @property
    def setting_label(self) -> str:
        return str(self.setting) if self.setting is not None else "custom"

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["lifi"] = _lifi_to_user_units(d["lifi"])
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


_LIFI_ANGLES = {"fov_semi_angle": "fov_semi_angle_deg", "half_intensity_angle": "half_intensity_angle_deg"}


def _lifi_to_user_units(d: dict) -> dict:
    d = dict(d)
    for rad, deg in _LIFI_ANGLES.items():
        d[deg] = math.degrees(d.pop(rad))
    return d


def _lifi_from_user_units(d: dict) -> dict:
    d = dict(d)
    for rad, deg in _LIFI_ANGLES.items():
        if deg in d:
            d[rad] = math.radians(d.pop(deg))
    return d


_NESTED = {
    "room": Room,
    "caps": CapacityLimits,
    "lifi": LifiParams,
    "wifi": WifiParams,
    "required_rate": RequiredRate,
    "trainer": TrainerConfig,
}


def _build(cls, data: dict, prefix: str = ""):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix.rstrip('.') or 'config'}: expected a mapping, got {type(data).__name__}")
    if cls is LifiParams:
        data = _lifi_from_user_units(data)
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key {prefix}{unknown[0]!r}")
    kwargs = {}
    for key, value in data.items():
        if cls is SimConfig and key in _NESTED:
            value = _build(_NESTED[key], value or {}, f"{key}.")
        elif isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[key] = value
    if cls is SimConfig and "caps" in data and "setting" not in data:
        kwargs["setting"] = None  # explicit caps override the preset setting
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{prefix}: {exc}") from exc


def config_from_dict(data: dict | None) -> SimConfig:
    return _build(SimConfig, data or {})


def load_config(path: str | Path) -> SimConfig:
    """Parse a YAML config file; omitted fields take the documented defaults."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"parse error in {path}{where}: {getattr(exc, 'problem', exc)}") from exc
    return config_from_dict(data)
