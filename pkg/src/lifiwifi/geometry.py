"""Room geometry, AP placement and random-waypoint user mobility."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .config import ConfigError, Room, SimConfig


class ApKind(str, Enum):
    LIFI = "lifi"
    WIFI = "wifi"


@dataclass(frozen=True)
class ApNode:
    id: int
    kind: ApKind
    position: tuple[float, float, float]


@dataclass(frozen=True)
class UserState:
    id: int
    position: tuple[float, float]
    receiver_gap: float
    required_rate: float
    waypoint: tuple[float, float] | None = None
    speed: float = 0.0
    pause_left: float = 0.0


@dataclass(frozen=True)
class Scenario:
    """Fixed part of an experiment: room and APs (LiFi first, then WiFi)."""

    room: Room
    aps: tuple[ApNode, ...]
    name: str = "custom"

    @property
    def lifi(self) -> tuple[ApNode, ...]:
        return tuple(a for a in self.aps if a.kind is ApKind.LIFI)

    @property
    def wifi(self) -> tuple[ApNode, ...]:
        return tuple(a for a in self.aps if a.kind is ApKind.WIFI)

    @property
    def n_lifi(self) -> int:
        return len(self.lifi)

    @property
    def n_aps(self) -> int:
        return len(self.aps)

    def ap_xyz(self) -> np.ndarray:
        return np.array([a.position for a in self.aps], dtype=float).reshape(-1, 3)


def build_scenario(cfg: SimConfig) -> Scenario:
    lifi, wifi = cfg.ap_positions()
    aps = [ApNode(i, ApKind.LIFI, p) for i, p in enumerate(lifi)]
    aps += [ApNode(len(lifi) + i, ApKind.WIFI, p) for i, p in enumerate(wifi)]
    return Scenario(cfg.room, tuple(aps), cfg.scenario)


def sample_required_rate(cfg: SimConfig, rng: np.random.Generator) -> float:
    rr = cfg.required_rate
    return float(max(rng.normal(rr.mean, rr.std), rr.floor))


def sample_initial_users(cfg: SimConfig, rng: np.random.Generator) -> list[UserState]:
    """Uniform positions and receiver gaps; demand from the truncated Gaussian."""
    room = cfg.room
    if not (room.width_x > 0 and room.depth_y > 0):
        raise ConfigError("room: invalid dimensions")
    lo, hi = room.user_plane_gap_range
    users = []
    for k in range(cfg.user_count):
        x = float(rng.uniform(0.0, room.width_x))
        y = float(rng.uniform(0.0, room.depth_y))
        gap = float(rng.uniform(lo, hi))
        users.append(UserState(k, (x, y), gap, sample_required_rate(cfg, rng)))
    return users


def _draw_leg(room: Room, speed_range, rng) -> tuple[tuple[float, float], float]:
    wp = (float(rng.uniform(0.0, room.width_x)), float(rng.uniform(0.0, room.depth_y)))
    return wp, float(rng.uniform(*speed_range))


def rwp_step(
    user: UserState,
    dt: float,
    room: Room,
    rng: np.random.Generator,
    *,
    speed_range: tuple[float, float] = (0.5, 2.0),
    dwell_time: float = 0.0,
    static: bool = False,
) -> UserState:
    """Advance one user by ``dt`` seconds under the random waypoint model.

    A user without a waypoint draws a uniform destination in the room and a
    uniform speed. When the destination is within ``speed * dt`` the user
    snaps onto it, then either pauses for ``dwell_time`` or immediately draws
    the next leg.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if static:
        return user
    if user.pause_left > 0:
        left = user.pause_left - dt
        return replace(user, pause_left=max(left, 0.0), speed=0.0)

    waypoint, speed = user.waypoint, user.speed
    if waypoint is None:
        waypoint, speed = _draw_leg(room, speed_range, rng)

    x, y = user.position
    dx, dy = waypoint[0] - x, waypoint[1] - y
    dist = math.hypot(dx, dy)
    step = speed * dt
    if dist <= step:
        if dwell_time > 0:
            return replace(user, position=waypoint, waypoint=None, speed=0.0, pause_left=dwell_time)
        return replace(user, position=waypoint, waypoint=None, speed=0.0)
    pos = (x + step * dx / dist, y + step * dy / dist)
    return replace(user, position=pos, waypoint=waypoint, speed=speed)


def link_geometry(ap: ApNode, user: UserState, ceiling: float | None = None) -> tuple[float, float, float]:
    """(distance, cos_irradiation, cos_incidence) for a downward LED / upward PD pair.

    ``ceiling`` is only needed for APs mounted below the ceiling plane.
    """
    dx = ap.position[0] - user.position[0]
    dy = ap.position[1] - user.position[1]
    h = user.receiver_gap
    if ceiling is not None:
        h -= ceiling - ap.position[2]
    d = math.sqrt(dx * dx + dy * dy + h * h)
    c = h / d if d > 0 else 1.0
    return d, c, c


def link_geometry_matrix(scenario: Scenario, users: list[UserState]) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised distance and cosine matrices, both shaped (n_aps, K)."""
    ap = scenario.ap_xyz()
    if not users:
        return np.zeros((len(ap), 0)), np.zeros((len(ap), 0))
    pos = np.array([u.position for u in users], dtype=float)
    gap = np.array([u.receiver_gap for u in users], dtype=float)
    dx = ap[:, 0:1] - pos[None, :, 0]
    dy = ap[:, 1:2] - pos[None, :, 1]
    h = gap[None, :] - (scenario.room.ceiling_height - ap[:, 2:3])
    d = np.sqrt(dx * dx + dy * dy + h * h)
    return d, h / d
