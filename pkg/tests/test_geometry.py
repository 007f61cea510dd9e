import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lifiwifi.config import Room, SimConfig
from lifiwifi.geometry import (ApKind, ApNode, UserState, build_scenario, link_geometry,
                               link_geometry_matrix, rwp_step, sample_initial_users)

ROOM = Room()


def test_initial_users_inside_room():
    users = sample_initial_users(SimConfig(user_count=4), np.random.default_rng(0))
    assert len(users) == 4
    for u in users:
        assert 0 <= u.position[0] <= 10 and 0 <= u.position[1] <= 10
        assert 1.5 <= u.receiver_gap <= 2.0
        assert u.required_rate >= 1e6


def test_initial_users_reproducible():
    cfg = SimConfig(user_count=6)
    a = sample_initial_users(cfg, np.random.default_rng(42))
    b = sample_initial_users(cfg, np.random.default_rng(42))
    assert a == b


def test_rwp_unit_vector_step():
    u = UserState(0, (0.0, 0.0), 1.8, 5e7, waypoint=(3.0, 4.0), speed=1.0)
    nxt = rwp_step(u, 0.1, ROOM, np.random.default_rng(0))
    assert nxt.position == pytest.approx((0.06, 0.08))
    assert nxt.waypoint == (3.0, 4.0)


def test_rwp_static_flag():
    u = UserState(0, (1.0, 2.0), 1.8, 5e7)
    assert rwp_step(u, 5.0, ROOM, np.random.default_rng(0), static=True) is u


def test_rwp_snaps_to_waypoint_and_redraws():
    u = UserState(0, (2.95, 4.0), 1.8, 5e7, waypoint=(3.0, 4.0), speed=1.0)
    nxt = rwp_step(u, 0.1, ROOM, np.random.default_rng(0))
    assert nxt.position == (3.0, 4.0)
    assert nxt.waypoint is None


def test_rwp_dwell():
    u = UserState(0, (2.95, 4.0), 1.8, 5e7, waypoint=(3.0, 4.0), speed=1.0)
    rng = np.random.default_rng(0)
    u = rwp_step(u, 0.1, ROOM, rng, dwell_time=0.25)
    positions = []
    for _ in range(3):
        u = rwp_step(u, 0.1, ROOM, rng, dwell_time=0.25)
        positions.append(u.position)
    assert positions[0] == positions[1] == (3.0, 4.0)


def test_rwp_rejects_bad_dt():
    with pytest.raises(ValueError):
        rwp_step(UserState(0, (1, 1), 1.8, 5e7), 0.0, ROOM, np.random.default_rng(0))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rwp_stays_in_room(seed):
    rng = np.random.default_rng(seed)
    u = UserState(0, (5.0, 5.0), 1.8, 5e7)
    for _ in range(10_000):
        u = rwp_step(u, 0.1, ROOM, rng)
        x, y = u.position
        assert 0 <= x <= 10 and 0 <= y <= 10


def test_rwp_speed_in_range():
    rng = np.random.default_rng(5)
    u = UserState(0, (5.0, 5.0), 1.8, 5e7)
    for _ in range(2000):
        prev = u.position
        u = rwp_step(u, 0.1, ROOM, rng)
        assert math.dist(prev, u.position) <= 2.0 * 0.1 + 1e-12


class TestLinkGeometry:
    ap = ApNode(0, ApKind.LIFI, (5.0, 5.0, 3.5))

    def test_vertical(self):
        d, ci, cp = link_geometry(self.ap, UserState(0, (5.0, 5.0), 2.0, 5e7))
        assert (d, ci, cp) == (2.0, 1.0, 1.0)

    def test_diagonal(self):
        d, ci, cp = link_geometry(self.ap, UserState(0, (4.0, 5.0), 1.0, 5e7))
        assert d == pytest.approx(math.sqrt(2))
        assert ci == pytest.approx(1 / math.sqrt(2)) and cp == ci

    def test_horizontal_limit(self):
        d, ci, _ = link_geometry(self.ap, UserState(0, (2.0, 1.0), 1e-9, 5e7))
        assert d == pytest.approx(5.0)
        assert ci == pytest.approx(0.0, abs=1e-9)

    def test_matrix_matches_scalar(self):
        sc = build_scenario(SimConfig(scenario="dense"))
        users = sample_initial_users(SimConfig(user_count=5), np.random.default_rng(1))
        d, c = link_geometry_matrix(sc, users)
        assert d.shape == (sc.n_aps, 5)
        for i, ap in enumerate(sc.aps):
            for k, u in enumerate(users):
                dd, cc, _ = link_geometry(ap, u)
                assert d[i, k] == pytest.approx(dd) and c[i, k] == pytest.approx(cc)


def test_scenario_layouts():
    for name, n_l in [("interference_free", 4), ("interference_prone", 4), ("dense", 6)]:
        sc = build_scenario(SimConfig(scenario=name))
        assert sc.n_lifi == n_l and sc.n_aps == n_l + 1
        assert [a.kind for a in sc.aps[:n_l]] == [ApKind.LIFI] * n_l
        assert sc.wifi[0].position == (5.0, 5.0, 3.5)
