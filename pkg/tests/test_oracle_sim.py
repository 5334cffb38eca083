import math

import numpy as np
import pytest

from conftest import ramp_map
from terrainplan.errors import FormatError, MagicError, OutOfMapError, PolicyError, TruncatedError, VersionError
from terrainplan.oracle import (Outcome, Status, load_episode_log, run_episode, save_episode_log, settle_pose,
                                step_oracle)
from terrainplan.state import ControlInput, VehicleState
from terrainplan.terrain import ElevationMap, flat_map
from terrainplan.vehicle import V4W, V6W, VehicleGeometry, geometry_preset


def straight_at(goal, v=0.2):
    def policy(state):
        err = math.remainder(math.atan2(goal[1] - state.y, goal[0] - state.x) - state.yaw, 2 * math.pi)
        return ControlInput(v, max(-0.78, min(0.78, err)))
    return policy


def test_presets():
    assert geometry_preset("V6W") is V6W
    assert V6W.max_climb_height == 0.20 and V4W.max_climb_height == 0.15
    assert V6W.rollover_limit == pytest.approx(math.radians(30))
    with pytest.raises(Exception):
        VehicleGeometry("bad", 0.5, 0.2, 0.2, 0.6, V4W.contact_points, 0.1)


@pytest.mark.parametrize("yaw", [0.0, 0.7, -2.0, math.pi / 2])
def test_settle_flat(yaw):
    z, roll, pitch = settle_pose(flat_map(0.0), 0.8, 0.4, yaw, V6W)
    assert (z, roll, pitch) == (0.0, 0.0, 0.0)


def test_settle_ramp_pitch_and_roll():
    alpha = math.radians(12)
    m = ramp_map(math.tan(alpha))
    z, roll, pitch = settle_pose(m, 1.5, 1.5, 0.0, V6W)
    assert pitch == pytest.approx(alpha, abs=1e-6)
    assert roll == pytest.approx(0.0, abs=1e-6)
    # facing +y the ramp rises to the right of the vehicle: left side down
    z, roll, pitch = settle_pose(m, 1.5, 1.5, math.pi / 2, V6W)
    assert roll == pytest.approx(-alpha, abs=1e-6)
    assert pitch == pytest.approx(0.0, abs=1e-6)
    assert z == pytest.approx(1.5 * math.tan(alpha), abs=1e-6)


def test_settle_shift_equivariance():
    rng = np.random.default_rng(0)
    h = rng.uniform(0, 0.2, (150, 150)).astype(np.float32)
    a = settle_pose(ElevationMap(h, 0.01), 0.7, 0.8, 0.3, V6W)
    b = settle_pose(ElevationMap(h + np.float32(0.25), 0.01), 0.7, 0.8, 0.3, V6W)
    assert b[0] - a[0] == pytest.approx(0.25, abs=1e-6)
    assert b[1:] == pytest.approx(a[1:], abs=1e-6)


def test_settle_out_of_map():
    with pytest.raises(OutOfMapError):
        settle_pose(flat_map(0.0), 0.05, 0.4, 0.0, V6W)


def test_step_straight_flat():
    m = flat_map(0.0, cols=300, rows=150)
    s = VehicleState(0.8, 0.6)
    r = step_oracle(s, ControlInput(0.2, 0.0), m, V6W, 1.0)
    assert r.status is Status.OK
    assert r.state.as_tuple() == pytest.approx((1.0, 0.6, 0, 0, 0, 0), abs=1e-12)
    assert r.state.t == 1


def test_step_wall_blocks():
    h = np.zeros((150, 300), dtype=np.float32)
    h[:, 150:] = 0.5
    m = ElevationMap(h, 0.008)
    s = VehicleState(150 * 0.008 - 0.36, 0.6)
    r = step_oracle(s, ControlInput(0.2, 0.0), m, V6W, 1.0)
    assert r.blocked
    assert (r.state.x, r.state.y, r.state.yaw) == (s.x, s.y, s.yaw)


def test_step_rollover():
    m = ramp_map(math.tan(math.radians(35)))
    r = step_oracle(VehicleState(1.0, 1.5), ControlInput(0.1, 0.0), m, V6W, 1.0)
    assert r.status is Status.ROLLED_OVER


def test_step_noise_reproducible():
    m = flat_map(0.0, cols=300, rows=150)
    s = VehicleState(0.8, 0.6)
    a = step_oracle(s, ControlInput(0.2, 0.3), m, V6W, 1.0, 0.05, np.random.default_rng(4))
    b = step_oracle(s, ControlInput(0.2, 0.3), m, V6W, 1.0, 0.05, np.random.default_rng(4))
    c = step_oracle(s, ControlInput(0.2, 0.3), m, V6W, 1.0, 0.05, np.random.default_rng(5))
    assert a.state == b.state and a.state != c.state


def test_episode_flat_straight():
    m = flat_map(0.0, cols=400, rows=150)
    res = run_episode(m, VehicleState(0.5, 0.6), (2.5, 0.6), 0.05, straight_at((2.5, 0.6)), V6W, dt=1.0,
                      max_steps=50, slip_noise_std=0.0)
    assert res.outcome is Outcome.REACHED_GOAL
    assert res.traversal_time == pytest.approx(2.0 / 0.2)
    assert math.hypot(res.trajectory[-1].x - 2.5, res.trajectory[-1].y - 0.6) <= 0.05


def test_episode_wall_never_succeeds():
    h = np.zeros((150, 400), dtype=np.float32)
    h[:, 200:210] = 0.5
    m = ElevationMap(h, 0.008)
    res = run_episode(m, VehicleState(0.5, 0.6), (2.8, 0.6), 0.2, straight_at((2.8, 0.6)), V6W, dt=0.5,
                      max_steps=80, seed=1)
    assert res.outcome in (Outcome.IMMOBILIZED, Outcome.TIMEOUT)


def test_episode_zero_steps():
    res = run_episode(flat_map(0.0), VehicleState(0.8, 0.4), (1.5, 0.4), 0.1, straight_at((1.5, 0.4)), V6W,
                      max_steps=0)
    assert res.outcome is Outcome.TIMEOUT and len(res.trajectory) == 1 and res.traversal_time == 0


def test_episode_bad_policy():
    with pytest.raises(PolicyError):
        run_episode(flat_map(0.0), VehicleState(0.8, 0.4), (1.5, 0.4), 0.1,
                    lambda s: ControlInput(float("nan"), 0.0), V6W)


def test_episode_means_and_determinism():
    rng = np.random.default_rng(0)
    h = rng.uniform(0, 0.05, (160, 380)).astype(np.float32)
    m = ElevationMap(h, 0.008)
    args = (m, VehicleState(0.5, 0.6), (2.6, 0.6), 0.2, straight_at((2.6, 0.6)), V6W)
    a = run_episode(*args, seed=3, max_steps=40)
    b = run_episode(*args, seed=3, max_steps=40)
    assert a.trajectory == b.trajectory
    assert a.mean_abs_roll == pytest.approx(np.mean([abs(s.roll) for s in a.trajectory]), abs=1e-12)
    assert a.mean_abs_pitch == pytest.approx(np.mean([abs(s.pitch) for s in a.trajectory]), abs=1e-12)


def test_eplog_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    m = ElevationMap(rng.uniform(0, 0.05, (160, 380)).astype(np.float32), 0.008)
    res = run_episode(m, VehicleState(0.5, 0.6), (2.6, 0.6), 0.2, straight_at((2.6, 0.6)), V6W, seed=2)
    save_episode_log(res, tmp_path / "e.eplog")
    back = load_episode_log(tmp_path / "e.eplog")
    assert back.outcome == res.outcome and back.dt == res.dt
    assert back.trajectory == res.trajectory and back.inputs == res.inputs
    save_episode_log(back, tmp_path / "f.eplog")
    assert (tmp_path / "e.eplog").read_bytes() == (tmp_path / "f.eplog").read_bytes()
    text = (tmp_path / "e.eplog").read_text().splitlines()
    assert text[0] == "EPLOG v1 dt=0.5" and text[-1] == f"outcome={res.outcome.value}"


def test_eplog_errors(tmp_path):
    (tmp_path / "a").write_text("LOG v1 dt=1\noutcome=timeout\n")
    (tmp_path / "b").write_text("EPLOG v2 dt=1\n0,0,0,0,0,0,0,,\noutcome=timeout\n")
    (tmp_path / "c").write_text("EPLOG v1 dt=1\n0,0,0,0,0,0,0,,\n")
    (tmp_path / "d").write_text("EPLOG v1 dt=1\n0,0,0,0,0\noutcome=timeout\n")
    with pytest.raises(MagicError):
        load_episode_log(tmp_path / "a")
    with pytest.raises(VersionError):
        load_episode_log(tmp_path / "b")
    with pytest.raises(TruncatedError):
        load_episode_log(tmp_path / "c")
    with pytest.raises(FormatError):
        load_episode_log(tmp_path / "d")
