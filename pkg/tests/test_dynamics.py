import math

import numpy as np
import pytest

from oracles import arc_reference
from terrainplan.dynamics import (OMEGA_EPSILON, DynamicsConfig, ackermann_arrays, ackermann_step, predict_next,
                                  rollout)
from terrainplan.neuralnet import init_model
from terrainplan.state import ControlInput, VehicleState
from terrainplan.terrain import ElevationMap, flat_map


def test_straight():
    assert ackermann_step(0.0, 0.0, 0.0, ControlInput(0.2, 0.0), 1.0) == (0.2, 0.0, 0.0)


def test_arc_hand_values():
    x, y, yaw = ackermann_step(0.0, 0.0, 0.0, ControlInput(0.2, 0.78), 1.0)
    assert x == pytest.approx(0.1803, abs=5e-5)
    assert y == pytest.approx(0.0741, abs=5e-5)
    assert yaw == pytest.approx(0.78, abs=1e-15)
    assert x == pytest.approx(0.2 / 0.78 * math.sin(0.78), abs=1e-12)
    assert y == pytest.approx(0.2 / 0.78 * (1 - math.cos(0.78)), abs=1e-12)


def test_arc_reference_random():
    rng = np.random.default_rng(0)
    for _ in range(200):
        x, y, yaw = rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-3, 3)
        v, w, dt = rng.uniform(-1, 1), rng.choice([-1, 1]) * rng.uniform(0.01, 1), rng.uniform(0.1, 2)
        got = ackermann_step(x, y, yaw, ControlInput(v, w), dt)
        ref = arc_reference(x, y, yaw, v, w, dt)
        assert got[:2] == pytest.approx(ref[:2], abs=1e-12)
        assert math.remainder(got[2] - ref[2], 2 * math.pi) == pytest.approx(0, abs=1e-12)


def test_epsilon_boundary():
    for yaw in (0.0, 1.0, -2.5):
        above = ackermann_step(0.3, -0.1, yaw, ControlInput(1.0, OMEGA_EPSILON * (1 + 1e-9)), 1.0)
        below = ackermann_step(0.3, -0.1, yaw, ControlInput(1.0, OMEGA_EPSILON), 1.0)
        assert math.hypot(above[0] - below[0], above[1] - below[1]) < 1e-9


def test_yaw_wrapped():
    _, _, yaw = ackermann_step(0, 0, 3.0, ControlInput(0.2, 0.78), 1.0)
    assert -math.pi <= yaw < math.pi


def test_arrays_match_scalar():
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, (5, 50))
    X[4, :10] = 0.0
    xs, ys, yaws = ackermann_arrays(*X, 0.7)
    for k in range(50):
        ref = ackermann_step(*X[:3, k], ControlInput(X[3, k], X[4, k]), 0.7)
        assert (xs[k], ys[k], yaws[k]) == pytest.approx(ref, abs=1e-14)


def test_se2_equivariance():
    rng = np.random.default_rng(2)
    for _ in range(50):
        x, y, yaw = rng.uniform(-1, 1, 3)
        inp = ControlInput(rng.uniform(0, 1), rng.uniform(-1, 1))
        tx, ty, th = rng.uniform(-1, 1, 3)
        c, s = math.cos(th), math.sin(th)
        a = ackermann_step(x, y, yaw, inp, 1.0)
        b = ackermann_step(c * x - s * y + tx, s * x + c * y + ty, yaw + th, inp, 1.0)
        assert b[0] == pytest.approx(c * a[0] - s * a[1] + tx, abs=1e-12)
        assert b[1] == pytest.approx(s * a[0] + c * a[1] + ty, abs=1e-12)
        assert math.remainder(b[2] - a[2] - th, 2 * math.pi) == pytest.approx(0, abs=1e-12)


def test_predict_next_zero_model_flat():
    m = flat_map(0.0, cols=300, rows=150)
    s = predict_next(VehicleState(0.8, 0.6), ControlInput(0.2, 0.0), m, DynamicsConfig())
    assert s.as_tuple() == pytest.approx((1.0, 0.6, 0, 0, 0, 0), abs=1e-12)
    assert s.t == 1 and not s.off_map


def test_predict_next_zero_input_keeps_pose():
    rng = np.random.default_rng(3)
    m = ElevationMap(rng.uniform(0, 0.3, (150, 300)).astype(np.float32), 0.008)
    cfg = DynamicsConfig(model=init_model(0))
    s0 = VehicleState(1.0, 0.6, 0.1, 0.05, -0.02, 0.4)
    s1 = predict_next(s0, ControlInput(0.0, 0.0), m, cfg)
    assert s1.planar == s0.planar
    assert s1.z == pytest.approx(m.sample([1.0], [0.6])[0][0])


def test_off_map_holds_z():
    m = flat_map(0.2, cols=100, rows=100)
    s = predict_next(VehicleState(0.7, 0.4, 0.2), ControlInput(0.5, 0.0), m, DynamicsConfig())
    assert s.off_map and s.z == 0.2


def test_rollout_lengths_and_flat_distance():
    m = flat_map(0.0, cols=300, rows=150)
    states = rollout(VehicleState(0.5, 0.6), [ControlInput(0.2, 0.0)] * 5, m, DynamicsConfig())
    assert len(states) == 6 and states[-1].x == pytest.approx(1.5, abs=1e-12)
    still = rollout(VehicleState(0.5, 0.6), [ControlInput(0.0, 0.0)] * 4, m, DynamicsConfig())
    assert {s.planar for s in still} == {(0.5, 0.6, 0.0)}
    with pytest.raises(ValueError):
        rollout(VehicleState(0.5, 0.6), [], m, DynamicsConfig())


def test_rollout_composition():
    rng = np.random.default_rng(4)
    m = ElevationMap(rng.uniform(0, 0.3, (150, 300)).astype(np.float32), 0.008)
    cfg = DynamicsConfig(model=init_model(1), dt=0.5)
    a = [ControlInput(0.2, w) for w in (0.1, -0.3, 0.0)]
    b = [ControlInput(0.2, w) for w in (0.5, 0.2)]
    s0 = VehicleState(1.0, 0.6, 0.05, 0.0, 0.0, 0.2)
    whole = rollout(s0, a + b, m, cfg)
    first = rollout(s0, a, m, cfg)
    second = rollout(first[-1], b, m, cfg)
    for p, q in zip(whole, first + second[1:]):
        assert p.as_tuple() == pytest.approx(q.as_tuple(), abs=1e-12)


def test_random_model_outputs_finite():
    rng = np.random.default_rng(5)
    m = ElevationMap(rng.uniform(0, 0.6, (150, 300)).astype(np.float32), 0.008)
    cfg = DynamicsConfig(model=init_model(2))
    for k in range(20):
        s = VehicleState(rng.uniform(0, 2.4), rng.uniform(0, 1.2), 0.1, *rng.uniform(-0.5, 0.5, 2),
                         rng.uniform(-3, 3))
        assert predict_next(s, ControlInput(0.2, rng.uniform(-0.78, 0.78)), m, cfg).is_finite()


def test_config_validation():
    with pytest.raises(ValueError):
        DynamicsConfig(dt=0.0)
    with pytest.raises(ValueError):
        DynamicsConfig(omega_epsilon=0.0)
