"""Property-based checks with hypothesis."""
import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import cost_reference
from terrainplan.controller import steering_command, throttle_from_pitch
from terrainplan.dynamics import ackermann_step
from terrainplan.neuralnet import loss_h
from terrainplan.oracle import settle_pose
from terrainplan.planner import CostWeights, GoalSpec, evaluate_cost
from terrainplan.state import ControlInput, VehicleState
from terrainplan.terrain import ElevationMap, TerrainGenSpec, generate_rock_field
from terrainplan.vehicle import V6W

finite = st.floats(-2.0, 2.0, allow_nan=False)
angle = st.floats(-0.6, 0.6, allow_nan=False)

_rng = np.random.default_rng(0)
RANDOM_MAP = ElevationMap(_rng.uniform(0, 0.3, (120, 160)).astype(np.float32), 0.01)


@given(st.floats(0.02, 1.17), st.floats(0.02, 1.17), st.floats(-1e-4, 1e-4), st.floats(-1e-4, 1e-4))
def test_elevation_continuity(x, y, dx, dy):
    m = RANDOM_MAP
    h = m.heights.astype(np.float64)
    slope = max(np.abs(np.diff(h, axis=0)).max(), np.abs(np.diff(h, axis=1)).max()) / m.resolution
    (a, b), oob = m.sample([x, x + dx], [y, y + dy])
    assert not oob.any()
    assert abs(a - b) < 2 * slope * math.hypot(dx, dy) + 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.05, 0.8), st.integers(0, 30))
def test_rock_field_capped_and_deterministic(seed, max_height, count):
    spec = TerrainGenSpec(seed=seed, length=1.0, width=0.6, max_height=max_height, rock_count=count)
    a = generate_rock_field(spec)
    assert float(a.heights.max()) <= max_height
    assert a == generate_rock_field(spec)


@given(st.floats(0.0, 0.5))
def test_settle_shift(c):
    a = settle_pose(RANDOM_MAP, 0.8, 0.6, 0.4, V6W)
    b = settle_pose(ElevationMap(RANDOM_MAP.heights + np.float32(c), 0.01), 0.8, 0.6, 0.4, V6W)
    assert abs(b[1] - a[1]) < 1e-5 and abs(b[2] - a[2]) < 1e-5


@given(st.lists(st.tuples(finite, finite, finite, angle, angle, st.booleans()), min_size=2, max_size=16),
       finite, finite)
def test_cost_terms_signs_and_reference(rows, gx, gy):
    states = [VehicleState(x, y, z, r, p, 0.0, 0, f) for x, y, z, r, p, f in rows]
    w = CostWeights()
    total, (ro, im, hc, mb, est) = evaluate_cost(states, GoalSpec(gx, gy), w)
    assert ro >= 0 and im <= 0 and hc >= 0 and mb >= 0 and est >= 0
    cols = list(zip(*rows))
    wd = {k: getattr(w, k) for k in ("w1", "w2", "w3", "w4", "w5", "w11", "w12", "w21", "w22")}
    ref, _ = cost_reference(*cols, (gx, gy), wd)
    assert abs(total - ref) < 1e-9
    assert abs(total - (ro + 8 * im + 0.07 * hc + 10 * mb + 4 * est)) < 1e-9


@given(st.lists(st.tuples(finite, finite), min_size=2, max_size=10), finite, finite)
def test_goal_triangle_inequality(pts, gx, gy):
    states = [VehicleState(x, y) for x, y in pts]
    d_end = evaluate_cost(states, GoalSpec(gx, gy), CostWeights(*([0.0] * 4), 1.0, *([0.0] * 4)))[0]
    for s in states:
        assert d_end <= math.hypot(s.x - gx, s.y - gy) + math.hypot(states[-1].x - s.x, states[-1].y - s.y) + 1e-12


@given(finite, finite, st.floats(-3, 3), st.floats(0, 1), st.floats(-1, 1), st.floats(-3, 3), finite, finite)
def test_ackermann_se2(x, y, yaw, v, w, th, tx, ty):
    a = ackermann_step(x, y, yaw, ControlInput(v, w), 1.0)
    c, s = math.cos(th), math.sin(th)
    b = ackermann_step(c * x - s * y + tx, s * x + c * y + ty, yaw + th, ControlInput(v, w), 1.0)
    assert abs(b[0] - (c * a[0] - s * a[1] + tx)) < 1e-9
    assert abs(b[1] - (s * a[0] + c * a[1] + ty)) < 1e-9


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_throttle_monotone(p, q):
    lo, hi = sorted((p, q))
    assert throttle_from_pitch(lo) <= throttle_from_pitch(hi)
    assert throttle_from_pitch(p) in (0.15, 0.20, 0.30)


@given(finite, finite, st.floats(-3, 3), finite, finite)
def test_steering_bounded(x, y, yaw, wx, wy):
    assert abs(steering_command(VehicleState(x, y, yaw=yaw), (wx, wy))) <= 1.0


@given(st.lists(finite, min_size=2, max_size=2), st.lists(finite, min_size=2, max_size=2))
def test_loss_nonnegative(p, t):
    val = loss_h(p, t)
    assert val >= 0
    if p == t:
        assert val == 0
    elif max(abs(a - b) for a, b in zip(p, t)) > 1e-100:
        assert val > 0
