
import numpy as np
import pytest

from oracles import cost_reference
from terrainplan.errors import ParameterError
from terrainplan.planner import (CostWeights, GoalSpec, Plan, PlannerConfig, cost_goal_estimate,
                                 cost_height_change, cost_immobilization, cost_map_boundary, cost_rollover,
                                 evaluate_cost, load_plan_csv, plan, sample_actions, save_plan_csv,
                                 should_replan)
from terrainplan.state import ControlInput, VehicleState
from terrainplan.terrain import TerrainGenSpec, flat_map, generate_rock_field

W = CostWeights()
WD = {k: getattr(W, k) for k in ("w1", "w2", "w3", "w4", "w5", "w11", "w12", "w21", "w22")}


def S(x, y=0.0, z=0.0, roll=0.0, pitch=0.0, off=False):
    return VehicleState(x, y, z, roll, pitch, 0.0, 0, off)


def test_table_weights():
    assert (W.w1, W.w2, W.w3, W.w4, W.w5) == (1, 8, 0.07, 10, 4)
    assert (W.w11, W.w12, W.w21, W.w22) == (0.4, 0.4, 1, 1)
    with pytest.raises(ParameterError):
        CostWeights(w3=-1)


def test_sample_actions_default():
    acts = sample_actions()
    omegas = [a.omega for a in acts]
    assert len(acts) == 11 and all(a.v == 0.2 for a in acts)
    assert omegas[0] == -0.78 and omegas[-1] == 0.78 and omegas[5] == 0.0
    assert np.allclose(np.diff(omegas), 0.156, atol=1e-12)


def test_sample_actions_small_and_even():
    assert [a.omega for a in sample_actions(PlannerConfig(omega_count=3))] == [-0.78, 0.0, 0.78]
    with pytest.raises(ParameterError):
        PlannerConfig(omega_count=10)


def test_rollover_cost():
    assert cost_rollover([S(0), S(1)]) == 0
    assert cost_rollover([S(0), S(0, roll=0.1, pitch=0.2)]) == pytest.approx(0.12, abs=1e-15)
    assert cost_rollover([S(0), S(0, roll=-0.1, pitch=-0.2)]) == pytest.approx(0.12, abs=1e-15)


def test_immobilization_cost():
    assert cost_immobilization([S(0.3)] * 4) == 0
    assert cost_immobilization([S(0.2 * k) for k in range(6)]) == pytest.approx(-1.0, abs=1e-15)


def test_height_change_cost():
    assert cost_height_change([S(0, z=0.2)] * 3) == 0
    assert cost_height_change([S(0, z=z) for z in (0, 0.1, 0.05)]) == pytest.approx(0.15, abs=1e-15)
    assert cost_height_change([S(0, z=z) for z in (0, 0.1, 0.25, 0.3)]) == pytest.approx(0.3, abs=1e-15)


def test_map_boundary_cost():
    states = [S(k, off=k in (2, 4)) for k in range(6)]
    assert cost_map_boundary(states) == 2.0
    assert cost_map_boundary([S(k) for k in range(6)]) == 0.0


def test_goal_cost():
    assert cost_goal_estimate(S(0.2), GoalSpec(1, 0)) == pytest.approx(0.8)
    assert cost_goal_estimate(S(1.0), GoalSpec(1, 0)) == 0.0


def test_hand_total():
    states = [S(0), S(0.2, roll=0.1, pitch=0.2)]
    total, terms = evaluate_cost(states, GoalSpec(1, 0), W)
    assert total == pytest.approx(1.72, abs=1e-9)
    assert terms == pytest.approx((0.12, -0.2, 0, 0, 0.8), abs=1e-15)


def test_zero_weights_and_at_goal():
    zero = CostWeights(*([0.0] * 9))
    assert evaluate_cost([S(0), S(1, roll=1)], GoalSpec(5, 5), zero)[0] == 0
    assert evaluate_cost([S(1), S(1)], GoalSpec(1, 0), W)[0] == 0


def test_matches_reference_random():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = rng.integers(2, 17)
        xs, ys, zs = (rng.uniform(-1, 1, n) for _ in range(3))
        rolls, pitches = rng.uniform(-0.5, 0.5, (2, n))
        off = rng.random(n) < 0.2
        goal = tuple(rng.uniform(-2, 2, 2))
        states = [VehicleState(*v, 0.0, 0, bool(f)) for *v, f in zip(xs, ys, zs, rolls, pitches, off)]
        total, terms = evaluate_cost(states, GoalSpec(*goal), W)
        ref_total, ref_terms = cost_reference(xs, ys, zs, rolls, pitches, off, goal, WD)
        assert total == pytest.approx(ref_total, abs=1e-9)
        assert terms == pytest.approx(ref_terms, abs=1e-9)


def test_should_replan():
    p = Plan([S(0), S(1)], [ControlInput(0.2, 0)], 0.0, (0,) * 5)
    assert should_replan(S(0.5), p, 0.6)
    assert should_replan(S(0.5, 0.41), p, 0.0)
    assert not should_replan(S(0.5), p, 0.1)
    assert not should_replan(S(0.5, 0.39), p, 0.0)


def _scene(seed):
    return generate_rock_field(TerrainGenSpec(seed=seed, max_height=0.4, rock_count=8, rock_radius_mean=0.25,
                                              rock_radius_std=0.04))


def test_plan_shape_and_candidates(tiny_model_dynamics):
    p = plan(VehicleState(0.5, 0.65), _scene(1), GoalSpec(2.6, 0.65), dynamics=tiny_model_dynamics)
    assert len(p.states) == 16 and len(p.inputs) == 15 and p.n_evaluated == 55
    omegas = {a.omega for a in sample_actions()}
    assert all(u.omega in omegas and u.v == 0.2 for u in p.inputs)
    total, terms = evaluate_cost(p.states, GoalSpec(2.6, 0.65), W)
    assert p.total_cost == pytest.approx(total, abs=1e-9)
    w = W.term_weights
    assert p.total_cost == pytest.approx(float(np.dot(w, p.per_term_costs)), abs=1e-9)


def test_plan_stagewise_argmin(tiny_model_dynamics):
    goal = GoalSpec(2.6, 0.65)
    p = plan(VehicleState(0.5, 0.65, yaw=0.3), _scene(2), goal, dynamics=tiny_model_dynamics)
    for stage in range(5):
        cands = [c for c in p.candidates if c.stage == stage]
        prefix = p.states[:3 * stage + 1]
        for c in cands:
            seg = [VehicleState(*row, 0, bool(f)) for row, f in zip(c.states[1:], c.off_map[1:])]
            full = prefix + seg
            ref = cost_reference([s.x for s in full], [s.y for s in full], [s.z for s in full],
                                 [s.roll for s in full], [s.pitch for s in full], [s.off_map for s in full],
                                 goal.xy, WD)[0]
            assert c.cost == pytest.approx(ref, abs=1e-9)
        chosen = [c for c in cands if c.selected]
        assert len(chosen) == 1 and chosen[0].cost == min(c.cost for c in cands)
        assert p.inputs[3 * stage].omega == chosen[0].omega


def test_plan_deterministic(tiny_model_dynamics):
    a = plan(VehicleState(0.6, 0.5), _scene(3), GoalSpec(2.6, 0.65), dynamics=tiny_model_dynamics)
    b = plan(VehicleState(0.6, 0.5), _scene(3), GoalSpec(2.6, 0.65), dynamics=tiny_model_dynamics)
    assert a.states == b.states and a.inputs == b.inputs and a.total_cost == b.total_cost


def test_tie_break_prefers_straight():
    # zero weights: every candidate costs 0, so the tie-break alone decides
    zero = CostWeights(*([0.0] * 9))
    p = plan(VehicleState(1.0, 0.6), flat_map(cols=300, rows=150), GoalSpec(2, 0.6), weights=zero)
    assert all(u.omega == 0.0 for u in p.inputs)


def test_plan_fully_off_map_flags_failure():
    m = flat_map(cols=100, rows=100)
    p = plan(VehicleState(-5.0, -5.0), m, GoalSpec(0.4, 0.4))
    assert p.failed and len(p.states) == 16


def test_plan_csv_round_trip(tmp_path, tiny_model_dynamics):
    goal = GoalSpec(2.6, 0.65)
    p = plan(VehicleState(0.5, 0.65), _scene(4), goal, dynamics=tiny_model_dynamics)
    save_plan_csv(p, tmp_path / "p.csv", goal, W)
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0].startswith("# per_term:") or lines[1].startswith("# per_term:")
    rows = load_plan_csv(tmp_path / "p.csv")
    assert len(rows) == 16
    assert [r["x"] for r in rows] == [s.x for s in p.states]
