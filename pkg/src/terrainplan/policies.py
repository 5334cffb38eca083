"""Episode policies: the planner + tracking controller, and two comparison baselines."""
from __future__ import annotations

import math

import numpy as np

from .controller import ControllerConfig, command_to_input, control_step
from .dynamics import DynamicsConfig, rollout_arrays
from .planner import CostWeights, GoalSpec, PlannerConfig, plan, sample_actions, should_replan
from .state import ControlInput


class PlannerPolicy:
    """Receding-horizon planning with the learned model, tracked by the controller."""

    name = "wmvct"

    def __init__(self, emap, goal: GoalSpec, dynamics: DynamicsConfig, dt, weights=CostWeights(),
                 planner_config=PlannerConfig(), controller_config=ControllerConfig(), keep_plans=False):
        self.emap = emap
        self.goal = goal
        self.dynamics = dynamics
        self.dt = dt
        self.weights = weights
        self.planner_config = planner_config
        self.controller_config = controller_config
        self.keep_plans = keep_plans
        self.plans = []
        self.plan = None
        self.elapsed = 0.0
        self.index = 0

    def __call__(self, state):
        if self.plan is None or should_replan(state, self.plan, self.elapsed, self.planner_config):
            self.plan = plan(state, self.emap, self.goal, weights=self.weights,
                             config=self.planner_config, dynamics=self.dynamics)
            if not self.keep_plans:
                self.plan.candidates = []
            else:
                self.plans.append(self.plan)
            self.elapsed = 0.0
            self.index = 0
        cmd, self.index = control_step(state, self.plan, self.controller_config, self.index)
        self.elapsed += self.dt
        return command_to_input(cmd, state, self.controller_config)


class OpenLoopPolicy:
    """Terrain-blind: constant speed, pure pursuit straight at the goal."""

    name = "open_loop"

    def __init__(self, goal: GoalSpec, v=0.2, omega_limit=0.78):
        self.goal = goal
        self.v = v
        self.omega_limit = omega_limit

    def __call__(self, state):
        dx, dy = self.goal.x - state.x, self.goal.y - state.y
        d = math.hypot(dx, dy)
        if d <= 1e-6:
            return ControlInput(self.v, 0.0)
        err = math.remainder(math.atan2(dy, dx) - state.yaw, 2.0 * math.pi)
        omega = 2.0 * self.v * math.sin(err) / d
        return ControlInput(self.v, max(-self.omega_limit, min(self.omega_limit, omega)))


class GreedyPolicy:
    """One-step lookahead over the sampled yaw rates with goal distance + rollover cost."""

    name = "greedy"

    def __init__(self, emap, goal: GoalSpec, dynamics: DynamicsConfig, weights=CostWeights(),
                 planner_config=PlannerConfig()):
        self.emap = emap
        self.goal = goal
        self.dynamics = dynamics
        self.weights = weights
        self.actions = sample_actions(planner_config)
        self.omegas = np.array([a.omega for a in self.actions])
        self.v = planner_config.v_const

    def __call__(self, state):
        S, _ = rollout_arrays(np.array(state.as_tuple()), self.v, self.omegas, 1, self.emap, self.dynamics)
        nxt = S[:, 1]
        w = self.weights
        c_ro = w.w11 * (abs(state.roll) + np.abs(nxt[:, 3])) + w.w12 * (abs(state.pitch) + np.abs(nxt[:, 4]))
        c_est = np.hypot(nxt[:, 0] - self.goal.x, nxt[:, 1] - self.goal.y)
        cost = w.w5 * c_est + w.w1 * c_ro
        best = min(range(len(cost)), key=lambda i: (cost[i], abs(self.omegas[i]), self.omegas[i]))
        return self.actions[best]
