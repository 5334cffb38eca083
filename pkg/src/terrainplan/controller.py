"""Low-level plan tracking: pitch-gated throttle and heading-error steering."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ControllerError, ParameterError
from .state import ControlInput, VehicleState


@dataclass(frozen=True)
class ControllerConfig:
    rate: float = 30.0
    pitch_low: float = -5.0  # degrees
    pitch_high: float = 5.0
    throttle_low: float = 0.15
    throttle_mid: float = 0.20
    throttle_high: float = 0.30
    waypoint_advance_radius: float = 0.2
    steering_limit: float = 1.0  # radians
    # simulated drivetrain: v = velocity_per_throttle * throttle - grade_loss * sin(pitch),
    # clipped to [0, max_speed]; the steering angle turns the chassis like a bicycle
    velocity_per_throttle: float = 1.0
    grade_loss: float = 0.5
    max_speed: float = 1.0
    wheelbase: float = 0.6
    omega_limit: float = 0.78

    def __post_init__(self):
        if not self.pitch_low < self.pitch_high:
            raise ParameterError("pitch_low", "must be below pitch_high")
        if not self.throttle_low <= self.throttle_mid <= self.throttle_high:
            raise ParameterError("throttle_mid", "throttles must be ascending")
        if not self.steering_limit > 0:
            raise ParameterError("steering_limit", "must be positive")
        if not self.wheelbase > 0:
            raise ParameterError("wheelbase", "must be positive")


@dataclass(frozen=True)
class ActuationCommand:
    throttle: float
    steering: float


def throttle_from_pitch(pitch, config: ControllerConfig = ControllerConfig()):
    """Three-level throttle by pitch (radians, nose-up positive); [low, high] degrees map to mid."""
    if pitch < math.radians(config.pitch_low):
        return config.throttle_low
    if pitch > math.radians(config.pitch_high):
        return config.throttle_high
    return config.throttle_mid


def _wrap_half_open(a):
    """Wrap to (-pi, pi]."""
    a = math.remainder(a, 2.0 * math.pi)
    return math.pi if a == -math.pi else a


def steering_command(state: VehicleState, next_waypoint, limit=ControllerConfig.steering_limit):
    dx = next_waypoint[0] - state.x
    dy = next_waypoint[1] - state.y
    if not (math.isfinite(dx) and math.isfinite(dy)):
        raise ControllerError(f"non-finite waypoint {next_waypoint!r}")
    if math.hypot(dx, dy) <= 1e-6:
        return 0.0
    err = _wrap_half_open(math.atan2(dy, dx) - state.yaw)
    return max(-limit, min(limit, err))


def _nearest_index(state, states):
    return min(range(len(states)), key=lambda k: math.hypot(states[k].x - state.x, states[k].y - state.y))


def control_step(state: VehicleState, plan, config: ControllerConfig = ControllerConfig(), min_index=0):
    """Pick the tracking waypoint and emit an actuation command.

    The waypoint is the first plan state at or after both ``min_index`` and the
    state nearest the vehicle whose distance exceeds the advance radius, or the
    final plan state. Returns ``(ActuationCommand, waypoint_index)``.
    """
    states = plan.states if hasattr(plan, "states") else plan
    if not states:
        raise ControllerError("cannot track an empty plan")
    start = max(min_index, _nearest_index(state, states))
    idx = len(states) - 1
    for k in range(start, len(states)):
        if math.hypot(states[k].x - state.x, states[k].y - state.y) > config.waypoint_advance_radius:
            idx = k
            break
    target = states[idx]
    cmd = ActuationCommand(throttle_from_pitch(state.pitch, config),
                           steering_command(state, (target.x, target.y), config.steering_limit))
    return cmd, idx


def command_to_input(cmd: ActuationCommand, state: VehicleState, config: ControllerConfig = ControllerConfig()):
    """Map an actuation command to the simulator's (v, omega).

    Speed is throttle minus a gravity load on grades, so the three-level
    throttle schedule holds roughly 0.2 m/s on slopes of about 10 degrees;
    the yaw rate follows the bicycle relation omega = v tan(steering) / wheelbase.
    """
    v = config.velocity_per_throttle * cmd.throttle - config.grade_loss * math.sin(state.pitch)
    v = max(0.0, min(config.max_speed, v))
    omega = v * math.tan(cmd.steering) / config.wheelbase
    omega = max(-config.omega_limit, min(config.omega_limit, omega))
    return ControlInput(v, omega)
