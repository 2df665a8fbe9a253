"""Torque-limited pendulum swing-up.

The angle is measured from the upright position. Gravity pulls the
pendulum away from upright, so the hanging position theta = pi is the
stable equilibrium the swing-up starts from.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .base import EnvironmentSpec

ENV_ID = "pendulum_swingup"
OBS_DIM = 3
ACTION_DIM = 1


@dataclass(frozen=True)
class PendulumParams:
    g_grav: float = 9.81
    length: float = 0.5
    damping_b: float = 0.4
    dt: float = 0.015

    def __post_init__(self) -> None:
        for name in ("g_grav", "length", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.damping_b >= 0:
            raise ValueError("damping_b must be non-negative")

    @property
    def torque_limit(self) -> float:
        """Normalized torque limit: one sixth of what lifting from horizontal needs."""
        return self.g_grav / (6 * self.length)


@dataclass(frozen=True)
class PendulumState:
    theta: float
    omega: float


DEFAULT_PARAMS = PendulumParams()


def wrap_angle(theta: float) -> float:
    """Map an angle into (-pi, pi]."""
    if abs(theta) > 4 * math.pi:
        theta = math.fmod(theta, 2 * math.pi)
    while theta > math.pi:
        theta -= 2 * math.pi
    while theta <= -math.pi:
        theta += 2 * math.pi
    return theta


def _scalar_action(a: Sequence[float]) -> float:
    if isinstance(a, (int, float)):
        return float(a)
    return float(a[0])


def pendulum_step(
    s: PendulumState, a: Sequence[float], p: PendulumParams = DEFAULT_PARAMS
) -> PendulumState:
    """
    Advance one semi-implicit Euler step.

    Raises:
        ValueError: If the incoming state is not finite
    """
    if not (math.isfinite(s.theta) and math.isfinite(s.omega)):
        raise ValueError(f"non-finite pendulum state {s}")
    u = p.torque_limit * _scalar_action(a)
    omega = s.omega + p.dt * ((p.g_grav / p.length) * math.sin(s.theta) - p.damping_b * s.omega + u)
    theta = wrap_angle(s.theta + p.dt * omega)
    return PendulumState(theta, omega)


def pendulum_reward(s_next: PendulumState, a: Sequence[float]) -> float:
    """Stage reward: bonus inside the 0.5 rad band, angle and effort penalties."""
    magnitude = abs(s_next.theta)
    base = 1.0 if magnitude > 0.5 else 2.0
    return base - magnitude / math.pi - 0.1 * abs(_scalar_action(a))


def pendulum_reset(seed: Optional[int] = None) -> PendulumState:
    """Hanging at rest, or hanging with a small seeded angle offset."""
    if seed is None:
        return PendulumState(math.pi, 0.0)
    rng = np.random.default_rng(seed)
    return PendulumState(wrap_angle(math.pi + rng.uniform(-0.1, 0.1)), 0.0)


def observe_pendulum(s: PendulumState) -> Tuple[float, ...]:
    return (math.cos(s.theta), math.sin(s.theta), s.omega)


def pendulum_energy(s: PendulumState, p: PendulumParams = DEFAULT_PARAMS) -> float:
    """Mechanical energy per unit inertia (upright is the maximum)."""
    return 0.5 * s.omega**2 + (p.g_grav / p.length) * math.cos(s.theta)


SPEC = EnvironmentSpec(
    env_id=ENV_ID,
    obs_dim=OBS_DIM,
    action_dim=ACTION_DIM,
    reset=pendulum_reset,
    step=pendulum_step,
    reward=pendulum_reward,
    observe=observe_pendulum,
    state_columns=("theta", "omega"),
    state_values=lambda s: (s.theta, s.omega),
)
