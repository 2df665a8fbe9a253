"""Built-in simulated tasks."""

from typing import Dict, Tuple

from ..errors import ConfigError
from . import ball_in_cup, pendulum
from .base import EnvironmentSpec

ENVIRONMENTS: Dict[str, EnvironmentSpec] = {
    pendulum.ENV_ID: pendulum.SPEC,
    ball_in_cup.ENV_ID: ball_in_cup.SPEC,
}


def get_environment(env_id: str) -> EnvironmentSpec:
    """
    Look up a task by id.

    Raises:
        ConfigError: If no such task is registered
    """
    try:
        return ENVIRONMENTS[env_id]
    except KeyError:
        known = ", ".join(sorted(ENVIRONMENTS))
        raise ConfigError(f"unknown env id '{env_id}' (known: {known})") from None


def observe(state: object) -> Tuple[float, ...]:
    """Observation vector for a pendulum or ball-in-cup state."""
    if isinstance(state, pendulum.PendulumState):
        return pendulum.observe_pendulum(state)
    if isinstance(state, ball_in_cup.BallCupState):
        return ball_in_cup.observe_ballcup(state)
    raise TypeError(f"unknown state type {type(state).__name__}")


__all__ = ["ENVIRONMENTS", "EnvironmentSpec", "get_environment", "observe"]
