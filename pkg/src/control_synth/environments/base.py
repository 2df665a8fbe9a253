"""Common environment interface."""

from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence, Tuple

State = Any
Action = Sequence[float]


@dataclass(frozen=True)
class EnvironmentSpec:
    """
    Registry entry describing one simulated task.

    Every callable is pure: ``step`` and ``reward`` take the state and the
    clamped action, ``reset`` takes an optional seed.
    """

    env_id: str
    obs_dim: int
    action_dim: int
    reset: Callable[[Optional[int]], State]
    step: Callable[[State, Action], State]
    reward: Callable[[State, Action], float]
    observe: Callable[[State], Tuple[float, ...]]
    state_columns: Tuple[str, ...]
    state_values: Callable[[State], Tuple[float, ...]]
    is_terminal: Optional[Callable[[State], bool]] = None

    def __post_init__(self) -> None:
        if not self.env_id:
            raise ValueError("env_id cannot be empty")
        if self.obs_dim < 1 or self.action_dim < 1:
            raise ValueError("obs_dim and action_dim must be positive")
