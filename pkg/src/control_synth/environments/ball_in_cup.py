"""Planar ball-in-cup.

The policy chooses a reference position for the cup inside a square box; a
PD loop drives the cup there. The ball hangs from the cup on an inextensible
string that only acts when taut.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .base import EnvironmentSpec

ENV_ID = "ball_in_cup"
OBS_DIM = 8
ACTION_DIM = 2

Vec2 = Tuple[float, float]


@dataclass(frozen=True)
class BallCupParams:
    g_grav: float = 9.81
    string_length: float = 0.3
    box_half: float = 0.25
    dt: float = 0.015
    kp: float = 100.0
    kd: float = 20.0
    max_cup_accel: float = 50.0
    catch_half_width: float = 0.04
    catch_half_height: float = 0.04

    def __post_init__(self) -> None:
        if not self.box_half > 0:
            raise ValueError("box_half must be positive")
        if self.string_length <= max(self.catch_half_width, self.catch_half_height):
            raise ValueError("string_length must exceed the catch extents")
        if not (self.dt > 0 and self.g_grav > 0):
            raise ValueError("dt and g_grav must be positive")


@dataclass(frozen=True)
class BallCupState:
    cup_pos: Vec2
    cup_vel: Vec2
    ball_pos: Vec2
    ball_vel: Vec2
    caught: bool = False

    def values(self) -> Tuple[float, ...]:
        return (*self.cup_pos, *self.ball_pos, *self.cup_vel, *self.ball_vel)


DEFAULT_PARAMS = BallCupParams()


def is_caught(s: BallCupState, p: BallCupParams = DEFAULT_PARAMS) -> bool:
    """True when the ball sits inside the cup's catch box (strict bounds)."""
    dx = s.ball_pos[0] - s.cup_pos[0]
    return (
        abs(dx) < p.catch_half_width
        and s.cup_pos[1] - p.catch_half_height < s.ball_pos[1] < s.cup_pos[1]
    )


def _cup_axis(pos: float, vel: float, ref: float, p: BallCupParams) -> Vec2:
    accel = p.kp * (ref - pos) + p.kd * (0.0 - vel)
    accel = min(max(accel, -p.max_cup_accel), p.max_cup_accel)
    vel = vel + p.dt * accel
    pos = pos + p.dt * vel
    if pos > p.box_half:
        return p.box_half, 0.0
    if pos < -p.box_half:
        return -p.box_half, 0.0
    return pos, vel


def ballcup_step(
    s: BallCupState, a: Sequence[float], p: BallCupParams = DEFAULT_PARAMS
) -> BallCupState:
    """
    Advance cup, ball and string by one step.

    Raises:
        ValueError: If the incoming state is not finite
    """
    if not all(math.isfinite(v) for v in s.values()):
        raise ValueError(f"non-finite ball-in-cup state {s}")

    cup_x, cup_vx = _cup_axis(s.cup_pos[0], s.cup_vel[0], a[0] * p.box_half, p)
    cup_z, cup_vz = _cup_axis(s.cup_pos[1], s.cup_vel[1], a[1] * p.box_half, p)

    ball_vx = s.ball_vel[0]
    ball_vz = s.ball_vel[1] - p.dt * p.g_grav
    ball_x = s.ball_pos[0] + p.dt * ball_vx
    ball_z = s.ball_pos[1] + p.dt * ball_vz

    dx, dz = ball_x - cup_x, ball_z - cup_z
    dist = math.hypot(dx, dz)
    if dist > p.string_length:
        nx, nz = dx / dist, dz / dist
        ball_x = cup_x + nx * p.string_length
        ball_z = cup_z + nz * p.string_length
        radial = (ball_vx - cup_vx) * nx + (ball_vz - cup_vz) * nz
        if radial > 0:
            ball_vx -= radial * nx
            ball_vz -= radial * nz

    nxt = BallCupState((cup_x, cup_z), (cup_vx, cup_vz), (ball_x, ball_z), (ball_vx, ball_vz))
    return replace(nxt, caught=s.caught or is_caught(nxt, p))


def ballcup_reward(s_next: BallCupState) -> float:
    """1 once caught, otherwise penalize misalignment and ball speed."""
    if s_next.caught:
        return 1.0
    dx = s_next.ball_pos[0] - s_next.cup_pos[0]
    dz = s_next.ball_pos[1] - s_next.cup_pos[1]
    speed = math.hypot(*s_next.ball_vel)
    return 1.0 - abs(math.atan2(dx, dz)) / math.pi - 0.1 * speed


def ballcup_reset(
    seed: Optional[int] = None, p: BallCupParams = DEFAULT_PARAMS
) -> BallCupState:
    """
    Cup at rest at the origin, ball at rest.

    Without a seed the ball hangs straight down. With a seed its position is
    uniform over the disk the string can reach, excluding the catch box.
    """
    origin = (0.0, 0.0)
    if seed is None:
        return BallCupState(origin, origin, (0.0, -p.string_length), origin)
    rng = np.random.default_rng(seed)
    while True:
        radius = p.string_length * math.sqrt(rng.uniform())
        angle = rng.uniform(0.0, 2 * math.pi)
        ball = (radius * math.cos(angle), radius * math.sin(angle))
        state = BallCupState(origin, origin, ball, origin)
        if not is_caught(state, p):
            return state


def observe_ballcup(s: BallCupState) -> Tuple[float, ...]:
    """[x_cup, z_cup, x_ball, z_ball, vx_cup, vz_cup, vx_ball, vz_ball]"""
    return s.values()


SPEC = EnvironmentSpec(
    env_id=ENV_ID,
    obs_dim=OBS_DIM,
    action_dim=ACTION_DIM,
    reset=ballcup_reset,
    step=ballcup_step,
    reward=lambda s, a: ballcup_reward(s),
    observe=observe_ballcup,
    state_columns=(
        "cup_x",
        "cup_z",
        "ball_x",
        "ball_z",
        "cup_vx",
        "cup_vz",
        "ball_vx",
        "ball_vz",
        "caught",
    ),
    state_values=lambda s: (*s.values(), float(s.caught)),
    is_terminal=lambda s: s.caught,
)
