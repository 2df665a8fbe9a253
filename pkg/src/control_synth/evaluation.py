"""Closed-loop scoring of candidate policies."""

import csv
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path
from typing import List, Optional, Sequence, Union

from .environments import EnvironmentSpec, get_environment
from .errors import PolicyRuntimeError, PolicySyntaxError
from .models import REJECTED, Rejection, RolloutResult, ScoredProgram, StepRecord, TaskSpec
from .policy_ast import PolicyProgram
from .policy_parser import parse
from .sandbox import DEFAULT_LIMITS, SandboxLimits, eval_policy
from .seeding import split_seed

Outcome = Union[ScoredProgram, Rejection]


def rollout(
    program: PolicyProgram,
    env_id: str,
    horizon: int,
    seed: Optional[int] = None,
    record: bool = False,
    limits: SandboxLimits = DEFAULT_LIMITS,
    stop_on_terminal: bool = False,
) -> RolloutResult:
    """
    Simulate ``horizon`` steps of policy feedback.

    Each step observes the state, evaluates the policy, advances the
    environment and adds the reward of the new state under that action.

    Args:
        program: Policy to run
        env_id: Registered environment id
        horizon: Number of steps
        seed: Reset seed; None uses the environment's default start
        record: Keep per-step records
        limits: Sandbox limits for every policy call
        stop_on_terminal: End the episode when the environment reports a
            terminal state (the ball-in-cup catch)

    Returns:
        RolloutResult; sandbox failures are reported in it, never raised
    """
    env = get_environment(env_id)
    state = env.reset(seed)
    total = 0.0
    trajectory: Optional[List[StepRecord]] = [] if record else None

    for t in range(horizon):
        obs = env.observe(state)
        try:
            action = eval_policy(program, obs, limits)
        except PolicyRuntimeError as e:
            return RolloutResult(
                return_R=REJECTED,
                steps_completed=t,
                trajectory=trajectory,
                terminated_early=True,
                reason=str(e),
                valid=False,
                failed_step=t,
                category=e.category,
            )
        next_state = env.step(state, action)
        reward = env.reward(next_state, action)
        total += reward
        if trajectory is not None:
            trajectory.append(
                StepRecord(t, env.state_values(state), obs, action, reward, total)
            )
        state = next_state
        if stop_on_terminal and env.is_terminal is not None and env.is_terminal(state):
            return RolloutResult(total, t + 1, trajectory, terminated_early=True, reason="terminal")

    return RolloutResult(total, horizon, trajectory)


def episode_seeds(seed: Optional[int], episodes: int) -> List[Optional[int]]:
    """Reset seeds for an evaluation: the seed itself, or one split per episode."""
    if episodes == 1:
        return [seed]
    base = 0 if seed is None else seed
    return [split_seed(base, f"episode:{k}") for k in range(episodes)]


def evaluate_candidate(
    source: str,
    spec: TaskSpec,
    limits: SandboxLimits = DEFAULT_LIMITS,
    seed: Optional[int] = None,
    episodes: int = 1,
) -> Outcome:
    """
    Parse and score raw candidate text.

    Returns:
        ScoredProgram with the mean return, or a Rejection naming why the
        candidate could not be scored
    """
    try:
        program = parse(source, spec.obs_dim, spec.action_dim)
    except PolicySyntaxError as e:
        return Rejection("parse_error", str(e), source)

    returns = []
    for reset_seed in episode_seeds(seed, episodes):
        result = rollout(program, spec.env_id, spec.horizon, reset_seed, limits=limits)
        if not result.valid:
            return Rejection(result.category, result.reason, source, result.failed_step)
        returns.append(result.return_R)
    score = returns[0] if len(returns) == 1 else sum(returns) / len(returns)
    return ScoredProgram(program=program, score=score, env_id=spec.env_id)


def evaluate_batch(
    sources: Sequence[str],
    spec: TaskSpec,
    limits: SandboxLimits = DEFAULT_LIMITS,
    workers: int = 1,
    seed: Optional[int] = None,
    episodes: int = 1,
) -> List[Outcome]:
    """Score many candidates; results come back in input order."""
    job = partial(evaluate_candidate, spec=spec, limits=limits, seed=seed, episodes=episodes)
    if workers <= 1 or len(sources) <= 1:
        return [job(s) for s in sources]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, sources))


def write_trajectory_csv(
    result: RolloutResult, env: Union[str, EnvironmentSpec], path: Union[str, Path]
) -> Path:
    """
    Write a recorded trajectory as CSV, one row per step.

    Columns: t, state components, obs_i, action_i, reward, return.

    Raises:
        ValueError: If the rollout was not recorded
    """
    if result.trajectory is None:
        raise ValueError("rollout was run without record=True")
    spec = get_environment(env) if isinstance(env, str) else env
    path = Path(path)
    header = (
        ["t"]
        + list(spec.state_columns)
        + [f"obs_{i}" for i in range(spec.obs_dim)]
        + [f"action_{i}" for i in range(spec.action_dim)]
        + ["reward", "return"]
    )
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for step in result.trajectory:
            writer.writerow(
                [step.t, *map(repr, step.state), *map(repr, step.obs), *map(repr, step.action)]
                + [repr(step.reward), repr(step.cumulative)]
            )
    return path
