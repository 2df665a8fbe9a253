"""Tests for data models."""

import math
from dataclasses import replace

import pytest

from control_synth.errors import ConfigError
from control_synth.models import (
    API_KEY_ENV,
    ENDPOINT_ENV,
    GeneratorParams,
    Rejection,
    RolloutResult,
    RunConfig,
    RunReport,
    ScoredProgram,
    TaskSpec,
)
from control_synth.policy_parser import parse

ZERO = "def policy(obs):\n    return 0.0\n"


def test_task_spec_derives_dimensions():
    """Dimensions left at 0 come from the environment."""
    spec = TaskSpec("swing up", ZERO, "pendulum_swingup")
    assert (spec.obs_dim, spec.action_dim, spec.horizon) == (3, 1, 1000)
    spec = TaskSpec("catch", "return [0.0, 0.0]", "ball_in_cup", obs_dim=8, action_dim=2)
    assert spec.action_dim == 2


def test_task_spec_validation():
    """Test TaskSpec validation."""
    with pytest.raises(ConfigError, match="horizon must be ≥ 1"):
        TaskSpec("", ZERO, "pendulum_swingup", horizon=0)

    with pytest.raises(ConfigError, match="obs_dim 4 does not match pendulum_swingup"):
        TaskSpec("", ZERO, "pendulum_swingup", obs_dim=4)

    with pytest.raises(ConfigError, match="unknown env id"):
        TaskSpec("", ZERO, "acrobot")

    with pytest.raises(ConfigError, match="starter policy cannot be empty"):
        TaskSpec("", "  ", "pendulum_swingup")


def test_config_errors_are_value_errors():
    with pytest.raises(ValueError):
        RunConfig(islands=1)


@pytest.mark.parametrize(
    "changes, message",
    [
        ({"islands": 1}, "islands must be ≥ 2"),
        ({"max_candidates": -1}, "max_candidates must be ≥ 0"),
        ({"seed": -1}, "seed must be a 64-bit unsigned integer"),
        ({"seed": 2**64}, "seed must be a 64-bit unsigned integer"),
        ({"generator": "gpt"}, "generator must be one of mock, remote"),
        ({"candidates_per_prompt": 0}, "candidates_per_prompt must be ≥ 1"),
        ({"db_temperature": 0.0}, "db_temperature must be > 0"),
        ({"top_p": 1.5}, r"top_p must be in \(0, 1\]"),
        ({"repeat_last_n": -1}, "repeat_last_n must be ≥ 0"),
    ],
)
def test_run_config_validation(changes, message):
    with pytest.raises(ConfigError, match=message):
        RunConfig(**changes)


def test_run_config_defaults():
    cfg = RunConfig()
    assert cfg.islands == 10
    assert cfg.candidates_per_prompt == 4
    assert cfg.reset_period == 2000
    assert cfg.db_capacity_per_island == 100
    assert cfg.limits.max_ops_per_call == 10_000
    assert cfg.limits.max_abs_value == 1e9


def test_config_hash_ignores_budget_fields():
    """Budget and throughput knobs may change across a resume; the rest may not."""
    cfg = RunConfig(seed=3)
    same = replace(cfg, max_candidates=5, workers=8, checkpoint_every=7, target_score=100.0)
    assert same.config_hash == cfg.config_hash
    assert replace(cfg, seed=4).config_hash != cfg.config_hash
    assert replace(cfg, islands=3).config_hash != cfg.config_hash
    assert len(cfg.config_hash) == 16


def test_generator_params_from_environment():
    """The API key only ever comes from the environment."""
    cfg = RunConfig(generator="remote", model_id="m", temperature=0.7)
    environ = {API_KEY_ENV: "secret", ENDPOINT_ENV: "http://llm.local/v1/completions"}
    params = GeneratorParams.from_config(cfg, environ)
    assert params.api_key == "secret"
    assert params.endpoint == "http://llm.local/v1/completions"
    assert params.temperature == 0.7
    assert "secret" not in repr(params)

    explicit = GeneratorParams.from_config(replace(cfg, endpoint="http://other"), environ)
    assert explicit.endpoint == "http://other"
    assert GeneratorParams.from_config(cfg, {}).api_key == ""


def test_generator_params_validation():
    with pytest.raises(ConfigError, match="temperature must be > 0"):
        GeneratorParams(temperature=0.0)


def test_scored_program_identity():
    """Ids hash the canonical source, so spelling differences do not matter."""
    a = ScoredProgram(parse("return obs[0]*2", 3, 1), 1.0, "pendulum_swingup")
    other = parse("def f(obs):\n    return obs[0] * 2.0\n", 3, 1)
    b = ScoredProgram(other, 1.0, "pendulum_swingup")
    assert a.program_id == b.program_id
    assert len(a.program_id) == 12
    assert int(a.program_id, 16) >= 0
    assert a.source.startswith("def policy(obs: np.ndarray) -> float:")


def test_scored_program_rejects_non_finite_score():
    program = parse(ZERO, 3, 1)
    with pytest.raises(ValueError, match="score must be finite"):
        ScoredProgram(program, math.nan, "pendulum_swingup")
    with pytest.raises(ValueError, match="score must be finite"):
        ScoredProgram(program, -math.inf, "pendulum_swingup")


def test_rejection_category_checked():
    assert Rejection("nonfinite", "division by zero").category == "nonfinite"
    with pytest.raises(ValueError, match="unknown rejection category 'crash'"):
        Rejection("crash", "boom")


def test_invalid_rollout_has_rejected_score():
    result = RolloutResult(12.5, 3, valid=False, reason="boom", category="runtime_error")
    assert result.return_R == -math.inf


def test_run_report_validation():
    best = ScoredProgram(parse(ZERO, 3, 1), 0.0, "pendulum_swingup")
    with pytest.raises(ValueError, match="candidates_valid cannot exceed"):
        RunReport(1, 2, {}, best, [(0, 0.0)])
