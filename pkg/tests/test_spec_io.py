"""Tests for specification and run-configuration loading."""

import pytest

from control_synth.corpus import corpus_path
from control_synth.errors import ConfigError
from control_synth.models import RunConfig
from control_synth.spec_io import apply_overrides, load_run_config, load_spec, zero_starter


def _write(tmp_path, text, name="task.spec"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_shipped_pendulum_spec():
    spec = load_spec(corpus_path("pendulum.spec"))
    assert spec.env_id == "pendulum_swingup"
    assert (spec.obs_dim, spec.action_dim, spec.horizon) == (3, 1, 1000)
    assert spec.task_description.startswith("Swing the pendulum up")
    assert "The action is a normalized torque" in spec.task_description
    assert "return 0.0" in spec.starter_policy_source


def test_load_shipped_ball_in_cup_spec():
    spec = load_spec(corpus_path("ball_in_cup.spec"))
    assert (spec.obs_dim, spec.action_dim) == (8, 2)


def test_missing_starter_defaults_to_zero_policy(tmp_path):
    path = _write(tmp_path, "[env]\nid = ball_in_cup\nhorizon = 50\n")
    spec = load_spec(path)
    assert spec.starter_policy_source == zero_starter(2)
    assert spec.horizon == 50


def test_unfenced_starter(tmp_path):
    path = _write(tmp_path, "[env]\nid = pendulum_swingup\n\n[starter]\nreturn obs[2] * -0.5\n")
    assert load_spec(path).starter_policy_source == "return obs[2] * -0.5\n"


def test_starter_parse_error_points_into_the_file(tmp_path):
    """Errors carry path, file line and column."""
    text = (
        "[env]\n"
        "id = pendulum_swingup\n"
        "\n"
        "[starter]\n"
        "```python\n"
        "def policy(obs):\n"
        "    return obs[7]\n"
        "```\n"
    )
    path = _write(tmp_path, text)
    with pytest.raises(ConfigError) as info:
        load_spec(path)
    message = str(info.value)
    assert message.startswith(f"{path}:7:12: starter policy does not parse")
    assert "observation index 7 out of range [0, 3)" in message


def test_starter_must_run_on_zero_observation(tmp_path):
    path = _write(tmp_path, "[env]\nid = pendulum_swingup\n[starter]\nreturn 1.0 / obs[0]\n")
    with pytest.raises(ConfigError, match="fails on a zero observation"):
        load_spec(path)


@pytest.mark.parametrize(
    "text, message",
    [
        ("[task]\ndescription = x\n", "missing \\[env\\] section"),
        ("[env]\nid = pendulum_swingup\n[extra]\n", "unknown section \\[extra\\]"),
        ("[env]\nid = pendulum_swingup\n[env]\n", "duplicate section \\[env\\]"),
        ("stray text\n[env]\nid = pendulum_swingup\n", "text outside any section"),
        ("[env]\nhorizon = 10\n", "\\[env\\] needs an 'id'"),
        ("[env]\nid = cartpole\n", "unknown env id 'cartpole'"),
        ("[env]\nid = pendulum_swingup\nhorizon = abc\n", "horizon must be int, got 'abc'"),
        ("[env]\nid = pendulum_swingup\nhorizon = 0\n", "horizon must be ≥ 1"),
        ("[env]\nid = pendulum_swingup\nobs_dim = 4\n", "obs_dim 4 does not match"),
        ("[env]\nid = pendulum_swingup\ncolor = red\n", "unknown key\\(s\\) in \\[env\\]: color"),
        ("[env]\nid = pendulum_swingup\njunk\n", "expected 'key = value'"),
        ("[env]\nid = pendulum_swingup\n[starter]\n```\nreturn 0.0\n", "unterminated"),
    ],
)
def test_malformed_specs(tmp_path, text, message):
    with pytest.raises(ConfigError, match=message):
        load_spec(_write(tmp_path, text))


def test_missing_spec_file(tmp_path):
    with pytest.raises(ConfigError, match="spec file not found"):
        load_spec(tmp_path / "nope.spec")


def test_run_config_from_spec_file():
    cfg = load_run_config(corpus_path("pendulum.spec"))
    assert cfg.seed == 42
    assert cfg.islands == 10
    assert cfg.generator == "mock"


def test_run_config_precedence(tmp_path):
    """Defaults, then the file, then overrides."""
    path = _write(tmp_path, "seed = 5\nislands = 4\n# comment\n", name="run.cfg")
    cfg = load_run_config(path, ["seed=9", "max-candidates=20"])
    assert cfg.seed == 9
    assert cfg.islands == 4
    assert cfg.max_candidates == 20
    assert cfg.reset_period == RunConfig().reset_period


def test_run_config_defaults_without_file():
    assert load_run_config() == RunConfig()


def test_run_config_optional_values():
    cfg = load_run_config(overrides={"eval_seed": "none", "target_score": "12.5"})
    assert cfg.eval_seed is None
    assert cfg.target_score == 12.5
    assert load_run_config(overrides={"eval_seed": "3"}).eval_seed == 3


@pytest.mark.parametrize(
    "overrides, message",
    [
        (["bogus=1"], "unknown run setting 'bogus'"),
        (["islands=many"], "islands must be int, got 'many'"),
        (["db_temperature=warm"], "db_temperature must be float, got 'warm'"),
        (["islands"], "must look like key=value"),
        (["max_candidates=0"], "max_candidates must be ≥ 1"),
        (["islands=1"], "islands must be ≥ 2"),
    ],
)
def test_run_config_errors(overrides, message):
    with pytest.raises(ConfigError, match=message):
        load_run_config(overrides=overrides)


def test_apply_overrides_accepts_native_values():
    cfg = apply_overrides(RunConfig(), {"workers": 3, "generator": "'remote'"})
    assert cfg.workers == 3
    assert cfg.generator == "remote"
