"""Tests for prompt layout and policy extraction."""

import pytest

from control_synth.corpus import read_policy
from control_synth.errors import ExtractionFailure
from control_synth.generation.prompts import INSTRUCTION, build_prompt, extract_policy
from control_synth.models import TaskSpec, program_id_for
from control_synth.policy_parser import parse


@pytest.fixture
def pendulum_spec():
    return TaskSpec("Swing the pendulum up.", "return 0.0", "pendulum_swingup")


def test_prompt_lists_parents_in_score_order(pendulum_spec):
    """policy_v0 is the lower parent, policy_v1 the higher one."""
    low = parse("return 0.0", 3, 1)
    high = parse(read_policy("pendulum_swingup"), 3, 1)
    prompt = build_prompt(low, high, pendulum_spec)

    text = prompt.text
    assert text.startswith('"""Swing the pendulum up.\n\n' + INSTRUCTION)
    assert "import numpy as np" in text
    v0 = text.index("def policy_v0(obs: np.ndarray) -> float:\n    return 0.0")
    v1 = text.index("def policy_v1(obs: np.ndarray) -> float:")
    assert v0 < v1
    assert text.endswith(
        "def policy_v2(obs: np.ndarray) -> float:\n"
        "    \"\"\"Improved version of 'policy_v1'.\"\"\"\n"
    )
    assert prompt.lineage == (program_id_for(low), program_id_for(high))
    assert prompt.requested_name == "policy_v2"
    assert prompt.version_count == 2


def test_vector_task_prompt_header():
    spec = TaskSpec("Catch the ball.", "return np.zeros(2)", "ball_in_cup")
    program = parse(read_policy("ball_in_cup_found"), 8, 2)
    text = build_prompt(program, program, spec).text
    assert "def policy_v2(obs: np.ndarray) -> np.ndarray:" in text


def test_description_quotes_are_neutralised():
    spec = TaskSpec('Say """hi""".', "return 0.0", "pendulum_swingup")
    zero = parse("return 0.0", 3, 1)
    text = build_prompt(zero, zero, spec).text
    assert text.count('"""') == 4  # header docstring and policy_v2 docstring
    assert "Say '''hi'''." in text


def test_extract_fenced_function():
    reply = (
        "Here is a better policy:\n"
        "```python\n"
        "def policy_v2(obs: np.ndarray) -> float:\n"
        "    theta = np.arctan2(obs[1], obs[0])\n"
        "    return -2.0 * theta\n"
        "```\n"
        "It uses feedback on the angle.\n"
    )
    source = extract_policy(reply)
    assert source == (
        "def policy(obs: np.ndarray) -> float:\n"
        "    theta = np.arctan2(obs[1], obs[0])\n"
        "    return -2.0 * theta\n"
    )
    parse(source, 3, 1)


def test_extract_prefers_requested_name():
    reply = (
        "def policy_v1(obs):\n"
        "    return 1.0\n"
        "\n"
        "def policy_v2(obs):\n"
        "    return 2.0\n"
    )
    assert extract_policy(reply) == "def policy(obs):\n    return 2.0\n"


def test_extract_falls_back_to_any_policy_name():
    reply = "def policy_v7(obs):\n    return obs[2]\n"
    assert extract_policy(reply) == "def policy(obs):\n    return obs[2]\n"


def test_extract_stops_at_dedent():
    reply = "    def policy_v2(obs):\n        return 1.0\n    print(policy_v2(None))\n"
    assert extract_policy(reply) == "def policy(obs):\n    return 1.0\n"


def test_extract_body_continuation():
    """A reply continuing the prompt's open header is wrapped as a function."""
    reply = "    theta = obs[0]\n    return theta\n\n\nprint('done')\n"
    assert extract_policy(reply) == "def policy(obs):\n    theta = obs[0]\n    return theta\n"


def test_extract_unindented_body():
    assert extract_policy("return obs[0]") == "def policy(obs):\n    return obs[0]\n"


def test_extract_expands_tabs():
    reply = "def policy_v2(obs):\n\tx = obs[1]\n\treturn x\n"
    source = extract_policy(reply)
    assert source == "def policy(obs):\n    x = obs[1]\n    return x\n"


@pytest.mark.parametrize(
    "reply, message",
    [
        ("", "empty reply"),
        ("```\n```\n", "empty reply"),
        ("I cannot improve on that policy.", "no policy function found"),
        ("    x = 1.0\n", "no policy function found"),
    ],
)
def test_extraction_failures(reply, message):
    with pytest.raises(ExtractionFailure, match=message):
        extract_policy(reply)
