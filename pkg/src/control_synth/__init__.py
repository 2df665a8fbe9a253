"""Evolutionary synthesis of interpretable control policies."""

from .errors import ConfigError, ControlSynthError, PolicySyntaxError
from .evaluation import rollout
from .orchestrator import replay, run
from .policy_parser import parse
from .policy_printer import pretty_print
from .sandbox import eval_policy
from .spec_io import load_run_config, load_spec

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ControlSynthError",
    "PolicySyntaxError",
    "eval_policy",
    "load_run_config",
    "load_spec",
    "parse",
    "pretty_print",
    "replay",
    "rollout",
    "run",
]
