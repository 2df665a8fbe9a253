"""Data models shared across the synthesis pipeline."""

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Dict, List, Mapping, Optional, Tuple

from .environments import get_environment
from .errors import ConfigError
from .policy_ast import PolicyProgram
from .policy_printer import pretty_print
from .sandbox import SandboxLimits

DEFAULT_HORIZON = 1000
GENERATORS = ("mock", "remote")
REJECTION_CATEGORIES = ("parse_error", "runtime_error", "nonfinite", "budget_exceeded")
REJECTED = float("-inf")

# fields that change how long a run goes, not what it computes
BUDGET_FIELDS = ("max_candidates", "target_score", "workers", "checkpoint_every")

API_KEY_ENV = "CONTROL_SYNTH_API_KEY"
ENDPOINT_ENV = "CONTROL_SYNTH_ENDPOINT"


@dataclass(frozen=True)
class TaskSpec:
    """What to synthesize: the task text, the starter policy and the environment."""

    task_description: str
    starter_policy_source: str
    env_id: str
    horizon: int = DEFAULT_HORIZON
    obs_dim: int = 0  # 0 means "take it from the environment"
    action_dim: int = 0

    def __post_init__(self) -> None:
        env = get_environment(self.env_id)
        if self.horizon < 1:
            raise ConfigError("horizon must be ≥ 1")
        for name, expected in (("obs_dim", env.obs_dim), ("action_dim", env.action_dim)):
            value = getattr(self, name)
            if value == 0:
                object.__setattr__(self, name, expected)
            elif value != expected:
                raise ConfigError(
                    f"{name} {value} does not match {self.env_id} (expected {expected})"
                )
        if not self.starter_policy_source.strip():
            raise ConfigError("starter policy cannot be empty")


@dataclass(frozen=True)
class RunConfig:
    """Knobs of one synthesis run. Every field can be set from ``[run]`` or ``--set``."""

    islands: int = 10
    candidates_per_prompt: int = 4
    max_candidates: int = 10_000
    reset_period: int = 2000
    seed: int = 0
    generator: str = "mock"
    db_capacity_per_island: int = 100
    db_temperature: float = 1.0
    eval_episodes: int = 1
    eval_seed: Optional[int] = None
    workers: int = 1
    checkpoint_every: int = 1000
    target_score: Optional[float] = None
    max_ops_per_call: int = 10_000
    max_abs_value: float = 1e9
    temperature: float = 1.0
    top_p: float = 0.95
    repeat_last_n: int = 15
    max_tokens: int = 512
    endpoint: str = ""
    model_id: str = ""
    max_connections: int = 4
    request_timeout: float = 60.0

    def __post_init__(self) -> None:
        if self.islands < 2:
            raise ConfigError("islands must be ≥ 2")
        if self.max_candidates < 0:
            raise ConfigError("max_candidates must be ≥ 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.eval_seed is not None and not 0 <= self.eval_seed < 2**64:
            raise ConfigError("eval_seed must be a 64-bit unsigned integer")
        if self.generator not in GENERATORS:
            raise ConfigError(f"generator must be one of {', '.join(GENERATORS)}")
        for name in (
            "candidates_per_prompt",
            "reset_period",
            "db_capacity_per_island",
            "eval_episodes",
            "workers",
            "checkpoint_every",
            "max_ops_per_call",
            "max_tokens",
            "max_connections",
        ):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be ≥ 1")
        for name in ("db_temperature", "temperature", "max_abs_value", "request_timeout"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if not 0 < self.top_p <= 1:
            raise ConfigError("top_p must be in (0, 1]")
        if self.repeat_last_n < 0:
            raise ConfigError("repeat_last_n must be ≥ 0")

    @property
    def limits(self) -> SandboxLimits:
        return SandboxLimits(self.max_ops_per_call, self.max_abs_value)

    @property
    def config_hash(self) -> str:
        """Hash of every field that influences results (budget fields excluded)."""
        data = {k: v for k, v in asdict(self).items() if k not in BUDGET_FIELDS}
        encoded = json.dumps(data, sort_keys=True).encode("utf-8")
        return hashlib.sha256(encoded).hexdigest()[:16]


@dataclass(frozen=True)
class GeneratorParams:
    temperature: float = 1.0
    top_p: float = 0.95
    repeat_last_n: int = 15
    max_tokens: int = 512
    endpoint: str = ""
    model_id: str = ""
    api_key: str = field(default="", repr=False)
    max_connections: int = 4
    request_timeout: float = 60.0

    def __post_init__(self) -> None:
        if not self.temperature > 0:
            raise ConfigError("temperature must be > 0")
        if not 0 < self.top_p <= 1:
            raise ConfigError("top_p must be in (0, 1]")

    @classmethod
    def from_config(
        cls, cfg: RunConfig, environ: Optional[Mapping[str, str]] = None
    ) -> "GeneratorParams":
        """Build request parameters; the endpoint may and the key must come from the environment."""
        env = os.environ if environ is None else environ
        return cls(
            temperature=cfg.temperature,
            top_p=cfg.top_p,
            repeat_last_n=cfg.repeat_last_n,
            max_tokens=cfg.max_tokens,
            endpoint=cfg.endpoint or env.get(ENDPOINT_ENV, ""),
            model_id=cfg.model_id,
            api_key=env.get(API_KEY_ENV, ""),
            max_connections=cfg.max_connections,
            request_timeout=cfg.request_timeout,
        )


def canonical_source(program: PolicyProgram) -> str:
    return pretty_print(program, name="policy")


def program_id_for(program: PolicyProgram) -> str:
    digest = hashlib.sha256(canonical_source(program).encode("utf-8")).hexdigest()
    return digest[:12]


@dataclass(frozen=True)
class ScoredProgram:
    """A policy together with the return it achieved."""

    program: PolicyProgram
    score: float
    env_id: str
    iteration: int = 0
    generator_id: str = "starter"
    island: int = 0

    def __post_init__(self) -> None:
        if not math.isfinite(self.score):
            raise ValueError("score must be finite")

    @cached_property
    def source(self) -> str:
        return canonical_source(self.program)

    @cached_property
    def program_id(self) -> str:
        return hashlib.sha256(self.source.encode("utf-8")).hexdigest()[:12]


@dataclass(frozen=True)
class Rejection:
    """A candidate that could not be scored."""

    category: str
    message: str
    source: str = ""
    step: Optional[int] = None

    def __post_init__(self) -> None:
        if self.category not in REJECTION_CATEGORIES:
            raise ValueError(f"unknown rejection category '{self.category}'")


@dataclass(frozen=True)
class StepRecord:
    t: int
    state: Tuple[float, ...]
    obs: Tuple[float, ...]
    action: Tuple[float, ...]
    reward: float
    cumulative: float


@dataclass
class RolloutResult:
    """Outcome of one closed-loop episode."""

    return_R: float
    steps_completed: int
    trajectory: Optional[List[StepRecord]] = None
    terminated_early: bool = False
    reason: str = ""
    valid: bool = True
    failed_step: Optional[int] = None
    category: str = ""

    def __post_init__(self) -> None:
        if not self.valid:
            self.return_R = REJECTED


@dataclass(frozen=True)
class Prompt:
    text: str
    lineage: Tuple[str, str]
    version_count: int = 2
    requested_name: str = "policy_v2"


@dataclass(frozen=True)
class CandidateBatch:
    sources: Tuple[str, ...]
    prompt_lineage: Tuple[str, str]
    generator_id: str
    extraction_failures: int = 0


@dataclass
class RunReport:
    """Summary of a synthesis run."""

    candidates_generated: int
    candidates_valid: int
    rejections: Dict[str, int]
    best: ScoredProgram
    best_score_trace: List[Tuple[int, float]]
    wall_time: float = field(default=0.0, compare=False)

    def __post_init__(self) -> None:
        if self.candidates_valid > self.candidates_generated:
            raise ValueError("candidates_valid cannot exceed candidates_generated")

