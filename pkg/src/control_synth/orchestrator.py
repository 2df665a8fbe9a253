"""The evolutionary loop: sample parents, generate, evaluate, register."""

import logging
import time
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from .errors import ConfigError, GeneratorError, ProgramNotFoundError
from .evaluation import episode_seeds, evaluate_batch, evaluate_candidate, rollout
from .generation import build_prompt, generate_mock, generate_remote
from .generation.remote import CompletionClient
from .models import (
    REJECTION_CATEGORIES,
    GeneratorParams,
    Rejection,
    RolloutResult,
    RunConfig,
    RunReport,
    ScoredProgram,
    TaskSpec,
)
from .policy_parser import parse
from .program_db import IslandDatabase
from .reporting import Reporter
from .sandbox import SandboxLimits
from .seeding import split_seed

logger = logging.getLogger(__name__)

__all__ = ["run", "replay", "select_program", "split_seed", "checkpoint_path"]


def checkpoint_path(out_dir: Union[str, Path], candidates: int) -> Path:
    return Path(out_dir) / f"ckpt-{candidates}.db"


def effective_eval_seed(cfg: RunConfig) -> Optional[int]:
    """Reset seed used for scoring; multi-episode scoring always needs one."""
    if cfg.eval_seed is not None or cfg.eval_episodes == 1:
        return cfg.eval_seed
    return split_seed(cfg.seed, "eval")


class _RunState:
    """Loop counters that travel inside checkpoints."""

    def __init__(self, best: ScoredProgram):
        self.generated = 0
        self.valid = 0
        self.rejections: Dict[str, int] = {c: 0 for c in REJECTION_CATEGORIES}
        self.trace: List[Tuple[int, float]] = [(0, best.score)]
        self.batch = 0
        self.resets = 0
        self.extraction_failures = 0
        self.best = best

    def to_dict(self, spec: TaskSpec, cfg: RunConfig) -> Dict[str, Any]:
        return {
            "generated": self.generated,
            "valid": self.valid,
            "rejections": dict(self.rejections),
            "trace": [[i, s] for i, s in self.trace],
            "batch": self.batch,
            "resets": self.resets,
            "extraction_failures": self.extraction_failures,
            "best": {
                "source": self.best.source,
                "score": self.best.score,
                "iteration": self.best.iteration,
                "generator_id": self.best.generator_id,
                "island": self.best.island,
            },
            "horizon": spec.horizon,
            "eval_seed": effective_eval_seed(cfg),
            "eval_episodes": cfg.eval_episodes,
            "max_ops_per_call": cfg.max_ops_per_call,
            "max_abs_value": cfg.max_abs_value,
            "starter": spec.starter_policy_source,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], spec: TaskSpec) -> "_RunState":
        best_data = data["best"]
        best = ScoredProgram(
            program=parse(best_data["source"], spec.obs_dim, spec.action_dim),
            score=float(best_data["score"]),
            env_id=spec.env_id,
            iteration=int(best_data["iteration"]),
            generator_id=str(best_data["generator_id"]),
            island=int(best_data["island"]),
        )
        state = cls(best)
        state.generated = int(data["generated"])
        state.valid = int(data["valid"])
        state.rejections.update({k: int(v) for k, v in data["rejections"].items()})
        state.trace = [(int(i), float(s)) for i, s in data["trace"]]
        state.batch = int(data["batch"])
        state.resets = int(data["resets"])
        state.extraction_failures = int(data.get("extraction_failures", 0))
        return state


def _new_database(spec: TaskSpec, cfg: RunConfig) -> IslandDatabase:
    return IslandDatabase(
        islands=cfg.islands,
        capacity=cfg.db_capacity_per_island,
        temperature=cfg.db_temperature,
        seed=split_seed(cfg.seed, "db"),
        env_id=spec.env_id,
        obs_dim=spec.obs_dim,
        action_dim=spec.action_dim,
        config_hash=cfg.config_hash,
    )


def _save(db: IslandDatabase, state: _RunState, spec: TaskSpec, cfg: RunConfig, out: Path) -> Path:
    db.run_state = state.to_dict(spec, cfg)
    return db.checkpoint(checkpoint_path(out, state.generated))


def run(
    spec: TaskSpec,
    cfg: RunConfig,
    out_dir: Union[str, Path, None] = None,
    resume_from: Union[str, Path, None] = None,
    reporter: Optional[Reporter] = None,
    client: Optional[CompletionClient] = None,
) -> RunReport:
    """
    Evolve policies until the candidate budget (or target score) is reached.

    Each iteration samples two parents from one island, generates
    ``candidates_per_prompt`` candidates, scores them, and registers the
    valid ones on that island. Islands are reset whenever the registration
    count crosses a multiple of ``reset_period``. Batches are never cut
    short, so the loop may overshoot ``max_candidates`` by less than one batch.

    Args:
        spec: Task specification
        cfg: Run configuration
        out_dir: Where checkpoints and reports go; nothing is written when None
        resume_from: Checkpoint to continue from
        reporter: Collects counters (a fresh one is used when None)
        client: Completion client for the remote generator

    Returns:
        RunReport with the best program and the best-score trace

    Raises:
        ConfigError: Starter rejected or checkpoint from a different config
        GeneratorError: Remote generator failed (a checkpoint is written first)
    """
    reporter = reporter or Reporter()
    started = time.monotonic()
    limits = cfg.limits
    eval_seed = effective_eval_seed(cfg)
    starter = parse(spec.starter_policy_source, spec.obs_dim, spec.action_dim)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    if resume_from is not None:
        db = IslandDatabase.restore(resume_from)
        if db.config_hash != cfg.config_hash:
            raise ConfigError(
                f"checkpoint {resume_from} was written by a different configuration"
            )
        if db.env_id != spec.env_id:
            raise ConfigError(f"checkpoint {resume_from} is for env '{db.env_id}'")
        state = _RunState.from_dict(db.run_state, spec)
        reporter.note(f"Resumed from {resume_from} at candidate {state.generated}")
        logger.info("Resumed from %s at candidate %d", resume_from, state.generated)
    else:
        db = _new_database(spec, cfg)
        outcome = evaluate_candidate(
            spec.starter_policy_source, spec, limits, eval_seed, cfg.eval_episodes
        )
        if isinstance(outcome, Rejection):
            raise ConfigError(
                f"starter policy was rejected ({outcome.category}): {outcome.message}"
            )
        starter_sp = replace(outcome, iteration=0, generator_id="starter")
        for island_id in range(cfg.islands):
            db.register(starter_sp, island_id)
        state = _RunState(db.best() or starter_sp)
        reporter.note(f"Starter scored {starter_sp.score:.6g}")

    params = GeneratorParams.from_config(cfg) if cfg.generator == "remote" else None
    owns_client = False
    if params is not None and client is None:
        client = CompletionClient(params)
        owns_client = True
    last_checkpoint = state.generated

    try:
        while state.generated < cfg.max_candidates:
            if cfg.target_score is not None and state.best.score >= cfg.target_score:
                reporter.note(f"Target score {cfg.target_score} reached")
                break

            island_id, low, high = db.sample_prompt_programs(starter)
            gen_seed = split_seed(cfg.seed, f"generator:{state.batch}")
            if params is None:
                batch = generate_mock(low, high, gen_seed, cfg.candidates_per_prompt)
            else:
                prompt = build_prompt(low, high, spec)
                batch = generate_remote(prompt, params, cfg.candidates_per_prompt, client)
            state.batch += 1

            if batch.extraction_failures:
                state.extraction_failures += batch.extraction_failures
                state.generated += batch.extraction_failures
                state.rejections["parse_error"] += batch.extraction_failures
                reporter.increment("generator.extraction_failures", batch.extraction_failures)

            outcomes = evaluate_batch(
                batch.sources, spec, limits, cfg.workers, eval_seed, cfg.eval_episodes
            )
            for outcome in outcomes:
                state.generated += 1
                if isinstance(outcome, Rejection):
                    state.rejections[outcome.category] += 1
                    logger.debug("Candidate %d rejected: %s", state.generated, outcome.message)
                    continue
                state.valid += 1
                sp = replace(
                    outcome,
                    iteration=state.generated,
                    generator_id=batch.generator_id,
                    island=island_id,
                )
                before = db.registrations
                if db.register(sp, island_id):
                    if db.registrations // cfg.reset_period > before // cfg.reset_period:
                        db.reset_islands()
                        state.resets += 1
                if sp.score > state.best.score:
                    state.best = sp
                    state.trace.append((state.generated, sp.score))
                    logger.info("New best %.6g at candidate %d", sp.score, state.generated)

            if out is not None and (
                state.generated // cfg.checkpoint_every > last_checkpoint // cfg.checkpoint_every
            ):
                _save(db, state, spec, cfg, out)
                last_checkpoint = state.generated
                reporter.increment("checkpoints.written")
    except GeneratorError:
        if out is not None:
            path = _save(db, state, spec, cfg, out)
            reporter.warn(f"Generator failed; state saved to {path}")
        raise
    finally:
        if owns_client and client is not None:
            client.close()

    if out is not None:
        _save(db, state, spec, cfg, out)
        reporter.increment("checkpoints.written")

    report = RunReport(
        candidates_generated=state.generated,
        candidates_valid=state.valid,
        rejections=dict(state.rejections),
        best=state.best,
        best_score_trace=list(state.trace),
        wall_time=time.monotonic() - started,
    )
    _fill_reporter(reporter, report, state, db)
    if out is not None:
        write_run_outputs(report, reporter, out)
    return report


def _fill_reporter(
    reporter: Reporter, report: RunReport, state: _RunState, db: IslandDatabase
) -> None:
    reporter.increment("candidates.generated", report.candidates_generated)
    reporter.increment("candidates.valid", report.candidates_valid)
    for category, count in report.rejections.items():
        if count:
            reporter.increment(f"rejections.{category}", count)
    reporter.increment("db.registrations", db.registrations)
    reporter.increment("db.resets", state.resets)
    reporter.set_result("best_score", report.best.score)
    reporter.set_result("best_program_id", report.best.program_id)
    reporter.set_result("best_island", report.best.island)
    reporter.set_result("best_score_trace", [list(p) for p in report.best_score_trace])
    reporter.set_result("wall_time_s", round(report.wall_time, 3))
    reporter.set_result("best_policy", report.best.source)


def write_run_outputs(report: RunReport, reporter: Reporter, out: Path) -> None:
    """Write report.txt, summary.json and best_policy.py."""
    reporter.write_text(out / "report.txt")
    reporter.write_json(out / "summary.json")
    (out / "best_policy.py").write_text(report.best.source, encoding="utf-8")


def select_program(db: IslandDatabase, policy_selector: str = "best") -> ScoredProgram:
    """
    Resolve "best" or a program id against a database.

    Raises:
        ProgramNotFoundError: Unknown id, or "best" on an empty database
    """
    if policy_selector == "best":
        sp = db.best()
        if sp is None:
            raise ProgramNotFoundError("checkpoint holds no programs")
        return sp
    return db.find(policy_selector)


def replay(
    checkpoint: Union[str, Path, IslandDatabase],
    policy_selector: str = "best",
    record: bool = True,
) -> RolloutResult:
    """
    Re-run a stored program with trajectory recording on.

    ``checkpoint`` is a checkpoint path or a database already restored from one.

    The rollout uses the horizon, evaluation seed and sandbox limits stored
    with the run, so its return equals the stored score. With several
    evaluation episodes the return is their mean and the trajectory is the
    first episode's.

    Raises:
        ProgramNotFoundError: Unknown id, or an empty database
        CheckpointError: Unreadable checkpoint
    """
    if isinstance(checkpoint, IslandDatabase):
        db = checkpoint
    else:
        db = IslandDatabase.restore(checkpoint)
    sp = select_program(db, policy_selector)

    run_state = db.run_state
    horizon = int(run_state.get("horizon", 1000))
    limits = SandboxLimits(
        int(run_state.get("max_ops_per_call", 10_000)),
        float(run_state.get("max_abs_value", 1e9)),
    )
    seeds = episode_seeds(run_state.get("eval_seed"), int(run_state.get("eval_episodes", 1)))

    results = [
        rollout(sp.program, db.env_id, horizon, s, record=(record and k == 0), limits=limits)
        for k, s in enumerate(seeds)
    ]
    first = results[0]
    if len(results) > 1 and all(r.valid for r in results):
        first.return_R = sum(r.return_R for r in results) / len(results)
    return first
