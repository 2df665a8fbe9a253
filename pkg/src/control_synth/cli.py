"""Command-line interface for control-synth."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from .environments import get_environment
from .errors import (
    CheckpointError,
    ConfigError,
    GeneratorError,
    PolicySyntaxError,
    ProgramNotFoundError,
)
from .evaluation import rollout, write_trajectory_csv
from .histogram import DEFAULT_CAP_SECONDS, run_histogram, write_histogram_csv
from .orchestrator import replay, run, select_program
from .policy_parser import parse
from .program_db import IslandDatabase
from .reporting import Reporter
from .sandbox import DEFAULT_LIMITS
from .spec_io import load_run_config, load_spec

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SERVICE = 2


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with status 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point for CLI application."""
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        return args.handler(args)
    except GeneratorError as e:
        print(f"Error: generator failed: {e}", file=sys.stderr)
        return EXIT_SERVICE
    except PolicySyntaxError as e:
        print(f"Error: policy does not parse: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, CheckpointError, ProgramNotFoundError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"Error: File not found: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        print(f"Unexpected error: {e}", file=sys.stderr)
        import traceback

        traceback.print_exc()
        return EXIT_USAGE


def parse_args(args: Optional[List[str]] = None) -> argparse.Namespace:
    """
    Parse command-line arguments.

    Args:
        args: Optional argument list (defaults to sys.argv[1:])

    Returns:
        Parsed arguments namespace
    """
    parser = _ArgumentParser(
        description="Evolve interpretable control policies by program synthesis",
        prog="control-synth",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synthesize", help="Run the evolutionary search")
    synth.add_argument("--spec", required=True, help="Task specification file")
    synth.add_argument("--config", help="Run configuration file (defaults to the spec's [run])")
    synth.add_argument("--generator", choices=["mock", "remote"])
    synth.add_argument("--max-candidates", type=int)
    synth.add_argument("--seed", type=int)
    synth.add_argument("--islands", type=int)
    synth.add_argument("--workers", type=int)
    synth.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override any run setting (repeatable)",
    )
    synth.add_argument("--resume", help="Checkpoint to continue from")
    synth.add_argument("--out", required=True, help="Output directory")
    synth.set_defaults(handler=cmd_synthesize)

    evaluate = commands.add_parser("evaluate", help="Score one policy file")
    evaluate.add_argument("--env", required=True, help="Environment id")
    evaluate.add_argument("--policy", required=True, help="Policy source file")
    evaluate.add_argument("--horizon", type=int, default=1000)
    evaluate.add_argument("--seed", type=int, help="Reset seed (default start when omitted)")
    evaluate.add_argument("--dump", help="Trajectory CSV file name, written under --out")
    evaluate.add_argument("--out", default=".", help="Output directory for --dump")
    evaluate.set_defaults(handler=cmd_evaluate)

    histogram = commands.add_parser("histogram", help="Ball-in-cup catching-time experiment")
    histogram.add_argument("--policy", required=True, help="Ball-in-cup policy file")
    histogram.add_argument("--episodes", type=int, default=10_000)
    histogram.add_argument("--cap-seconds", type=float, default=DEFAULT_CAP_SECONDS)
    histogram.add_argument("--seed", type=int, default=0)
    histogram.add_argument("--workers", type=int, default=1)
    histogram.add_argument("--out", required=True, help="Output directory")
    histogram.set_defaults(handler=cmd_histogram)

    db = commands.add_parser("db", help="Inspect a checkpoint")
    db_commands = db.add_subparsers(dest="db_command", required=True)
    top = db_commands.add_parser("top", help="Print the best programs")
    top.add_argument("checkpoint")
    top.add_argument("k", type=int, nargs="?", default=5, help="Number of programs (default: 5)")
    inspect = db_commands.add_parser("inspect", help="Print per-island statistics")
    inspect.add_argument("checkpoint")
    db.set_defaults(handler=cmd_db)

    replay_cmd = commands.add_parser("replay", help="Re-run a stored program")
    replay_cmd.add_argument("checkpoint")
    replay_cmd.add_argument("--id", default="best", help="Program id (default: best)")
    replay_cmd.add_argument("--dump", help="Trajectory CSV file name, written under --out")
    replay_cmd.add_argument("--out", default=".", help="Output directory for --dump")
    replay_cmd.set_defaults(handler=cmd_replay)

    return parser.parse_args(args)


def _read_policy(path: str) -> str:
    policy_path = Path(path)
    if not policy_path.exists():
        raise FileNotFoundError(f"Policy file not found: {policy_path}")
    return policy_path.read_text(encoding="utf-8")


def _dump_path(out_dir: str, name: str) -> Path:
    """Trajectory file under ``out_dir``; names may not leave it."""
    relative = Path(name)
    if relative.is_absolute() or ".." in relative.parts:
        raise ConfigError(f"--dump must be a relative path inside --out, got '{name}'")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = out / relative
    target.parent.mkdir(parents=True, exist_ok=True)
    return target


def run_synthesize(
    spec_path: Path,
    out_dir: Path,
    config_path: Optional[Path] = None,
    overrides: Optional[Dict[str, Any]] = None,
    resume: Optional[Path] = None,
) -> Dict[str, Any]:
    """
    Execute a synthesis run.

    Returns:
        Summary dictionary (the same content as summary.json)

    Raises:
        ConfigError: Invalid spec or configuration
        GeneratorError: Remote generator failure (checkpoint kept)
    """
    spec = load_spec(spec_path)
    cfg = load_run_config(config_path or spec_path, overrides)
    reporter = Reporter("Control Synthesis Report")
    run(spec, cfg, out_dir=out_dir, resume_from=resume, reporter=reporter)
    return reporter.get_summary()


def cmd_synthesize(args: argparse.Namespace) -> int:
    overrides: Dict[str, Any] = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got '{item}'")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    for key in ("generator", "max_candidates", "seed", "islands", "workers"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value

    summary = run_synthesize(
        spec_path=Path(args.spec),
        out_dir=Path(args.out),
        config_path=Path(args.config) if args.config else None,
        overrides=overrides,
        resume=Path(args.resume) if args.resume else None,
    )
    print("\nSynthesis Summary:")
    print("=" * 50)
    results = summary["results"]
    print(f"  best score: {results['best_score']!r}")
    print(f"  best program: {results['best_program_id']} (island {results['best_island']})")
    for category, count in sorted(summary["counters"].items()):
        print(f"  {category}: {count}")
    print(f"\nOutputs written to {args.out}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    env = get_environment(args.env)
    if args.horizon < 0:
        raise ConfigError("horizon must be ≥ 0")
    program = parse(_read_policy(args.policy), env.obs_dim, env.action_dim)
    dump = _dump_path(args.out, args.dump) if args.dump else None
    result = rollout(program, env.env_id, args.horizon, args.seed, record=dump is not None)
    if dump is not None:
        write_trajectory_csv(result, env, dump)
    if not result.valid:
        print(
            f"Rejected ({result.category}) at step {result.failed_step}: {result.reason}",
            file=sys.stderr,
        )
        return EXIT_USAGE
    print(repr(result.return_R))
    return EXIT_OK


def cmd_histogram(args: argparse.Namespace) -> int:
    env = get_environment("ball_in_cup")
    if args.episodes < 0:
        raise ConfigError("episodes must be ≥ 0")
    program = parse(_read_policy(args.policy), env.obs_dim, env.action_dim)
    result = run_histogram(
        program,
        episodes=args.episodes,
        cap_seconds=args.cap_seconds,
        seed=args.seed,
        limits=DEFAULT_LIMITS,
        workers=args.workers,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_histogram_csv(result, out / "histogram.csv")
    summary = result.summary()
    with open(out / "summary.json", "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2)
    print(json.dumps(summary))
    return EXIT_OK


def cmd_db(args: argparse.Namespace) -> int:
    db = IslandDatabase.restore(args.checkpoint)
    if args.db_command == "top":
        for sp in db.top(args.k):
            print(f"{sp.program_id}  score={sp.score!r}  island={sp.island}  iter={sp.iteration}")
            print(sp.source)
        return EXIT_OK
    print(f"islands: {len(db.islands)}  registrations: {db.registrations}")
    for row in db.island_stats():
        best = "-" if row["best_score"] is None else repr(row["best_score"])
        print(f"  island {row['island']}: size={row['size']} best={best}")
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    dump = _dump_path(args.out, args.dump) if args.dump else None
    db = IslandDatabase.restore(args.checkpoint)
    stored = select_program(db, args.id)
    result = replay(db, args.id, record=True)
    if dump is not None:
        write_trajectory_csv(result, stored.env_id, dump)
    print(f"program {stored.program_id}: stored {stored.score!r} replayed {result.return_R!r}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
