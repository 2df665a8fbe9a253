"""Catching-time experiment for ball-in-cup policies.

Each episode starts from a seeded ball position and runs until the ball is
caught or the time cap is reached. Catch times are binned; episodes that
never catch fall into a separate timeout bin.
"""

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from .environments.ball_in_cup import DEFAULT_PARAMS, ENV_ID
from .evaluation import rollout
from .policy_ast import PolicyProgram
from .sandbox import DEFAULT_LIMITS, SandboxLimits
from .seeding import split_seed

logger = logging.getLogger(__name__)

BIN_WIDTH = 0.5
DEFAULT_CAP_SECONDS = 15.0


@dataclass
class HistogramResult:
    episodes: int
    caught: int
    timed_out: int
    failed: int
    median_catch_time: Optional[float]
    bin_edges: List[float]
    counts: List[int]
    catch_times: List[float] = field(default_factory=list, repr=False)

    def summary(self) -> Dict[str, Any]:
        return {
            "episodes": self.episodes,
            "caught": self.caught,
            "timed_out": self.timed_out,
            "failed": self.failed,
            "median_catch_time": self.median_catch_time,
        }


def _episode(
    k: int, program: PolicyProgram, seed: int, horizon: int, limits: SandboxLimits
) -> Optional[float]:
    """Catch time of episode k, NaN for a policy failure, None for a timeout."""
    result = rollout(
        program,
        ENV_ID,
        horizon,
        split_seed(seed, f"episode:{k}"),
        limits=limits,
        stop_on_terminal=True,
    )
    if not result.valid:
        return float("nan")
    if result.terminated_early and result.reason == "terminal":
        return result.steps_completed * DEFAULT_PARAMS.dt
    return None


def run_histogram(
    program: PolicyProgram,
    episodes: int,
    cap_seconds: float = DEFAULT_CAP_SECONDS,
    seed: int = 0,
    limits: SandboxLimits = DEFAULT_LIMITS,
    workers: int = 1,
    bin_width: float = BIN_WIDTH,
) -> HistogramResult:
    """
    Run the catching-time experiment.

    Args:
        program: Ball-in-cup policy
        episodes: Number of seeded episodes
        cap_seconds: Episode time limit
        seed: Global seed; episode k resets with split_seed(seed, "episode:k")
        limits: Sandbox limits
        workers: Process count for episode fan-out
        bin_width: Histogram bin width in seconds

    Returns:
        HistogramResult with bin counts over [0, cap) plus the timeout count
    """
    if cap_seconds <= 0:
        raise ValueError("cap_seconds must be positive")
    horizon = int(round(cap_seconds / DEFAULT_PARAMS.dt))
    job = partial(_episode, program=program, seed=seed, horizon=horizon, limits=limits)
    if workers > 1 and episodes > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(job, range(episodes), chunksize=64))
    else:
        outcomes = [job(k) for k in range(episodes)]

    times = [t for t in outcomes if t is not None and t == t]
    failed = sum(1 for t in outcomes if t is not None and t != t)
    timed_out = sum(1 for t in outcomes if t is None) + failed

    n_bins = int(np.ceil(cap_seconds / bin_width - 1e-9))
    edges = np.arange(n_bins + 1) * bin_width
    edges[-1] = max(edges[-1], cap_seconds)
    counts, _ = np.histogram(np.asarray(times, dtype=float), bins=edges)
    median = float(np.median(times)) if times else None
    if failed:
        logger.warning("%d of %d episodes ended with a policy failure", failed, episodes)

    return HistogramResult(
        episodes=episodes,
        caught=len(times),
        timed_out=timed_out,
        failed=failed,
        median_catch_time=median,
        bin_edges=[float(e) for e in edges],
        counts=[int(c) for c in counts],
        catch_times=times,
    )


def write_histogram_csv(result: HistogramResult, path: Union[str, Path]) -> Path:
    """Bins as ``bin,start,end,count`` rows followed by the timeout row."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["bin", "start", "end", "count"])
        for i, count in enumerate(result.counts):
            writer.writerow([i, result.bin_edges[i], result.bin_edges[i + 1], count])
        writer.writerow(["timeout", result.bin_edges[-1], "", result.timed_out])
    return path
