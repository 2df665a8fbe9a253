"""Island-model store of scored programs."""

import bisect
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Set, Tuple, Union

import numpy as np

from .errors import CheckpointError, PolicySyntaxError, ProgramNotFoundError
from .models import REJECTED, ScoredProgram
from .policy_ast import PolicyProgram
from .policy_parser import parse

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "control-synth-db"
CHECKPOINT_VERSION = 1


@dataclass
class Island:
    """One population; members are kept sorted by score, best first."""

    id: int
    capacity: int = 100
    members: List[ScoredProgram] = field(default_factory=list)
    _sources: Set[str] = field(default_factory=set, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError("capacity must be positive")
        self._sources = {m.source for m in self.members}

    @property
    def best_score(self) -> float:
        return self.members[0].score if self.members else REJECTED

    @property
    def best(self) -> Optional[ScoredProgram]:
        return self.members[0] if self.members else None

    def __len__(self) -> int:
        return len(self.members)

    def insert(self, sp: ScoredProgram) -> bool:
        """Insert keeping the order; False when the program was not kept."""
        source = sp.source
        if source in self._sources:
            return False
        if len(self.members) >= self.capacity and sp.score <= self.members[-1].score:
            return False
        # after every member with an equal or higher score
        keys = [-m.score for m in self.members]
        position = bisect.bisect_right(keys, -sp.score)
        self.members.insert(position, sp)
        self._sources.add(source)
        if len(self.members) > self.capacity:
            evicted = self.members.pop()
            self._sources.discard(evicted.source)
        return True

    def clear(self) -> None:
        self.members.clear()
        self._sources.clear()


class IslandDatabase:
    """
    A fixed number of islands with two-stage sampling and periodic resets.

    All mutation goes through this object; it is not meant to be shared
    between writers.
    """

    def __init__(
        self,
        islands: int = 10,
        capacity: int = 100,
        temperature: float = 1.0,
        seed: Optional[int] = 0,
        env_id: str = "",
        obs_dim: int = 0,
        action_dim: int = 0,
        config_hash: str = "",
    ):
        if islands < 2:
            raise ValueError("an island database needs at least 2 islands")
        if not temperature > 0:
            raise ValueError("temperature must be positive")
        self.islands = [Island(i, capacity) for i in range(islands)]
        self.capacity = capacity
        self.temperature = temperature
        self.rng = np.random.default_rng(seed)
        self.registrations = 0
        self.env_id = env_id
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.config_hash = config_hash
        self.run_state: Dict[str, Any] = {}

    # -- writes --------------------------------------------------------------

    def register(self, sp: ScoredProgram, island_id: int) -> bool:
        """
        Store a scored program in an island.

        Returns:
            True if the program was inserted (and counted as a registration)

        Raises:
            ValueError: Unknown island id or non-finite score
        """
        if not 0 <= island_id < len(self.islands):
            raise ValueError(f"invalid island id {island_id}")
        if not math.isfinite(sp.score):
            raise ValueError("only finite scores can be registered")
        inserted = self.islands[island_id].insert(replace(sp, island=island_id))
        if inserted:
            self.registrations += 1
            logger.debug("Registered %s (%.6g) on island %d", sp.program_id, sp.score, island_id)
        return inserted

    def reset_islands(self) -> List[int]:
        """
        Empty the worst half of the islands and reseed each from a survivor.

        Returns:
            Ids of the islands that were reset
        """
        count = len(self.islands)
        ranking = sorted(range(count), key=lambda i: (-self.islands[i].best_score, i))
        keep = count - count // 2
        survivors, losers = ranking[:keep], sorted(ranking[keep:])
        for island_id in losers:
            donor = self.islands[survivors[int(self.rng.integers(len(survivors)))]]
            seed_program = donor.best
            target = self.islands[island_id]
            target.clear()
            if seed_program is not None:
                target.insert(replace(seed_program, island=island_id))
        logger.info("Reset islands %s", losers)
        return losers

    # -- sampling -------------------------------------------------------------

    def sample_prompt_programs(
        self, starter: PolicyProgram
    ) -> Tuple[int, PolicyProgram, PolicyProgram]:
        """
        Pick an island uniformly, then two of its members by softmax over score.

        Returns:
            (island_id, program_low, program_high) with program_high scoring at
            least as well as program_low
        """
        island_id = int(self.rng.integers(len(self.islands)))
        members = self.islands[island_id].members
        if not members:
            return island_id, starter, starter
        if len(members) == 1:
            return island_id, members[0].program, members[0].program

        scores = np.array([m.score for m in members], dtype=float)
        weights = np.exp((scores - scores.max()) / self.temperature)
        first = int(self.rng.choice(len(members), p=weights / weights.sum()))
        weights[first] = 0.0
        total = weights.sum()
        if total > 0:
            probabilities = weights / total
        else:
            probabilities = np.ones(len(members))
            probabilities[first] = 0.0
            probabilities /= probabilities.sum()
        second = int(self.rng.choice(len(members), p=probabilities))

        high, low = sorted((first, second))
        return island_id, members[low].program, members[high].program

    # -- reads ----------------------------------------------------------------

    def all_programs(self) -> List[ScoredProgram]:
        return [m for island in self.islands for m in island.members]

    def best(self) -> Optional[ScoredProgram]:
        """Highest-scoring program; ties go to the lower island id."""
        best: Optional[ScoredProgram] = None
        for island in self.islands:
            candidate = island.best
            if candidate is not None and (best is None or candidate.score > best.score):
                best = candidate
        return best

    def top(self, k: int) -> List[ScoredProgram]:
        """The k best programs, one entry per distinct program."""
        seen: Set[str] = set()
        ranked: List[ScoredProgram] = []
        for sp in sorted(self.all_programs(), key=lambda p: -p.score):
            if sp.program_id not in seen:
                seen.add(sp.program_id)
                ranked.append(sp)
        return ranked[: max(k, 0)]

    def find(self, program_id: str) -> ScoredProgram:
        """
        Look up a program by id.

        Raises:
            ProgramNotFoundError: If no island holds the program
        """
        matches = [sp for sp in self.all_programs() if sp.program_id == program_id]
        if not matches:
            raise ProgramNotFoundError(f"no program with id '{program_id}'")
        return max(matches, key=lambda sp: sp.score)

    def island_stats(self) -> List[Dict[str, Any]]:
        stats = []
        for island in self.islands:
            scores = [m.score for m in island.members]
            stats.append(
                {
                    "island": island.id,
                    "size": len(scores),
                    "best_score": scores[0] if scores else None,
                    "mean_score": float(np.mean(scores)) if scores else None,
                }
            )
        return stats

    # -- persistence ------------------------------------------------------------

    def checkpoint(self, path: Union[str, Path]) -> Path:
        """
        Write the database as JSON lines: one header record, then one record
        per program in island order.
        """
        path = Path(path)
        programs = self.all_programs()
        header = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "config_hash": self.config_hash,
            "rng_state": self.rng.bit_generator.state,
            "registrations": self.registrations,
            "islands": len(self.islands),
            "capacity": self.capacity,
            "temperature": self.temperature,
            "env_id": self.env_id,
            "obs_dim": self.obs_dim,
            "action_dim": self.action_dim,
            "programs": len(programs),
            "run_state": self.run_state,
        }
        lines = [json.dumps(header, sort_keys=True)]
        for sp in programs:
            record = {
                "island": sp.island,
                "score": sp.score,
                "iteration": sp.iteration,
                "generator_id": sp.generator_id,
                "source": sp.source,
            }
            lines.append(json.dumps(record, sort_keys=True))

        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
        tmp.replace(path)
        logger.info("Saved database with %d programs to %s", len(programs), path)
        return path

    @classmethod
    def restore(cls, path: Union[str, Path]) -> "IslandDatabase":
        """
        Read a checkpoint back.

        Raises:
            CheckpointError: Missing, truncated or malformed file
        """
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise CheckpointError(f"checkpoint not found: {path}") from None
        except (OSError, UnicodeDecodeError) as e:
            raise CheckpointError(f"cannot read checkpoint {path}: {e}") from None

        lines = [line for line in text.split("\n") if line.strip()]
        if not lines:
            raise CheckpointError(f"{path}: empty checkpoint")
        records = []
        for number, line in enumerate(lines, start=1):
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise CheckpointError(f"{path}:{number}: malformed record ({e.msg})") from None

        header = records[0]
        if not isinstance(header, dict) or header.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointError(f"{path}: not a control-synth checkpoint")
        if header.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {header.get('version')}")

        try:
            db = cls(
                islands=int(header["islands"]),
                capacity=int(header["capacity"]),
                temperature=float(header["temperature"]),
                seed=0,
                env_id=str(header["env_id"]),
                obs_dim=int(header["obs_dim"]),
                action_dim=int(header["action_dim"]),
                config_hash=str(header["config_hash"]),
            )
            db.rng.bit_generator.state = header["rng_state"]
            db.registrations = int(header["registrations"])
            db.run_state = dict(header.get("run_state") or {})
            expected = int(header["programs"])
        except (KeyError, TypeError, ValueError) as e:
            raise CheckpointError(f"{path}: malformed header ({e})") from None

        body = records[1:]
        if len(body) != expected:
            raise CheckpointError(
                f"{path}: truncated checkpoint ({len(body)} of {expected} program records)"
            )

        for number, record in enumerate(body, start=2):
            try:
                program = parse(record["source"], db.obs_dim, db.action_dim)
                sp = ScoredProgram(
                    program=program,
                    score=float(record["score"]),
                    env_id=db.env_id,
                    iteration=int(record["iteration"]),
                    generator_id=str(record["generator_id"]),
                    island=int(record["island"]),
                )
                if not 0 <= sp.island < len(db.islands):
                    raise ValueError(f"island {sp.island} out of range [0, {len(db.islands)})")
                island = db.islands[sp.island]
            except (KeyError, TypeError, ValueError, PolicySyntaxError) as e:
                raise CheckpointError(f"{path}:{number}: malformed program record ({e})") from None
            if island.members and island.members[-1].score < sp.score:
                raise CheckpointError(f"{path}:{number}: island {sp.island} is not sorted")
            island.members.append(sp)
            island._sources.add(sp.source)

        logger.info("Loaded database with %d programs from %s", len(body), path)
        return db

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IslandDatabase):
            return NotImplemented
        return (
            [i.members for i in self.islands] == [i.members for i in other.islands]
            and self.registrations == other.registrations
            and self.rng.bit_generator.state == other.rng.bit_generator.state
            and self.capacity == other.capacity
            and self.temperature == other.temperature
        )
