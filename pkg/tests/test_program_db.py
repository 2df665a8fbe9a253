"""Tests for the island program database."""

import json
import math
from dataclasses import replace

import numpy as np
import pytest

from control_synth.errors import CheckpointError, ProgramNotFoundError
from control_synth.models import ScoredProgram
from control_synth.policy_parser import parse
from control_synth.program_db import Island, IslandDatabase

ENV = "pendulum_swingup"


def _sp(constant, score, island=0):
    """A distinct program per constant."""
    program = parse(f"return obs[0] * {float(constant)!r}", 3, 1)
    return ScoredProgram(program, float(score), ENV, island=island)


def _db(islands=4, capacity=5, seed=0):
    return IslandDatabase(islands, capacity, 1.0, seed, ENV, 3, 1, "hash")


def test_island_keeps_members_sorted():
    island = Island(0, capacity=10)
    for constant, score in [(1, 3.0), (2, 5.0), (3, 1.0), (4, 4.0)]:
        assert island.insert(_sp(constant, score))
    assert [m.score for m in island.members] == [5.0, 4.0, 3.0, 1.0]
    assert island.best_score == 5.0


def test_island_ties_go_after_existing_members():
    island = Island(0)
    first, second = _sp(1, 2.0), _sp(2, 2.0)
    island.insert(first)
    island.insert(second)
    assert island.members == [first, second]


def test_island_rejects_duplicates():
    """The same program text is stored once per island."""
    island = Island(0)
    assert island.insert(_sp(1, 2.0))
    assert not island.insert(_sp(1, 9.0))
    assert len(island) == 1


def test_island_capacity_evicts_lowest():
    island = Island(0, capacity=3)
    for constant in range(3):
        island.insert(_sp(constant, constant))
    assert not island.insert(_sp(10, -1.0))
    assert not island.insert(_sp(11, 0.0))
    assert island.insert(_sp(12, 0.5))
    assert [m.score for m in island.members] == [2.0, 1.0, 0.5]
    # the evicted program may come back
    assert island.insert(_sp(0, 1.5))


def test_island_validation():
    with pytest.raises(ValueError, match="capacity must be positive"):
        Island(0, capacity=0)


def test_database_validation():
    with pytest.raises(ValueError, match="at least 2 islands"):
        IslandDatabase(islands=1)
    with pytest.raises(ValueError, match="temperature must be positive"):
        IslandDatabase(temperature=0.0)


def test_register_counts_only_insertions():
    db = _db()
    assert db.register(_sp(1, 1.0), 2)
    assert not db.register(_sp(1, 1.0), 2)
    assert db.register(_sp(1, 1.0), 3)
    assert db.registrations == 2
    assert db.islands[2].members[0].island == 2
    with pytest.raises(ValueError, match="invalid island id 4"):
        db.register(_sp(2, 1.0), 4)


def test_reset_replaces_worst_half():
    """Losers are emptied and reseeded with a survivor's best program."""
    db = _db(islands=4)
    for island_id in range(4):
        db.register(_sp(island_id, float(island_id)), island_id)
        db.register(_sp(island_id + 10, island_id - 0.5), island_id)
    reset = db.reset_islands()
    assert reset == [0, 1]
    survivors_best = {db.islands[2].best.program_id, db.islands[3].best.program_id}
    for island_id in reset:
        island = db.islands[island_id]
        assert len(island) == 1
        assert island.best.program_id in survivors_best
        assert island.best.island == island_id
    assert len(db.islands[2]) == 2 and len(db.islands[3]) == 2


def test_reset_with_odd_island_count_prefers_empty_islands():
    db = _db(islands=5)
    db.register(_sp(1, 1.0), 1)
    db.register(_sp(2, 2.0), 3)
    db.register(_sp(3, 3.0), 4)
    reset = db.reset_islands()
    assert reset == [0, 2]
    assert db.islands[0].best_score >= 1.0


def test_reset_tie_keeps_the_lower_island_id():
    db = _db(islands=2)
    db.register(_sp(1, 5.0), 0)
    db.register(_sp(2, 5.0), 1)
    assert db.reset_islands() == [1]
    assert db.islands[0].best.program_id == _sp(1, 5.0).program_id
    assert [m.program_id for m in db.islands[1].members] == [_sp(1, 5.0).program_id]
    assert db.islands[1].best.island == 1


def test_sampling_empty_island_returns_starter():
    db = _db()
    starter = parse("return 0.0", 3, 1)
    island_id, low, high = db.sample_prompt_programs(starter)
    assert 0 <= island_id < 4
    assert low is starter and high is starter


def test_sampling_orders_parents_by_score():
    """The second parent never scores below the first."""
    db = _db(islands=2, capacity=10)
    for island_id in range(2):
        for constant in range(6):
            db.register(_sp(constant, constant * 0.5), island_id)
    scores = {sp.program: sp.score for sp in db.all_programs()}
    starter = parse("return 0.0", 3, 1)
    seen_islands = set()
    for _ in range(200):
        island_id, low, high = db.sample_prompt_programs(starter)
        seen_islands.add(island_id)
        assert low != high
        assert scores[high] >= scores[low]
    assert seen_islands == {0, 1}


def test_sampling_single_member():
    db = _db(islands=2)
    db.register(_sp(1, 1.0), 0)
    db.register(_sp(2, 1.0), 1)
    _, low, high = db.sample_prompt_programs(parse("return 0.0", 3, 1))
    assert low == high


def test_sampling_is_seeded():
    def draws(seed):
        db = _db(seed=seed)
        for island_id in range(4):
            for constant in range(4):
                db.register(_sp(constant, constant), island_id)
        starter = parse("return 0.0", 3, 1)
        return [db.sample_prompt_programs(starter) for _ in range(20)]

    assert draws(5) == draws(5)
    assert draws(5) != draws(6)


def test_low_temperature_favours_the_best():
    db = IslandDatabase(2, 10, 0.01, 0, ENV, 3, 1)
    for island_id in range(2):
        for constant in range(4):
            db.register(_sp(constant, constant), island_id)
    best_program = _sp(3, 3.0).program
    starter = parse("return 0.0", 3, 1)
    highs = [db.sample_prompt_programs(starter)[2] for _ in range(50)]
    assert all(h == best_program for h in highs)


def test_softmax_picks_the_better_program_almost_always():
    """Scores 10, 0 and -1 at temperature 0.1 over ten thousand draws."""
    db = IslandDatabase(2, 10, 0.1, 0, ENV, 3, 1)
    for constant, score in [(1, 10.0), (2, 0.0), (3, -1.0)]:
        db.register(_sp(constant, score), 0)
    best, middle = _sp(1, 10.0).program, _sp(2, 0.0).program
    starter = parse("return 0.0", 3, 1)
    draws = [db.sample_prompt_programs(starter) for _ in range(10_000)]
    on_island = [(low, high) for island_id, low, high in draws if island_id == 0]
    assert len(on_island) > 4000
    best_high = sum(1 for _, high in on_island if high == best)
    best_pair = sum(1 for low, high in on_island if (low, high) == (middle, best))
    assert best_high / len(on_island) >= 0.99
    assert best_pair / len(on_island) >= 0.99


def test_readers():
    db = _db()
    db.register(_sp(1, 1.0), 0)
    db.register(_sp(2, 5.0), 1)
    db.register(_sp(2, 5.0), 2)
    db.register(_sp(3, 3.0), 2)
    assert db.best().score == 5.0
    assert db.best().island == 1
    assert [sp.score for sp in db.top(5)] == [5.0, 3.0, 1.0]
    assert db.top(0) == []
    target = _sp(3, 3.0).program_id
    assert db.find(target).score == 3.0
    with pytest.raises(ProgramNotFoundError, match="no program with id 'abc'"):
        db.find("abc")
    stats = db.island_stats()
    assert stats[2] == {"island": 2, "size": 2, "best_score": 5.0, "mean_score": 4.0}
    assert stats[3]["best_score"] is None
    assert _db().best() is None


def test_checkpoint_round_trip(tmp_path):
    """restore(checkpoint(db)) equals db, including the random stream."""
    db = _db(seed=9)
    for island_id in range(4):
        for constant in range(3):
            db.register(_sp(constant + island_id, constant * 1.5), island_id)
    db.run_state = {"generated": 12}
    starter = parse("return 0.0", 3, 1)
    db.sample_prompt_programs(starter)

    path = db.checkpoint(tmp_path / "ckpt-12.db")
    restored = IslandDatabase.restore(path)
    assert restored == db
    assert restored.run_state == {"generated": 12}
    assert (restored.env_id, restored.config_hash) == (ENV, "hash")
    assert restored.sample_prompt_programs(starter) == db.sample_prompt_programs(starter)
    assert not (tmp_path / "ckpt-12.db.tmp").exists()


def test_checkpoint_header(tmp_path):
    db = _db()
    db.register(_sp(1, 1.0), 0)
    path = db.checkpoint(tmp_path / "c.db")
    header = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
    assert header["format"] == "control-synth-db"
    assert header["version"] == 1
    assert header["programs"] == 1
    assert header["rng_state"]["bit_generator"] == "PCG64"


def _saved_lines(tmp_path):
    db = _db()
    db.register(_sp(1, 1.0), 0)
    db.register(_sp(2, 2.0), 0)
    path = db.checkpoint(tmp_path / "c.db")
    return path, path.read_text(encoding="utf-8").splitlines()


def test_restore_missing_file(tmp_path):
    with pytest.raises(CheckpointError, match="checkpoint not found"):
        IslandDatabase.restore(tmp_path / "missing.db")


def test_restore_empty_file(tmp_path):
    path = tmp_path / "empty.db"
    path.write_text("", encoding="utf-8")
    with pytest.raises(CheckpointError, match="empty checkpoint"):
        IslandDatabase.restore(path)


def test_restore_truncated(tmp_path):
    path, lines = _saved_lines(tmp_path)
    path.write_text("\n".join(lines[:-1]) + "\n", encoding="utf-8")
    with pytest.raises(CheckpointError, match="truncated checkpoint \\(1 of 2"):
        IslandDatabase.restore(path)


def test_restore_malformed_record(tmp_path):
    path, lines = _saved_lines(tmp_path)
    path.write_text("\n".join(lines[:-1] + ['{"island": 0, "sco']) + "\n", encoding="utf-8")
    with pytest.raises(CheckpointError, match=":3: malformed record"):
        IslandDatabase.restore(path)


def test_restore_unsorted_island(tmp_path):
    path, lines = _saved_lines(tmp_path)
    path.write_text("\n".join([lines[0], lines[2], lines[1]]) + "\n", encoding="utf-8")
    with pytest.raises(CheckpointError, match="island 0 is not sorted"):
        IslandDatabase.restore(path)


def test_restore_foreign_file(tmp_path):
    path = tmp_path / "other.db"
    path.write_text('{"format": "something-else"}\n', encoding="utf-8")
    with pytest.raises(CheckpointError, match="not a control-synth checkpoint"):
        IslandDatabase.restore(path)


def test_restore_bad_program_record(tmp_path):
    path, lines = _saved_lines(tmp_path)
    record = json.loads(lines[2])
    record["source"] = "return obs[7]"
    path.write_text("\n".join(lines[:2] + [json.dumps(record)]) + "\n", encoding="utf-8")
    with pytest.raises(CheckpointError, match=":3: malformed program record"):
        IslandDatabase.restore(path)


@pytest.mark.parametrize("island", [-1, 4])
def test_restore_island_out_of_range(tmp_path, island):
    path, lines = _saved_lines(tmp_path)
    record = json.loads(lines[2])
    record["island"] = island
    path.write_text("\n".join(lines[:2] + [json.dumps(record)]) + "\n", encoding="utf-8")
    with pytest.raises(CheckpointError, match=f"island {island} out of range \\[0, 4\\)"):
        IslandDatabase.restore(path)


def _check_invariants(db, islands, capacity):
    assert len(db.islands) == islands
    for island in db.islands:
        scores = [m.score for m in island.members]
        assert scores == sorted(scores, reverse=True)
        assert len(scores) <= capacity
        assert len({m.source for m in island.members}) == len(scores)
        assert all(m.island == island.id for m in island.members)


@pytest.mark.slow
def test_random_operation_stream_keeps_invariants():
    """10^5 random registrations, samples and resets."""
    islands, capacity = 4, 6
    db = _db(islands=islands, capacity=capacity, seed=7)
    pool = [_sp(constant, 0.0) for constant in range(300)]
    starter = parse("return 0.0", 3, 1)
    rng = np.random.default_rng(0)
    best_so_far = -math.inf
    for _ in range(100_000):
        op = rng.uniform()
        if op < 0.7:
            sp = replace(pool[int(rng.integers(len(pool)))], score=float(rng.normal()))
            island_id = int(rng.integers(islands))
            if db.register(sp, island_id):
                best_so_far = max(best_so_far, sp.score)
        elif op < 0.95:
            island_id, low, high = db.sample_prompt_programs(starter)
            members = db.islands[island_id].members
            if len(members) >= 2:
                score_of = {id(m.program): m.score for m in members}
                assert score_of[id(high)] >= score_of[id(low)]
                assert high is not low
        else:
            db.reset_islands()
        _check_invariants(db, islands, capacity)
        best = db.best()
        assert best is not None or best_so_far == -math.inf
        if best is not None:
            assert best.score == best_so_far
