"""Tests for the evolutionary loop, checkpoints and replay."""

import json
from dataclasses import replace

import httpx
import pytest
from tenacity import wait_none

from control_synth.corpus import read_policy
from control_synth.errors import ConfigError, GeneratorError, ProgramNotFoundError
from control_synth.generation.remote import CompletionClient
from control_synth.models import GeneratorParams, RunConfig, TaskSpec
from control_synth.orchestrator import checkpoint_path, replay, run, select_program
from control_synth.program_db import IslandDatabase
from control_synth.reporting import Reporter

HORIZON = 150


@pytest.fixture
def spec():
    return TaskSpec(
        "Swing the pendulum up.",
        read_policy("pendulum_bang_linear"),
        "pendulum_swingup",
        horizon=HORIZON,
    )


@pytest.fixture
def cfg():
    return RunConfig(islands=2, candidates_per_prompt=4, max_candidates=40, seed=1)


def test_run_accounts_for_every_candidate(spec, cfg):
    reporter = Reporter()
    report = run(spec, cfg, reporter=reporter)
    assert report.candidates_generated == 40
    assert report.candidates_valid + sum(report.rejections.values()) == 40
    assert reporter.counters["candidates.generated"] == 40
    assert reporter.results["best_score"] == report.best.score


def test_best_score_trace_never_decreases(spec, cfg):
    report = run(spec, cfg)
    trace = report.best_score_trace
    assert trace[0][0] == 0
    assert [s for _, s in trace] == sorted(s for _, s in trace)
    assert [i for i, _ in trace] == sorted(i for i, _ in trace)
    assert trace[-1][1] == report.best.score


def test_run_is_reproducible(spec, cfg):
    """The same seed gives the same report; wall time is not compared."""
    assert run(spec, cfg) == run(spec, cfg)


def test_parallel_evaluation_matches_serial(spec, cfg):
    assert run(spec, replace(cfg, workers=2)) == run(spec, cfg)


def test_batches_are_not_truncated(spec, cfg):
    report = run(spec, replace(cfg, max_candidates=10))
    assert report.candidates_generated == 12


def test_target_score_stops_early(spec, cfg):
    report = run(spec, replace(cfg, target_score=-1e6))
    assert report.candidates_generated == 0
    assert report.best.generator_id == "starter"


def test_islands_are_reset(spec, cfg):
    reporter = Reporter()
    run(spec, replace(cfg, reset_period=3), reporter=reporter)
    assert reporter.counters["db.resets"] > 0


def test_rejected_starter(cfg):
    spec = TaskSpec("Divide by zero.", "return 1.0 / obs[2]", "pendulum_swingup", horizon=10)
    with pytest.raises(ConfigError, match=r"starter policy was rejected \(nonfinite\)"):
        run(spec, cfg)


def test_outputs_are_written(tmp_path, spec, cfg):
    report = run(spec, replace(cfg, checkpoint_every=16), out_dir=tmp_path)
    assert (tmp_path / "best_policy.py").read_text(encoding="utf-8") == report.best.source
    assert "Control Synthesis Report" in (tmp_path / "report.txt").read_text(encoding="utf-8")
    summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    assert summary["results"]["best_program_id"] == report.best.program_id
    assert summary["counters"]["candidates.generated"] == 40
    for candidates in (16, 32, 40):
        assert checkpoint_path(tmp_path, candidates).exists()


def test_checkpoint_holds_the_database(tmp_path, spec, cfg):
    report = run(spec, cfg, out_dir=tmp_path)
    db = IslandDatabase.restore(checkpoint_path(tmp_path, 40))
    assert db.config_hash == cfg.config_hash
    assert db.best().score == report.best.score
    assert db.run_state["generated"] == 40


def test_resume_matches_uninterrupted_run(tmp_path, spec, cfg):
    """Stopping at 20 candidates and resuming gives the same 40-candidate run."""
    full = run(spec, cfg)
    run(spec, replace(cfg, max_candidates=20), out_dir=tmp_path / "first")
    resumed = run(
        spec,
        cfg,
        out_dir=tmp_path / "second",
        resume_from=checkpoint_path(tmp_path / "first", 20),
    )
    assert resumed == full


def test_resume_rejects_other_configuration(tmp_path, spec, cfg):
    run(spec, replace(cfg, max_candidates=8), out_dir=tmp_path)
    with pytest.raises(ConfigError, match="different configuration"):
        run(spec, replace(cfg, seed=2), resume_from=checkpoint_path(tmp_path, 8))


def _remote(handler, cfg):
    remote_cfg = replace(cfg, generator="remote", endpoint="http://generator.test/complete")
    params = GeneratorParams.from_config(remote_cfg, environ={})
    client = CompletionClient(params, transport=httpx.MockTransport(handler), wait=wait_none())
    return remote_cfg, client


def test_generator_failure_saves_state(tmp_path, spec, cfg):
    remote_cfg, client = _remote(lambda request: httpx.Response(503, text="busy"), cfg)
    with pytest.raises(GeneratorError):
        run(spec, remote_cfg, out_dir=tmp_path, client=client)
    client.close()
    db = IslandDatabase.restore(checkpoint_path(tmp_path, 0))
    assert db.run_state["generated"] == 0


def test_unextractable_replies_are_parse_errors(spec, cfg):
    def handler(request):
        return httpx.Response(200, json={"choices": [{"text": "No idea, sorry."}]})

    remote_cfg, client = _remote(handler, replace(cfg, max_candidates=8))
    reporter = Reporter()
    report = run(spec, remote_cfg, reporter=reporter, client=client)
    client.close()
    assert report.candidates_generated == 8
    assert report.candidates_valid == 0
    assert report.rejections["parse_error"] == 8
    assert reporter.counters["generator.extraction_failures"] == 8


def test_remote_candidates_are_scored(spec, cfg):
    def handler(request):
        assert "def policy_v2(obs: np.ndarray) -> float:" in json.loads(request.content)["prompt"]
        return httpx.Response(200, json={"choices": [{"text": "    return sign(obs[2])\n"}]})

    remote_cfg, client = _remote(handler, replace(cfg, max_candidates=4))
    report = run(spec, remote_cfg, client=client)
    client.close()
    assert report.candidates_valid == 4


def test_replay_reproduces_the_stored_score(tmp_path, spec, cfg):
    report = run(spec, cfg, out_dir=tmp_path)
    result = replay(checkpoint_path(tmp_path, 40))
    assert result.valid
    assert result.return_R == report.best.score
    assert len(result.trajectory) == HORIZON

    by_id = replay(checkpoint_path(tmp_path, 40), report.best.program_id, record=False)
    assert by_id.return_R == report.best.score
    assert by_id.trajectory is None


def test_replay_accepts_a_restored_database(tmp_path, spec, cfg):
    run(spec, cfg, out_dir=tmp_path)
    db = IslandDatabase.restore(checkpoint_path(tmp_path, 40))
    from_db = replay(db)
    assert from_db.return_R == replay(checkpoint_path(tmp_path, 40)).return_R
    assert from_db.return_R == select_program(db).score


def test_replay_unknown_program(tmp_path, spec, cfg):
    run(spec, replace(cfg, max_candidates=4), out_dir=tmp_path)
    with pytest.raises(ProgramNotFoundError, match="no program with id 'feedfacecafe'"):
        replay(checkpoint_path(tmp_path, 4), "feedfacecafe")


def test_select_program_on_empty_database():
    with pytest.raises(ProgramNotFoundError, match="holds no programs"):
        select_program(IslandDatabase(islands=2))
