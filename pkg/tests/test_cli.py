import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curriculum_lab.cli import EXIT_CONFIG, EXIT_OK, main
from curriculum_lab.compare import aggregate, bootstrap_ci, common_grid, read_curve
from curriculum_lab.config import ConfigError, ExperimentConfig, make_curriculum, make_env
from curriculum_lab.core import DualCurriculumWrapper
from curriculum_lab.curricula import OMNI, PrioritizedLevelReplay, Sequential
from curriculum_lab.training import run_training

GRID = {"type": "grid", "max_steps": 16}


def write_config(path, **overrides):
    doc = {"env": GRID, "curriculum": {"type": "plr"}, "total_episodes": 30, "seeds": [0]}
    doc.update(overrides)
    path.write_text(json.dumps(doc))
    return path


# config -------------------------------------------------------------------------


def test_defaults_match_hyperparameter_table():
    cfg = ExperimentConfig.from_dict({"env": GRID, "curriculum": {"type": "plr"}})
    assert (cfg.learner.gamma, cfg.learner.lam) == (0.99, 0.95)
    assert cfg.learner.eval_episodes_per_task == 4
    assert cfg.learner.checkpoint_interval == 800
    assert (cfg.sync.step_batch_size, cfg.sync.prefetch, cfg.sync.delay) == (64, 1, 0)
    plr = make_curriculum(cfg.curriculum, make_env(GRID).task_space)
    assert (plr.config.temperature, plr.config.staleness_coef) == (0.1, 0.1)


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from(["dr", "plr", "lp", "sfl"]),
    st.integers(1, 16),
    st.integers(1, 10**6),
    st.lists(st.integers(0, 2**32), min_size=1, max_size=4),
    st.integers(0, 64),
    st.floats(0.01, 1.0),
    st.booleans(),
)
def test_config_roundtrip(kind, workers, episodes, seeds, delay, gamma, greedy):
    cfg = ExperimentConfig.from_dict(
        {
            "env": {"type": "simon_says", "hazard": 0.0},
            "curriculum": {"type": kind},
            "learner": {"gamma": gamma, "eval_greedy": greedy},
            "workers": workers,
            "total_episodes": episodes,
            "seeds": seeds,
            "sync": {"delay": delay, "mode": "threaded"},
        }
    )
    assert ExperimentConfig.parse(cfg.render()) == cfg


@pytest.mark.parametrize(
    "doc",
    [
        {"curriculum": {"type": "plr"}},
        {"env": {"type": "maze"}, "curriculum": {"type": "plr"}},
        {"env": GRID, "curriculum": {"type": "plr"}, "workers": 0},
        {"env": GRID, "curriculum": {"type": "plr"}, "sync": {"delay": -1}},
        {"env": GRID, "curriculum": {"type": "plr"}, "learner": {"gamma": 0}},
        {"env": GRID, "curriculum": {"type": "plr"}, "colour": "blue"},
    ],
)
def test_schema_errors(doc):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(doc)


def test_bad_curriculum_parameters_are_config_errors():
    space = make_env(GRID).task_space
    with pytest.raises(ConfigError):
        make_curriculum({"type": "plr", "temperature": -1}, space)
    with pytest.raises(ConfigError):
        make_curriculum({"type": "lp", "speed": 3}, space)
    with pytest.raises(ConfigError):
        make_env({"type": "grid", "walls": 3})


def test_curriculum_factory_types():
    space = make_env(GRID).task_space
    assert isinstance(make_curriculum({"type": "plr", "robust": True}, space), PrioritizedLevelReplay)
    assert isinstance(make_curriculum({"type": "omni"}, space), OMNI)
    seq = make_curriculum({"type": "sequential", "stages": [3, {"type": "dr"}], "conditions": ["episodes>=2"]}, space)
    assert isinstance(seq, Sequential) and seq.sample(2) == [3, 3]
    assert isinstance(make_curriculum({"type": "pfsp"}, make_env({"type": "duel"}).task_space), DualCurriculumWrapper)


def test_overrides_reach_nested_fields():
    cfg = ExperimentConfig.from_dict({"env": GRID, "curriculum": {"type": "plr"}})
    cfg = cfg.with_overrides(sync_delay=4, workers=3, seeds=None)
    assert cfg.sync.delay == 4 and cfg.workers == 3 and cfg.seeds == [0]


# cli ------------------------------------------------------------------------------


def test_config_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"env": {"type": "maze"}, "curriculum": {"type": "plr"}}))
    assert main(["train", str(bad)]) == EXIT_CONFIG
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert main(["train", str(broken)]) == EXIT_CONFIG
    assert main(["train", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_train_writes_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", learner={"eval_period": 10, "eval_episodes_per_task": 1})
    out = tmp_path / "run"
    assert main(["train", str(cfg), "--output-dir", str(out)]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["curriculum"] == "plr" and summary["conservation"]["ok"]
    assert set(summary) >= {"final_mean_return", "final_success_rate", "curriculum"}
    with open(out / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 30
    assert list(rows[0]) == ["step", "episode", "task", "return", "length", "curriculum_entropy"]
    evals = json.loads((out / "evaluations.json").read_text())
    assert [e["episode"] for e in evals] == [10, 20, 30]
    assert all(len(e["success_rates"]) == 200 and abs(sum(e["distribution"]) - 1) < 1e-9 for e in evals)
    assert json.loads((out / "summary.json").read_text())["curriculum"] == "plr"


def test_multiple_seeds_get_subdirectories(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", seeds=[1, 2], total_episodes=5)
    out = tmp_path / "runs"
    assert main(["train", str(cfg), "--output-dir", str(out)]) == EXIT_OK
    assert (out / "seed1" / "metrics.csv").exists() and (out / "seed2" / "metrics.csv").exists()


def test_env_seed_override(tmp_path, capsys, monkeypatch):
    cfg = write_config(tmp_path / "c.json", total_episodes=5)
    monkeypatch.setenv("CURRICULA_SEED", "7")
    assert main(["train", str(cfg)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out.strip())["seed"] == 7
    monkeypatch.setenv("CURRICULA_SEED", "seven")
    assert main(["train", str(cfg)]) == EXIT_CONFIG


def test_eval_from_checkpoint(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", total_episodes=5, learner={"eval_episodes_per_task": 1})
    out = tmp_path / "run"
    assert main(["train", str(cfg), "--output-dir", str(out)]) == EXIT_OK
    capsys.readouterr()
    assert main(["eval", str(out), str(cfg), "--render", "text", "--task", "4"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("seed=4 step=0")
    result = json.loads(lines[-1])
    assert len(result["success_rates"]) == 200
    assert main(["eval", str(tmp_path / "nowhere"), str(cfg)]) == EXIT_CONFIG


def test_bench_command(capsys):
    assert main(["bench", "--workers", "2", "--episodes", "5", "--repeats", "1", "--json"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert report["conservation_ok"] and report["workers"] == 2


def test_threaded_training_conserves(tmp_path):
    cfg = ExperimentConfig.from_dict(
        {"env": GRID, "curriculum": {"type": "plr"}, "workers": 4, "total_episodes": 40, "sync": {"mode": "threaded"}}
    )
    result = run_training(cfg)
    assert result.conservation["ok"] and len(result.rows) == 40


def test_direct_mode_is_bit_identical(tmp_path):
    cfg = ExperimentConfig.from_dict(
        {"env": {"type": "simon_says"}, "curriculum": {"type": "plr"}, "workers": 2, "total_episodes": 6}
    )
    a = run_training(cfg, seed=3).metrics_csv()
    b = run_training(cfg, seed=3).metrics_csv()
    c = run_training(cfg, seed=4).metrics_csv()
    assert a == b and a != c


# compare --------------------------------------------------------------------------


def write_metrics(run_dir, steps, returns):
    run_dir.mkdir(parents=True)
    lines = ["step,episode,task,return,length,curriculum_entropy"]
    lines += [f"{s},{i + 1},0,{r!r},1,0.0" for i, (s, r) in enumerate(zip(steps, returns))]
    (run_dir / "metrics.csv").write_text("\n".join(lines) + "\n")


def test_identical_runs_have_zero_width(tmp_path):
    for name in ("a", "b"):
        write_metrics(tmp_path / name, [1, 2, 3, 4], [0.0, 0.5, 0.25, 1.0])
    table = aggregate([read_curve(tmp_path / n) for n in ("a", "b")])
    assert np.array_equal(table["ci_low"], table["ci_high"])
    assert np.array_equal(table["mean"], [0.0, 0.5, 0.25, 1.0])


def test_mismatched_grids_interpolate_to_coarser(tmp_path):
    write_metrics(tmp_path / "fine", [0, 1, 2, 3, 4], [0.0, 1.0, 2.0, 3.0, 4.0])
    write_metrics(tmp_path / "coarse", [0, 2, 4], [10.0, 20.0, 40.0])
    table = aggregate([read_curve(tmp_path / "fine"), read_curve(tmp_path / "coarse")])
    # on the coarse grid: fine gives 0, 2, 4 and coarse gives 10, 20, 40
    assert table["step"].tolist() == [0, 2, 4]
    assert table["mean"].tolist() == [5.0, 11.0, 22.0]
    # interpolation of the fine run onto an off-grid coarse step
    write_metrics(tmp_path / "odd", [0.5, 2.5, 3.5], [0.0, 0.0, 0.0])
    grid = common_grid([np.array([0, 1, 2, 3, 4.0]), np.array([0.5, 2.5, 3.5])])
    assert grid.tolist() == [0.5, 2.5, 3.5]
    table = aggregate([read_curve(tmp_path / "fine"), read_curve(tmp_path / "odd")])
    assert table["mean"].tolist() == [0.25, 1.25, 1.75]


def test_single_run_has_mean_only(tmp_path, capsys):
    write_metrics(tmp_path / "solo", [1, 2], [0.5, 0.7])
    assert main(["compare", str(tmp_path / "solo")]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "step,mean"
    assert out[1:] == ["1.0,0.5", "2.0,0.7"]


def test_compare_writes_csv(tmp_path, capsys):
    write_metrics(tmp_path / "a", [1, 2], [0.0, 1.0])
    write_metrics(tmp_path / "b", [1, 2], [1.0, 0.0])
    out = tmp_path / "agg.csv"
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "b"), "--out", str(out)]) == EXIT_OK
    assert out.read_text().splitlines()[0] == "step,mean,ci_low,ci_high"


def test_bootstrap_ci_brackets_mean():
    rng = np.random.default_rng(0)
    samples = rng.normal(size=(20, 3))
    lo, hi = bootstrap_ci(samples, np.random.default_rng(1))
    mean = samples.mean(axis=0)
    assert np.all(lo <= mean) and np.all(mean <= hi)
