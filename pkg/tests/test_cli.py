import json

import pytest

from tcfg.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main

SMALL = """\
dataset.n_samples = 400
training.iterations = 30
training.batch_size = 32
sampling.n_samples = 12
analysis.ambient_dim = 4
analysis.points_per_arc = 200
analysis.n_samples = 50
analysis.timesteps = 1,10
analysis.trajectory_samples = 6
analysis.trajectory_points_per_arc = 100
eval.seeds = 0,1
eval.n_samples = 10
eval.bench_samples = 8
eval.bench_repeats = 1
"""

EXPECTED = {
    "gen-data": ["config.txt", "data.csv", "data.svg"],
    "train": ["loss.csv", "loss.svg", "model.json"],
    "sample": ["samples.csv", "samples.svg"],
    "analyze-spectrum": ["spectrum.csv", "spectrum.json", "spectrum.svg"],
    "analyze-alignment": ["alignment.csv", "alignment.json", "alignment.svg", "alignment_greedy.svg"],
    "analyze-trajectory": ["ratio.svg", "trajectories.json", "trajectories.svg", "trajectory.csv", "trajectory.json"],
    "evaluate": ["eval.csv", "eval.json", "eval_samples.svg", "ordering.json"],
    "bench": ["bench.json"],
}


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.txt"
    path.write_text(SMALL)
    return path


def run(cmd, config, out, *extra):
    return main([cmd, "--config", str(config), "--out", str(out), "--no-timestamp", *extra])


@pytest.mark.parametrize("cmd", sorted(EXPECTED))
def test_subcommand_outputs(cmd, small_config, tmp_path, capsys):
    assert run(cmd, small_config, tmp_path / "runs") == EXIT_OK
    run_dir = tmp_path / "runs" / cmd
    assert capsys.readouterr().out.strip() == str(run_dir)
    present = {p.name for p in run_dir.iterdir()}
    assert set(EXPECTED[cmd]) <= present


def test_sample_from_checkpoint_with_trajectories(small_config, tmp_path):
    assert run("train", small_config, tmp_path) == EXIT_OK
    ckpt = tmp_path / "train" / "model.json"
    rc = run("sample", small_config, tmp_path / "s", "--checkpoint", str(ckpt), "--record-trajectories",
             "--mode", "cfg", "--steps", "100")
    assert rc == EXIT_OK
    blob = json.loads((tmp_path / "s" / "sample" / "trajectories.json").read_text())
    assert len(blob["trajectories"]) == 12
    rows = (tmp_path / "s" / "sample" / "samples.csv").read_text().splitlines()
    assert rows[0] == "x0,x1,label,mode,seed" and len(rows) == 13
    assert all(r.endswith(",0,cfg,0") for r in rows[1:])


def test_reruns_are_bitwise_identical(small_config, tmp_path):
    for out in ("a", "b"):
        assert run("sample", small_config, tmp_path / out, "--oracle", "--record-trajectories") == EXIT_OK
    for name in ("samples.csv", "trajectories.json", "samples.svg"):
        a = (tmp_path / "a" / "sample" / name).read_bytes()
        b = (tmp_path / "b" / "sample" / name).read_bytes()
        assert a == b, name


def test_seed_changes_samples(small_config, tmp_path):
    run("sample", small_config, tmp_path / "a", "--oracle", "--seed", "1")
    run("sample", small_config, tmp_path / "b", "--oracle", "--seed", "2")
    assert (tmp_path / "a" / "sample" / "samples.csv").read_bytes() != \
        (tmp_path / "b" / "sample" / "samples.csv").read_bytes()


def test_config_errors(small_config, tmp_path, capsys):
    assert main(["sample", "--config", str(tmp_path / "nope.txt")]) == EXIT_CONFIG
    assert "not found" in capsys.readouterr().err
    bad = tmp_path / "bad.txt"
    bad.write_text("guidance.strength = 3\n")
    assert main(["sample", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "guidance.strength" in capsys.readouterr().err
    assert main(["sample", "--mode", "loud"]) == EXIT_CONFIG
    assert main(["frobnicate"]) == EXIT_CONFIG
    assert main([]) == EXIT_CONFIG


def test_runtime_error(small_config, tmp_path):
    rc = run("sample", small_config, tmp_path, "--checkpoint", str(tmp_path / "missing.json"))
    assert rc == EXIT_RUNTIME


def test_timestamped_dirs_do_not_collide(small_config, tmp_path, capsys):
    args = ["gen-data", "--config", str(small_config), "--out", str(tmp_path)]
    assert main(args) == EXIT_OK and main(args) == EXIT_OK
    dirs = capsys.readouterr().out.split()
    assert len(set(dirs)) == 2
