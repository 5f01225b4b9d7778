import subprocess
import sys

import numpy as np
import pytest

from diffgrn import cli, data
from diffgrn import genome as gio

from test_harness import write_setup


def run(*args):
    return subprocess.run([sys.executable, "-m", "diffgrn", *args], capture_output=True, text=True)


def test_gradcheck_passes_and_is_reproducible(capsys):
    assert cli.main(["gradcheck", "--seed", "1", "--n-proteins", "5", "--steps", "3", "--trials", "50"]) == 0
    first = capsys.readouterr().out
    assert cli.main(["gradcheck", "--seed", "1", "--n-proteins", "5", "--steps", "3", "--trials", "50"]) == 0
    assert capsys.readouterr().out == first
    assert "max_rel_error" in first and "skipped" in first


def test_gradcheck_failure_exit_code(monkeypatch, capsys):
    monkeypatch.setattr(cli, "GRADCHECK_TOL", -1.0)
    assert cli.main(["gradcheck", "--trials", "1"]) == 1


def test_bad_epsilon_is_usage_error():
    r = run("gradcheck", "--epsilon", "0")
    assert r.returncode == 2 and "usage" in r.stderr


def test_missing_config_flag():
    r = run("evolve")
    assert r.returncode == 2 and "usage" in r.stderr
    assert run().returncode == 2


def test_config_error_names_key(tmp_path):
    (tmp_path / "c.cfg").write_text("arms = 0\n")
    r = run("evolve", "--config", str(tmp_path / "c.cfg"))
    assert r.returncode == 2 and "dataset" in r.stderr


def test_evolve_writes_outputs_and_progress(tmp_path):
    cfg = write_setup(tmp_path)
    r = run("evolve", "--config", str(cfg))
    assert r.returncode == 0, r.stderr
    assert "gen 1 best_pre" in r.stderr and "gen 2 best_pre" in r.stderr
    assert (tmp_path / "out" / "manifest.txt").is_file()
    assert (tmp_path / "out" / "arm0" / "trial0" / "evolution.csv").is_file()
    assert not (tmp_path / "out" / "post_train.csv").exists()


def test_experiment_runs_everything(tmp_path):
    cfg = write_setup(tmp_path)
    assert cli.main(["experiment", "--config", str(cfg)]) == 0
    for name in ("post_train.csv", "baseline.csv", "aggregate_arm0.csv", "evolution_all.csv"):
        assert (tmp_path / "out" / name).is_file()


@pytest.fixture
def genome_and_data(tmp_path):
    rng = np.random.default_rng(0)
    g = gio.Genome.random(3, 1, 4, rng)
    gpath = tmp_path / "g.grn"
    gio.save(g, gpath)
    data.write_csv(tmp_path / "d.csv", data.synthetic_mean(30, 3))
    return g, gpath, tmp_path / "d.csv"


def test_train_and_eval(genome_and_data, capsys):
    g, gpath, dpath = genome_and_data
    assert cli.main(["eval", "--genome", str(gpath), "--data", str(dpath)]) == 0
    a = capsys.readouterr().out
    assert cli.main(["eval", "--genome", str(gpath), "--data", str(dpath)]) == 0
    assert capsys.readouterr().out == a
    assert cli.main(["train", "--genome", str(gpath), "--data", str(dpath), "--epochs", "2", "--seed", "1"]) == 0
    mse = float(capsys.readouterr().out)
    trained = gio.load(gpath.with_name("g.grn.trained"))
    assert trained != g
    assert mse >= 0


def test_train_zero_epochs_copies_genome(genome_and_data, capsys):
    g, gpath, dpath = genome_and_data
    assert cli.main(["train", "--genome", str(gpath), "--data", str(dpath), "--epochs", "0"]) == 0
    assert gio.load(gpath.with_name("g.grn.trained")) == g
    assert gpath.with_name("g.grn.trained").read_text() == gpath.read_text()


def test_corrupt_genome_reports_line(genome_and_data):
    _, gpath, dpath = genome_and_data
    lines = gpath.read_text().splitlines()
    lines[3] = "input nope 0.1 0.2"
    gpath.write_text("\n".join(lines) + "\n")
    r = run("eval", "--genome", str(gpath), "--data", str(dpath))
    assert r.returncode == 2 and "line 4" in r.stderr
