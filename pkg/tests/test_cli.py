import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from rrhmm.cli import main
from rrhmm.diagnostics import RECORD_FIELDS, SUMMARY_FIELDS
from rrhmm.inference import read_trace, seq_prob
from rrhmm.spectral import ObservableModel


def run(*argv):
    return main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_gen_learn_eval(tmp_path, capsys):
    data, model, report = tmp_path / "d.csv", tmp_path / "m.json", tmp_path / "e.csv"
    assert run("gen", "--model", "example1", "--n", 5000, "--seed", 1, "--out", data) == 0
    assert read_csv(data)[0] == ["x1", "x2", "x3"] and len(read_csv(data)) == 5001
    assert run("learn", "--data", data, "--k", 2, "--out", model) == 0
    assert run("eval", "--model", model, "--truth", "example1", "--out", report) == 0
    out = capsys.readouterr().out
    assert "L1 joint error" in out and "b_inf . b1" in out
    rows = read_csv(report)
    assert rows[0] == RECORD_FIELDS and len(rows) == 3
    assert all(r[0] == "eval" and r[1] == "5000" for r in rows[1:])


def test_population_learn_is_exact(tmp_path, capsys):
    model = tmp_path / "pop.json"
    assert run("learn", "--model", "example2", "--window", 2, "--k", 3, "--out", model) == 0
    assert run("eval", "--model", model, "--truth", "example2") == 0
    line = [l for l in capsys.readouterr().out.splitlines() if l.startswith("L1")][0]
    assert float(line.split(":")[1]) <= 1e-8
    assert json.loads(model.read_text())["sample_count"] is None


def test_estimate_then_learn(tmp_path):
    data, mom, model = tmp_path / "s.csv", tmp_path / "mom.json", tmp_path / "m.json"
    assert run("gen", "--model", "example3", "--length", 20000, "--out", data) == 0
    assert read_csv(data)[0] == ["x"]
    assert run("estimate", "--data", data, "--window", 2, "--out", mom) == 0
    assert run("learn", "--data", mom, "--k", 3, "--out", model) == 0
    assert ObservableModel.load(model).window == 2


def test_rank_too_large_exit_code(tmp_path):
    assert run("learn", "--model", "example1", "--k", 5, "--out", tmp_path / "m.json") == 2


def test_unknown_experiment_exit_code(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("experiment", "nope", "--model", "example1", "--out", tmp_path / "x")
    assert exc.value.code == 2


def test_missing_file_exit_code(tmp_path):
    assert run("learn", "--data", tmp_path / "missing.csv", "--out", tmp_path / "m.json") == 1


def test_zero_triples(tmp_path):
    data = tmp_path / "d.csv"
    assert run("gen", "--model", "example1", "--n", 0, "--out", data) == 0
    assert read_csv(data) == [["x1", "x2", "x3"]]


def test_gen_deterministic(tmp_path):
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    run("gen", "--model", "polygon", "--m", 10, "--n", 300, "--seed", 4, "--out", a)
    run("gen", "--model", "polygon", "--m", 10, "--n", 300, "--seed", 4, "--out", b)
    run("gen", "--model", "polygon", "--m", 10, "--n", 300, "--seed", 5, "--out", c)
    assert a.read_text() == b.read_text() != c.read_text()


def test_manifest_replay(tmp_path):
    data = tmp_path / "d.csv"
    run("gen", "--model", "example2", "--length", 400, "--seed", 9, "--out", data)
    manifest = json.loads((tmp_path / "d.csv.manifest.json").read_text())
    assert manifest["subcommand"] == "gen" and manifest["seed"] == 9
    assert manifest["outputs"] == [str(data)]
    original = data.read_text()
    data.unlink()
    assert run("replay", tmp_path / "d.csv.manifest.json") == 0
    assert data.read_text() == original


def test_filter_normalizers_telescope(tmp_path):
    model, seq, trace = tmp_path / "m.json", tmp_path / "s.csv", tmp_path / "t.csv"
    run("learn", "--model", "example1", "--k", 2, "--out", model)
    run("gen", "--model", "example1", "--length", 15, "--seed", 2, "--out", seq)
    assert run("filter", "--model", model, "--data", seq, "--out", trace) == 0
    rows = read_trace(trace)
    symbols = [r[1] for r in rows]
    learned = ObservableModel.load(model)
    assert np.prod([r[2] for r in rows]) == pytest.approx(seq_prob(learned, symbols).raw,
                                                          abs=1e-9)
    assert read_csv(trace)[0] == ["step", "symbol", "normalizer", "trust", "p0", "p1", "p2"]


def test_simulate(tmp_path):
    model, out = tmp_path / "m.json", tmp_path / "sim.csv"
    run("learn", "--model", "example1", "--k", 2, "--out", model)
    assert run("simulate", "--model", model, "--length", 100, "--seed", 1, "--out", out) == 0
    rows = read_csv(out)
    assert rows[0] == ["x"] and len(rows) == 101


def test_experiment_outputs(tmp_path):
    prefix = tmp_path / "exp"
    assert run("experiment", "eigen-recovery", "--model", "example1", "--ns", "1000,2000",
               "--trials", 2, "--out", prefix) == 0
    trials = read_csv(f"{prefix}.trials.csv")
    summary = read_csv(f"{prefix}.summary.csv")
    assert trials[0] == RECORD_FIELDS and len(trials) == 1 + 2 * 2 * 2
    assert summary[0] == SUMMARY_FIELDS and len(summary) == 1 + 2 * 2
    assert run("experiment", "l1-curve", "--model", "example1", "--ns", "1000",
               "--trials", 2, "--out", tmp_path / "l1") == 0
    assert (tmp_path / "l1.trials.csv.manifest.json").exists()


def test_kde_learn_and_filter(tmp_path):
    rng = np.random.default_rng(0)
    pts = tmp_path / "pts.csv"
    with open(pts, "w") as fh:
        fh.write("y\n")
        for v in rng.normal(size=2000):
            fh.write(f"{float(v)!r}\n")
    model, trace = tmp_path / "k.json", tmp_path / "t.csv"
    assert run("learn", "--data", pts, "--centers", 5, "--k", 2, "--out", model) == 0
    assert "kde" in json.loads(model.read_text())
    assert run("filter", "--model", model, "--data", pts, "--out", trace) == 0
    assert len(read_csv(trace)) == 2001
    assert run("simulate", "--model", model, "--length", 5, "--out", tmp_path / "x.csv") == 2


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "rrhmm.cli", "gen", "--model", "example1",
                          "--n", "10", "--out", str(tmp_path / "d.csv")],
                         capture_output=True, text=True)
    assert out.returncode == 0
    bad = subprocess.run([sys.executable, "-m", "rrhmm.cli", "learn", "--model", "example1",
                          "--k", "9", "--out", str(tmp_path / "m.json")],
                         capture_output=True, text=True)
    assert bad.returncode == 2 and "rrhmm learn" in bad.stderr


def test_learn_auto_rank(tmp_path):
    model = tmp_path / "m.json"
    assert run("learn", "--model", "example1", "--threshold", "1e-6", "--out", model) == 0
    assert ObservableModel.load(model).k == 2


def test_simulate_unigram_near_marginal(tmp_path):
    from rrhmm.hmm import example1
    model, out = tmp_path / "m.json", tmp_path / "sim.csv"
    run("learn", "--model", "example1", "--out", model)
    run("simulate", "--model", model, "--length", 500, "--seed", 0, "--out", out)
    symbols = np.array([int(r[0]) for r in read_csv(out)[1:]])
    freq = np.bincount(symbols, minlength=3) / symbols.size
    params = example1()
    # about four standard errors of a 500-draw multinomial
    assert np.abs(freq - params.O @ params.pi).sum() <= 0.15
