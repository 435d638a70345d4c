import csv
import json
import subprocess
import sys

import pytest

from knnrecovery.cli import main
from knnrecovery.sampler import Instance


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr()


def test_generate_and_recover(tmp_path, capsys):
    inst_path = tmp_path / "inst.json"
    code, _ = run(["generate", "--n", "9", "--k", "2", "--family", "gaussian", "--p", "10", "--q", "0",
                   "--seed", "4", "--out", str(inst_path)], capsys)
    assert code == 0
    inst = Instance.load(inst_path)
    assert inst.n == 9 and inst.k == 2
    for estimator in ("mle", "spectral", "threshold"):
        out = tmp_path / f"{estimator}.json"
        code, _ = run(["recover", "--instance", str(inst_path), "--estimator", estimator, "--out", str(out)], capsys)
        assert code == 0
        result = json.loads(out.read_text())
        assert {"estimator", "status", "hamming_distance_to_truth", "exact_match", "wall_time_ms"} <= set(result)
        assert result["estimator"] == estimator
    assert json.loads((tmp_path / "mle.json").read_text())["exact_match"] is True


def test_generate_is_deterministic(tmp_path, capsys):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        run(["generate", "--n", "30", "--k", "2", "--family", "poisson", "--p", "4", "--q", "1",
             "--seed", "8", "--out", str(p)], capsys)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_greedy_via_cli_reports_failure_fields(tmp_path, capsys):
    inst_path = tmp_path / "sw.json"
    run(["generate", "--n", "40", "--k", "2", "--family", "smallworld", "--epsilon", "0.0",
         "--seed", "1", "--out", str(inst_path)], capsys)
    code, cap = run(["recover", "--instance", str(inst_path), "--estimator", "greedy", "--start", "5"], capsys)
    assert code == 0
    result = json.loads(cap.out)
    assert result["exact_match"] is True and result["hamming_distance_to_truth"] == 0

    run(["generate", "--n", "40", "--k", "2", "--family", "smallworld", "--epsilon", "0.9",
         "--seed", "1", "--out", str(inst_path)], capsys)
    _, cap = run(["recover", "--instance", str(inst_path), "--estimator", "greedy"], capsys)
    result = json.loads(cap.out)
    assert result["status"] == "greedy_error"
    assert result["error_step"] in (1, 2) and result["error_reason"]
    assert result["hamming_distance_to_truth"] == 80


def test_divergence(capsys):
    code, cap = run(["divergence", "--n", "1000", "--k", "2", "--family", "gaussian", "--p", "4", "--q", "0"], capsys)
    assert code == 0
    d = json.loads(cap.out)
    assert d["alpha"] == pytest.approx(4.0)
    assert d["exact_ratio"] == pytest.approx(1.1581, abs=1e-4)
    code, cap = run(["divergence", "--n", "30", "--k", "4", "--family", "smallworld", "--epsilon", "0.27619"], capsys)
    assert code == 0 and json.loads(cap.out)["model"]["family"] == "bernoulli"


def test_enumerate(tmp_path, capsys):
    out = tmp_path / "lemmas.json"
    code, _ = run(["enumerate", "--n", "8", "--k", "2", "--out", str(out)], capsys)
    assert code == 0
    report = json.loads(out.read_text())
    assert report["passed"] and report["num_graphs"] == 2520
    # balance holds for the plain cycle too, from a random x*
    code, _ = run(["enumerate", "--n", "8", "--k", "1", "--lemma", "balance", "--random-xstar", "--seed", "2"], capsys)
    assert code == 0


def test_experiment(tmp_path, capsys):
    cfg = {"n": 9, "k": 2, "family": "gaussian", "sweep": [0.0, 10.0], "trials": 3,
           "estimator": "mle", "master_seed": 5}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "summary.csv"
    records = tmp_path / "records.json"
    code, _ = run(["experiment", "--config", str(cfg_path), "--threads", "2", "--out", str(out),
                   "--records", str(records)], capsys)
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2 and rows[1]["exact_rate"] == "1.0"
    assert len(json.loads(records.read_text())) == 6


def test_experiment_output_dir_env(tmp_path, capsys, monkeypatch):
    cfg = {"n": 9, "k": 2, "family": "gaussian", "sweep": [10.0], "trials": 1, "estimator": "mle",
           "output": "nested/result.csv"}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    monkeypatch.setenv("KNNRECOVERY_OUTPUT_DIR", str(tmp_path / "outdir"))
    code, _ = run(["experiment", "--config", str(cfg_path)], capsys)
    assert code == 0
    assert (tmp_path / "outdir" / "nested" / "result.csv").exists()


def test_bad_input_exits_nonzero(tmp_path, capsys):
    code, cap = run(["divergence", "--n", "30", "--k", "2", "--family", "bernoulli", "--p", "0.1", "--q", "0.5"],
                    capsys)
    assert code == 2 and "error" in cap.err
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text(json.dumps({"n": 30, "k": 2, "family": "gaussian", "sweep": [1.0], "trials": 1,
                                    "estimator": "mle"}))
    assert main(["experiment", "--config", str(cfg_path)]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "knnrecovery", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
