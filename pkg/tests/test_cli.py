import csv
import json
import subprocess
import sys

import pytest

from pdm_rl.cli import envcheck_results, main


def write_config(path, **kw):
    cfg = dict(env="cartpole", hidden_sizes=[8, 8], iterations=6, seeds=[0, 1])
    cfg.update(kw)
    path.write_text(json.dumps(cfg))
    return str(path)


def test_envcheck_all_pass():
    results = envcheck_results()
    assert results and all(ok for _, ok, _ in results)


def test_envcheck_entry_point():
    out = subprocess.run([sys.executable, "-m", "pdm_rl.cli", "envcheck"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "FAIL" not in out.stdout and out.stdout.count("PASS") >= 8


def test_gradcheck_small(capsys):
    assert main(["gradcheck", "--trials", "5"]) == 0
    assert "worst relative error" in capsys.readouterr().out


def test_gradcheck_zero_trials_vacuous(capsys):
    assert main(["gradcheck", "--trials", "0"]) == 0
    assert "vacuous" in capsys.readouterr().out


def test_gradcheck_negative_trials():
    assert main(["gradcheck", "--trials", "-1"]) == 2


def test_gradcheck_impossible_tolerance_fails():
    assert main(["gradcheck", "--trials", "2", "--tolerance", "0"]) == 1


def test_usage_errors():
    assert main([]) == 2
    assert main(["frobnicate"]) == 2


def test_train_bad_config(tmp_path, capsys):
    assert main(["train", "--config", write_config(tmp_path / "c.json", alpha=-1), "--out", str(tmp_path)]) == 2
    assert "alpha" in capsys.readouterr().err
    assert main(["train", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2


def test_train_sweep_report(tmp_path):
    base = tmp_path / "bp"
    local = tmp_path / "lg"
    assert main(["train", "--config", write_config(tmp_path / "a.json"), "--out", str(base)]) == 0
    assert main(["train", "--config", write_config(tmp_path / "b.json", mode="local_g"), "--out", str(local),
                 "--seed", "4"]) == 0
    assert sorted(p.name for p in local.glob("seed_*.jsonl")) == ["seed_4.jsonl"]
    assert (base / "summary.csv").exists()

    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"mode": ["local_u", "frozen_random"]}))
    sweep = tmp_path / "sweep"
    assert main(["sweep", "--config", write_config(tmp_path / "s.json", iterations=3, seeds=[0]),
                 "--grid", str(grid), "--out", str(sweep)]) == 0
    assert sorted(p.name for p in sweep.iterdir()) == ["mode=frozen_random", "mode=local_u"]

    rep = tmp_path / "report"
    assert main(["report", "--runs", str(local), str(sweep / "mode=local_u"), "--baseline", str(base),
                 "--out", str(rep)]) == 0
    for name in ("summary.csv", "profile.csv", "profile.svg", "curves_cartpole.csv", "curves_cartpole.svg"):
        assert (rep / name).stat().st_size > 0
    rows = list(csv.DictReader(open(rep / "summary.csv")))
    assert {r["mode"] for r in rows} == {"bp_full", "local_g", "local_u"}
    assert all(r["score_x"].endswith("x") for r in rows)


def test_report_missing_runs(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert main(["report", "--runs", str(tmp_path / "empty"), "--baseline", str(tmp_path / "nope"),
                 "--out", str(tmp_path / "r")]) == 1
    err = capsys.readouterr().err
    assert "empty" in err and "nope" in err


def test_sweep_bad_grid(tmp_path):
    grid = tmp_path / "g.json"
    grid.write_text(json.dumps({"mode": "local_u"}))
    assert main(["sweep", "--config", write_config(tmp_path / "c.json"), "--grid", str(grid),
                 "--out", str(tmp_path / "o")]) == 2


@pytest.mark.parametrize("cmd", ["train", "sweep", "report", "gradcheck", "envcheck"])
def test_help(cmd, capsys):
    assert main([cmd, "--help"]) == 0
