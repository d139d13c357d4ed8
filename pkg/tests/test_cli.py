from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest

from sbc_opinion.cli import main


def write_cfg(path, **extra):
    doc = {"model": {"influence": {"family": "power_law", "scale": 1.0, "exponent": 0.5},
                     "noise": {"family": "uniform", "half_width": 0.5},
                     "horizon": 50},
           "query": {"t": [16, 64], "c": 1.0, "beta": 0.125, "regime": "bounded"},
           "run": {"n_replicates": 3, "master_seed": 11}}
    for section, values in extra.items():
        doc.setdefault(section, {}).update(values)
    path.write_text(json.dumps(doc))
    return str(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_simulate_writes_trajectories_and_replays(tmp_path, monkeypatch):
    monkeypatch.delenv("SBC_SEED", raising=False)
    cfg = write_cfg(tmp_path / "cfg.json")
    out = tmp_path / "run1"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    files = sorted(p.name for p in out.iterdir())
    assert files == ["resolved_config.json", "trajectory_00000.csv",
                     "trajectory_00001.csv", "trajectory_00002.csv"]
    rows = read_csv(out / "trajectory_00001.csv")
    assert len(rows) == 51 and rows[0] == {"t": "0", "value": "0.0"}
    out2 = tmp_path / "run2"
    assert main(["simulate", "--config", str(out / "resolved_config.json"),
                 "--out", str(out2)]) == 0
    for name in files[1:]:
        assert (out / name).read_text() == (out2 / name).read_text()


def test_env_seed_changes_trajectories(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path / "cfg.json")
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--reps", "1"])
    monkeypatch.setenv("SBC_SEED", "99")
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--reps", "1"])
    side = json.loads((tmp_path / "b" / "resolved_config.json").read_text())
    assert side["run"]["master_seed"] == 99
    assert ((tmp_path / "a" / "trajectory_00000.csv").read_text()
            != (tmp_path / "b" / "trajectory_00000.csv").read_text())
    # an explicit flag wins over the environment
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "c"), "--reps", "1",
          "--seed", "11"])
    assert ((tmp_path / "a" / "trajectory_00000.csv").read_text()
            == (tmp_path / "c" / "trajectory_00000.csv").read_text())


def test_simulate_graph(tmp_path):
    p = tmp_path / "g.json"
    p.write_text(json.dumps({"model": {
        "influence": {"family": "constant", "value": 1.0},
        "noise": {"family": "uniform", "half_width": 0.1},
        "graph": {"edges": [[0, 1], [1, 2]], "n_vertices": 3},
        "initial": [0, 1, 2], "horizon": 4}}))
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 0
    rows = read_csv(tmp_path / "o" / "opinions_00000.csv")
    assert len(rows) == 15 and list(rows[0]) == ["t", "agent_id", "value"]


def test_missing_required_key_exits_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"model": {"influence": {"family": "constant", "value": 1}}}))
    assert main(["simulate", "--config", str(p)]) == 2
    assert "'noise' is a required property" in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == 2


def test_bound_sweep_values(capsys):
    assert main(["bound", "--regime", "bounded", "--delta", "0.5", "--beta", "0.125",
                 "--t-grid", "1e2:1e40:log10"]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert len(rows) == 39
    row = next(r for r in rows if float(r["t"]) == 1e10)
    assert math.exp(float(row["log_bound"])) == pytest.approx(7.6e-3, rel=0.2)
    assert row["vacuous"] == "false"


def test_bound_single_point_grid(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bound", "--regime", "bounded", "--delta", "0.5", "--beta", "0.125",
                 "--t-grid", "1", "--out", str(out)]) == 0
    assert len(read_csv(out)) == 1


def test_bound_regime_violation_exits_3(capsys):
    assert main(["bound", "--regime", "bounded", "--delta", "0.5", "--beta", "0.3",
                 "--t-grid", "1e2:1e4:log10"]) == 3
    assert "β < δ/2" in capsys.readouterr().err


def test_bound_missing_argument_exits_2():
    assert main(["bound", "--regime", "subgauss", "--delta", "1", "--beta", "0.2",
                 "--t-grid", "100"]) == 2


def test_compare_writes_rows(tmp_path, monkeypatch):
    monkeypatch.delenv("SBC_SEED", raising=False)
    cfg = write_cfg(tmp_path / "cfg.json", run={"n_replicates": 2000})
    out = tmp_path / "cmp"
    assert main(["compare", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out / "compare.csv")
    assert [r["t"] for r in rows] == ["16", "64"]
    for r in rows:
        assert float(r["p_hat"]) <= float(r["walk_p_hat"])
        assert r["violation"] == "false" and r["master_seed"] == "11"
    assert (out / "resolved_config.json").exists()


def test_compare_empty_grid_writes_header(tmp_path):
    cfg = write_cfg(tmp_path / "cfg.json")
    out = tmp_path / "cmp"
    assert main(["compare", "--config", cfg, "--out", str(out), "--t-grid", ""]) == 0
    lines = (out / "compare.csv").read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith("t,k,")


def test_compare_budget_exits_4(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "cfg.json", run={"n_replicates": 1000})
    assert main(["compare", "--config", cfg, "--out", str(tmp_path / "x"),
                 "--budget", "20000"]) == 4
    assert "try t grid 16" in capsys.readouterr().err


def test_compare_regime_exits_3(tmp_path):
    cfg = write_cfg(tmp_path / "cfg.json", query={"beta": 0.4})
    assert main(["compare", "--config", cfg, "--out", str(tmp_path / "x")]) == 3


def test_verify_mgf_passes(capsys):
    assert main(["verify", "--check", "mgf", "--draws", "100000"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["status"] == "pass"
    fams = report["checks"][0]["families"]
    assert set(fams) == {"uniform", "gaussian", "truncated_gaussian", "rademacher"}


def test_verify_ordering_passes(capsys):
    assert main(["verify", "--check", "ordering", "--reps", "5000", "--t", "64"]) == 0
    assert json.loads(capsys.readouterr().out)["checks"][0]["master_seed"] == 1001


def test_verify_cond_mgf_inconclusive_exits_5(capsys, monkeypatch):
    monkeypatch.delenv("SBC_SEED", raising=False)
    assert main(["verify", "--check", "cond-mgf", "--reps", "50"]) == 5
    report = json.loads(capsys.readouterr().out)
    assert report["status"] == "inconclusive"


def test_preset_unknown_exits_2(capsys):
    assert main(["preset", "no-such-preset"]) == 2
    assert "bounded-noise-regime" in capsys.readouterr().err


def test_preset_linear_special_case_contracts(tmp_path, capsys):
    assert main(["preset", "linear-special-case", "--root", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "linear-special-case" / "summary.json").read_text())
    assert summary["final_spread"] < 0.1 * summary["initial_spread"]
    rows = read_csv(tmp_path / "linear-special-case" / "opinions.csv")
    assert len(rows) == 16 * 401


def test_preset_unstable_grows(tmp_path):
    assert main(["preset", "unstable-demo", "--root", str(tmp_path), "--reps", "400"]) == 0
    summary = json.loads((tmp_path / "unstable-demo" / "summary.json").read_text())
    assert summary["growing"]
    m = np.array(summary["mean_abs_y"])
    assert m[-1] > 1.1 * m[0]


def test_preset_bounded_regime(tmp_path):
    assert main(["preset", "bounded-noise-regime", "--root", str(tmp_path),
                 "--reps", "2000"]) == 0
    d = tmp_path / "bounded-noise-regime"
    summary = json.loads((d / "summary.json").read_text())
    assert summary["violations"] == 0 and summary["below_walk"]
    assert summary["first_informative_t"] == pytest.approx(1e9)
    assert len(read_csv(d / "bounds.csv")) == 39
