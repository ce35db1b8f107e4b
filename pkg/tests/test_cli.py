import json
import subprocess
import sys

import numpy as np
import pytest

from tokenbalance.cli import main
from tokenbalance.markov import tstep_column
from tokenbalance.topology import load_schedule

from conftest import sched


@pytest.fixture
def cycle_file(tmp_path):
    path = tmp_path / "cycle.json"
    assert main(["schedule", "--topology", "cycle", "--n", "16", "--out", str(path)]) == 0
    return path


def test_schedule_writes_valid_json(cycle_file, tmp_path):
    doc = json.loads(cycle_file.read_text())
    assert doc["n"] == 16 and doc["d"] == 2
    assert load_schedule(cycle_file).matchings == sched("cycle", 16).matchings
    out = tmp_path / "exp.json"
    assert main(["schedule", "--topology", "expander", "--n", "32", "--d", "4", "--seed", "3", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["d"] == 4


def test_schedule_invalid_topology_exits_2(tmp_path, capsys):
    assert main(["schedule", "--topology", "hypercube", "--n", "12", "--out", str(tmp_path / "x.json")]) == 2
    assert "power of two" in capsys.readouterr().err


def test_simulate_discrete(cycle_file, tmp_path):
    out = tmp_path / "sim.csv"
    rc = main(["simulate", "--schedule", str(cycle_file), "--input", "dist:uniform:8", "--rounds", "64",
               "--checkpoints", "0,4,64", "--seed", "2", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,discrepancy,max,min,total"
    rows = [list(map(float, ln.split(","))) for ln in lines[1:]]
    assert [r[0] for r in rows] == [0, 4, 64]
    assert len({r[4] for r in rows}) == 1
    assert all(r[1] == r[2] - r[3] for r in rows)


def test_simulate_worstcase_and_file_inputs(cycle_file, tmp_path):
    out = tmp_path / "w.csv"
    assert main(["simulate", "--schedule", str(cycle_file), "--input", "worstcase:5", "--rounds", "0",
                 "--out", str(out)]) == 0
    assert out.read_text().splitlines()[1] == "0,10,10,0,80"
    vec = tmp_path / "vec.csv"
    vec.write_text(",".join(["4"] * 16))
    assert main(["simulate", "--schedule", str(cycle_file), "--input", f"file:{vec}", "--rounds", "3",
                 "--mode", "continuous", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[-1].startswith("3,0.0,4.0,4.0")


def test_simulate_errors(cycle_file, tmp_path):
    out = str(tmp_path / "o.csv")
    assert main(["simulate", "--schedule", str(cycle_file), "--input", "bogus:1", "--rounds", "2", "--out", out]) == 2
    assert main(["simulate", "--schedule", str(tmp_path / "missing.json"), "--input", "dist:uniform:1",
                 "--rounds", "2", "--out", out]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 4, "d": 1, "matchings": [[[0, 1], [1, 2]]]}))
    assert main(["simulate", "--schedule", str(bad), "--input", "dist:uniform:1", "--rounds", "2", "--out", out]) == 2


def test_markov_column_and_lambda(tmp_path, capsys):
    path = tmp_path / "c8.json"
    main(["schedule", "--topology", "cycle", "--n", "8", "--out", str(path)])
    capsys.readouterr()
    assert main(["markov", "column", "--schedule", str(path), "--u", "2", "--t", "3"]) == 0
    col = [float(v) for v in capsys.readouterr().out.split()]
    assert np.array_equal(col, tstep_column(sched("cycle", 8), 2, 3))
    assert main(["markov", "lambda", "--schedule", str(path)]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(0.5, rel=1e-9)


def test_bounds_command(capsys):
    assert main(["bounds", "--name", "cycle_tail_bound", "--params", "delta=18,t=32"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["value"] == pytest.approx(0.7357588823) and doc["side"] == "upper"
    assert doc["inputs"] == {"delta": 18, "t": 32}
    assert main(["bounds", "--name", "worstcase_disc_lower", "--params", "kind=cycle,K=16777216,n=4096,t=1"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] > 0
    assert main(["bounds", "--name", "nope"]) == 2
    assert main(["bounds", "--name", "cycle_tail_bound", "--params", "delta=1,t=3"]) == 2
    assert main(["bounds", "--name", "cycle_tail_bound", "--params", "delta"]) == 2


def test_evolset_command(capsys, cycle_file):
    assert main(["evolset", "--chain", "lazy-cycle:4", "--x", "0", "--t", "2", "--trials", "20000", "--seed", "1"]) == 0
    lines = [json.loads(ln) for ln in capsys.readouterr().out.splitlines()]
    rows, summary = lines[:-1], lines[-1]
    assert len(rows) == 4
    assert rows[0]["exact"] == pytest.approx(0.375)
    assert all(r["bound_holds"] for r in rows)
    assert summary["pi_x"] == 0.25 and summary["absorbed_fraction"] == 1.0
    assert main(["evolset", "--chain", f"from-schedule:{cycle_file}", "--t", "1", "--trials", "1000"]) == 0
    assert main(["evolset", "--chain", "ring:4", "--t", "1"]) == 2


def test_experiment_config(tmp_path, capsys):
    cfg = {
        "topology": {"kind": "cycle", "n": 64},
        "input": {"kind": "worstcase", "K": 8},
        "checkpoints": [0, 1, 16],
        "repetitions": 3,
        "base_seed": 5,
        "bounds_overlay": [{"name": "worstcase_disc_lower", "params": {"kind": "cycle", "K": 8, "n": 64}}],
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "res"
    assert main(["experiment", "--config", str(path), "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == {"raw.csv", "raw_summary.csv", "result.json", "bounds.json"}
    assert json.loads((out / "bounds.json").read_text())[0]["all_hold"]
    assert "t=" in capsys.readouterr().out


def test_experiment_env_out_dir_and_threads(tmp_path, monkeypatch):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"topology": {"kind": "cycle", "n": 32}, "input": {"kind": "distribution",
                                "spec": "poisson:5"}, "checkpoints": [0, 8], "repetitions": 4}))
    monkeypatch.setenv("TOKENBALANCE_OUT_DIR", str(tmp_path / "envout"))
    monkeypatch.setenv("TOKENBALANCE_THREADS", "3")
    assert main(["experiment", "--config", str(path)]) == 0
    single = tmp_path / "single"
    assert main(["experiment", "--config", str(path), "--threads", "1", "--out", str(single)]) == 0
    assert (tmp_path / "envout" / "raw.csv").read_text() == (single / "raw.csv").read_text()


def test_experiment_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["experiment", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    bad.write_text(json.dumps({"topology": {"kind": "cycle", "n": 64}, "input": {"kind": "constant", "value": 1},
                               "checkpoints": [4, 2]}))
    assert main(["experiment", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["experiment", "--config", str(tmp_path / "absent.json")]) == 3
    assert main(["experiment", "--preset", "nope"]) == 2
    assert main(["experiment"]) == 2
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    bad.write_text(json.dumps({"topology": {"kind": "cycle", "n": 8}, "input": {"kind": "constant", "value": 1},
                               "checkpoints": [0], "repetitions": 1}))
    assert main(["experiment", "--config", str(bad), "--out", str(blocker / "sub")]) == 3


def test_argparse_usage_error_exit_code():
    with pytest.raises(SystemExit) as info:
        main(["schedule"])
    assert info.value.code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "tokenbalance", "bounds", "--name", "cycle_l2_lower",
                           "--params", "t=100"], capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["value"] == pytest.approx(6.25e-4)
