import csv

import pytest
import yaml

from sagin_isac.cli import main
from sagin_isac.experiments import (
    INFEASIBLE,
    ExperimentSpec,
    parse_sweep,
    replay,
    run_experiment,
)


def test_parse_sweep():
    assert parse_sweep("100:800:100") == tuple(float(n) for n in range(100, 801, 100))
    assert parse_sweep("-2:-1.2:0.1")[-1] == -1.2 and len(parse_sweep("-2:-1.2:0.1")) == 9
    assert parse_sweep("0.2, 0.4,0.6") == (0.2, 0.4, 0.6)
    for bad in ("1:0:1", "a:b:c", "1:2:0", "x,y", ""):
        with pytest.raises(ValueError):
            parse_sweep(bad)


def test_spec_validation(scenario, tmp_path):
    with pytest.raises(ValueError):
        ExperimentSpec.default("bogus", scenario, tmp_path)
    with pytest.raises(ValueError):
        ExperimentSpec.default("roc", scenario, tmp_path, trials=10)
    with pytest.raises(ValueError):
        ExperimentSpec.default("energy_vs_frames", scenario, tmp_path, sweep=(100.5,))
    with pytest.raises(ValueError):
        ExperimentSpec.default("roc", scenario, tmp_path, seed=-1)


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_roc_run_and_replay(scenario, tmp_path):
    spec = ExperimentSpec.default("roc", scenario, tmp_path / "a", trials=2000, sweep=(0.2, 0.6),
                                  plot=True)
    paths = run_experiment(spec)
    assert [p.name for p in paths] == ["roc_np0.2.csv", "roc_np0.6.csv", "roc_summary.csv"]
    summary = _rows(paths[-1])
    assert summary[0] == ["n_p", "sinr_db", "p_d_at_pfa_0.1", "n_trials"]
    assert len(summary) == 3
    assert (tmp_path / "a" / "roc.svg").read_text().startswith("<svg")
    manifest = yaml.safe_load((tmp_path / "a" / "manifest.yaml").read_text())
    assert set(manifest) >= {"scenario_sha256", "seed", "code_version", "outputs"}
    report = replay(tmp_path / "a" / "manifest.yaml", tmp_path / "b")
    assert report.ok and len(report.matched) == 3


def test_gamma_sweep_writes_sentinels(scenario, tmp_path):
    spec = ExperimentSpec.default("energy_vs_gamma", scenario, tmp_path, sweep=(-2.0, -1.2))
    (path,) = run_experiment(spec)
    rows = _rows(path)
    assert rows[0] == ["gamma_s_db", "proposed", "opt_f", "opt_o", "fixed"]
    assert rows[1][0] == "-2" and INFEASIBLE not in rows[1]
    assert rows[2][1:] == [INFEASIBLE] * 4


def test_cli_run_is_byte_identical(tmp_path, capsys):
    args = ["run", "energy_vs_frames", "--sweep", "100", "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "x")]) == 0
    assert main(args + ["--out", str(tmp_path / "y")]) == 0
    a = (tmp_path / "x" / "energy_vs_frames.csv").read_bytes()
    assert a == (tmp_path / "y" / "energy_vs_frames.csv").read_bytes()
    assert a.startswith(b"N,proposed,opt_f,opt_o,fixed\n100,")
    assert main(["replay", str(tmp_path / "x" / "manifest.yaml"), "--out", str(tmp_path / "z")]) == 0
    assert "1 identical, 0 differ" in capsys.readouterr().out


def test_replay_detects_tampering(tmp_path, capsys):
    assert main(["run", "roc", "--sweep", "0.3", "--trials", "1000", "--out", str(tmp_path / "r")]) == 0
    doc = yaml.safe_load((tmp_path / "r" / "manifest.yaml").read_text())
    doc["outputs"]["roc_summary.csv"] = "0" * 64
    (tmp_path / "r" / "manifest.yaml").write_text(yaml.safe_dump(doc))
    assert main(["replay", str(tmp_path / "r" / "manifest.yaml"), "--out", str(tmp_path / "q")]) == 1
    assert "MISMATCH roc_summary.csv" in capsys.readouterr().out


def test_cli_optimize(tmp_path):
    assert main(["optimize", "--mode", "fixed", "--out", str(tmp_path)]) == 0
    doc = yaml.safe_load((tmp_path / "allocation.yaml").read_text())
    assert doc["allocation"]["n_p"] == 0.5 and doc["allocation"]["rho"] == 0.5
    assert _rows(tmp_path / "trace.csv")[0] == ["n_p", "energy_total", "iters", "status"]
    assert len(_rows(tmp_path / "energy.csv")) == 201


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", "roc", "--scenario", str(tmp_path / "missing.yaml"),
                 "--out", str(tmp_path)]) == 2
    assert main(["run", "roc", "--sweep", "1:0:1", "--out", str(tmp_path)]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", "roc", "--sweep", "0.3", "--trials", "1000",
                 "--out", str(blocker / "sub")]) == 1
    with pytest.raises(SystemExit):
        main(["run", "roc", "--seed", "-3", "--out", str(tmp_path)])


def test_cli_scenario_dump(capsys):
    assert main(["scenario"]) == 0
    out = yaml.safe_load(capsys.readouterr().out)
    assert out["n_frames"] == 200
