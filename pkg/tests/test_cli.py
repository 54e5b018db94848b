"""Command-line interface, exercised in process through main()."""

import json

import pytest

from mvfilter.cli import build_parser, main


def _base_config(tmp_path, **kw):
    d = {
        "scenario": "diagnose",
        "preset": "correlated-linear",
        "horizon": 0.2,
        "dt": 0.01,
        "n_law": 32,
        "n_particles": 200,
    }
    d.update(kw)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(d))
    return path


def test_parser_verbs_and_flags():
    parser = build_parser()
    args = parser.parse_args(
        ["diagnose", "--preset", "tanh-observation", "--seed", "7", "--threads", "2"]
    )
    assert args.verb == "diagnose" and args.seed == 7
    args = parser.parse_args(["report", "--out", "somewhere"])
    assert args.verb == "report"
    with pytest.raises(SystemExit):
        parser.parse_args([])  # a verb is required
    with pytest.raises(SystemExit):
        parser.parse_args(["diagnose", "--preset", "no-such-model"])
    with pytest.raises(SystemExit):
        parser.parse_args(["diagnose", "--criterion", "13"])


def test_diagnose_and_report_round_trip(tmp_path, capsys):
    cfg = _base_config(tmp_path)
    out = tmp_path / "run"
    code = main(["diagnose", "--config", str(cfg), "--out", str(out)])
    assert code == 0
    assert (out / "records.json").exists()
    assert (out / "diagnose.csv").exists()
    capsys.readouterr()

    code = main(["report", "--out", str(out)])
    text = capsys.readouterr().out
    assert code == 0
    assert "overall: pass" in text


def test_report_without_records_exits_2(tmp_path, capsys):
    assert main(["report", "--out", str(tmp_path)]) == 2
    assert "records.json" in capsys.readouterr().err


def test_flag_overrides_beat_config(tmp_path, capsys):
    cfg = _base_config(tmp_path, seed=1)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["diagnose", "--config", str(cfg), "--seed", "5", "--out", str(out_a)]) == 0
    assert main(["diagnose", "--config", str(cfg), "--seed", "5", "--out", str(out_b)]) == 0
    ra = json.loads((out_a / "records.json").read_text())
    rb = json.loads((out_b / "records.json").read_text())
    assert all(r["payload"]["seed"] == 5 for r in ra)
    assert (out_a / "diagnose.csv").read_bytes() == (out_b / "diagnose.csv").read_bytes()
    capsys.readouterr()


def test_failing_caps_exit_1(tmp_path, capsys):
    cfg = _base_config(tmp_path, caps={"mass": 1e-9, "zakai": 1e-9, "ks": 1e-9})
    code = main(["diagnose", "--config", str(cfg)])
    assert code == 1
    assert "overall: FAIL" in capsys.readouterr().out


def test_simulate_writes_truth_csv(tmp_path, capsys):
    cfg = _base_config(tmp_path, scenario="simulate")
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    header = (out / "truth.csv").read_text().split("\n", 1)[0]
    assert header == "t,x0,y0,gamma,vtilde0"
    capsys.readouterr()


def test_sweep_default_grid_runs(tmp_path, capsys):
    cfg = _base_config(tmp_path, scenario="sweep", horizon=0.1, n_seeds=2)
    out = tmp_path / "sw"
    main(["sweep", "--config", str(cfg), "--out", str(out), "--threads", "2"])
    rows = (out / "sweep.csv").read_text().strip().split("\n")
    assert rows[0] == "dt,n_particles,median,rms,n_seeds"
    assert len(rows) == 5  # 2 x 2 default grid
    capsys.readouterr()
