import csv
import json
import subprocess
import sys

from scquery.cli import main


def test_simulate_to_file_is_deterministic(tmp_path, capsys):
    args = ["simulate", "--scenario", "direct-uniform", "--n", "200", "--k", "6", "--delta", "2",
            "--trials", "2", "--seed", "9"]
    assert main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.csv"), "--workers", "2"]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    summary = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert summary["trials"] == 2


def test_simulate_config_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("scenario: quantized-uniform\nn: 150\nk: 6\ns_size: 100\ntrials: 3\n")
    assert main(["simulate", "--config", str(cfg), "--trials", "1", "--format", "json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 1 and rows[0]["s_size"] == 100


def test_simulate_svg_and_logs(tmp_path):
    svg = tmp_path / "p.svg"
    logs = tmp_path / "logs"
    assert main(["simulate", "--scenario", "direct-uniform", "--n", "100", "--s-size", "20,40",
                 "--out", str(tmp_path / "r.csv"), "--svg", str(svg), "--log-dir", str(logs)]) == 0
    assert "<svg" in svg.read_text()
    assert sorted(p.name for p in logs.iterdir()) == ["trial-0-0.log", "trial-1-0.log"]


def test_replay_command(tmp_path, capsys):
    logs = tmp_path / "logs"
    main(["simulate", "--scenario", "quantized-uniform", "--n", "200", "--k", "6", "--s-size", "150",
          "--seed", "2", "--out", str(tmp_path / "r.csv"), "--log-dir", str(logs)])
    capsys.readouterr()
    assert main(["replay", "--log", str(logs / "trial-0-0.log"), "--scenario", "quantized-uniform",
                 "--n", "200", "--k", "6", "--delta", "2", "--s-size", "150", "--seed", "2"]) == 0
    summary = json.loads(capsys.readouterr().out)
    row = next(csv.DictReader((tmp_path / "r.csv").open()))
    assert summary["queries"] == int(row["queries"])
    assert summary["recovered"] == (row["failure"] == "")


def test_bounds_command(capsys):
    assert main(["bounds", "--scenario", "quantized-uniform", "--n", "2000", "--k", "6", "--delta", "2"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert abs(rep["s_sufficient"] - 2643.2836) < 1e-3


def test_corpus_and_ingest(tmp_path, capsys):
    path = tmp_path / "g.csv"
    assert main(["corpus", str(path), "--n", "500", "--k", "4", "--alpha", "0.02"]) == 0
    assert main(["ingest", str(path), "--truth-out", str(tmp_path / "t.txt")]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["n"] == 500 and stats["k"] == 4 and stats["alpha"] > 0.02
    assert (tmp_path / "t.txt").exists()


def test_errors_exit_with_code_two(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,genre\n1,x\n")
    assert main(["ingest", str(bad)]) == 2
    assert "error [" in capsys.readouterr().err
    assert main(["simulate", "--n", "100"]) == 2


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "scquery", "bounds", "--scenario", "worstcase", "--n", "3470",
                          "--k", "5", "--alpha", "0.0152"], capture_output=True, text=True, check=True)
    assert abs(json.loads(out.stdout)["s_sufficient"] - 642.1939) < 1e-3
