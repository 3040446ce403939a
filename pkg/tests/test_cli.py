"""Command line front end: exit codes and output files."""

import csv

from gpuiosim.cli import main


def small_args(tmp_path, out_name):
    return ["--set", "workload.n_tb=2", "--set", "workload.file_bytes=1M",
            "--set", "repetitions=2", "--out", str(tmp_path / out_name)]


def test_run_writes_csv(tmp_path, capsys):
    rc = main(["run", *small_args(tmp_path, "r.csv"), "--label", "smoke"])
    assert rc == 0
    with open(tmp_path / "r.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["rep"] for r in rows] == ["0", "1", "2"]  # 2 reps + mean
    assert rows[-1]["seed"] == "mean"
    assert "smoke" in capsys.readouterr().out


def test_sweep_runs_each_value(tmp_path):
    rc = main(["sweep", "--param", "gpufs.page_size", "--values", "4K,16K",
               *small_args(tmp_path, "s.csv")])
    assert rc == 0
    with open(tmp_path / "s.csv") as fh:
        labels = {r["label"] for r in csv.DictReader(fh)}
    assert labels == {"gpufs.page_size=4K", "gpufs.page_size=16K"}


def test_bad_config_exits_2(tmp_path, capsys):
    rc = main(["run", "--set", "nosuch.key=1", "--out", str(tmp_path / "x.csv")])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_record_then_replay_roundtrip(tmp_path):
    trace = str(tmp_path / "t.trace")
    rc = main(["run", *small_args(tmp_path, "rec.csv"),
               "--set", f"workload.record_trace={trace}",
               "--set", "repetitions=1"])
    assert rc == 0
    rc = main(["replay", "--trace", trace,
               "--set", "workload.n_tb=2", "--set", "workload.file_bytes=1M",
               "--set", "repetitions=1", "--out", str(tmp_path / "rp.csv")])
    assert rc == 0
    with open(tmp_path / "rp.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert int(rows[0]["user_bytes"]) == 1024 ** 2
