import json
import subprocess
import sys

import pytest

from horizonbench.cli import EXIT_DATA, EXIT_OK, EXIT_PARTIAL, EXIT_USAGE, build_parser, main, resolve_config
from horizonbench.dataset import read_series_csv


@pytest.fixture(scope="module")
def series_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("series")
    assert main(["synth", "--days", "3", "--seed", "1", "--out", str(d / "flow.csv")]) == EXIT_OK
    assert main(["synth", "--days", "3", "--seed", "2", "--quantity", "speed", "--out", str(d / "speed.csv")]) == 0
    return d


def test_synth_writes_series(series_files):
    s = read_series_csv((series_files / "flow.csv").read_text(), "flow")
    assert len(s) == 3 * 288


def test_ingest_station_sample(tmp_path, data_dir):
    out = tmp_path / "speed.csv"
    assert main(["ingest", "--pems", str(data_dir / "pems_station_sample.csv"), "--quantity", "speed",
                 "--out", str(out)]) == EXIT_OK
    assert len(read_series_csv(out.read_text(), "speed")) == 8


def test_sweep_slopes_report(tmp_path, series_files, capsys):
    out = tmp_path / "run"
    code = main(["sweep", "--flow", str(series_files / "flow.csv"), "--speed", str(series_files / "speed.csv"),
                 "--models", "linear,kalman", "--windows", "1..4", "--profile", "reduced", "--out", str(out)])
    assert code == EXIT_OK
    for name in ("metrics.csv", "slopes.csv", "summary.md", "manifest.json", "timings.json",
                 "degradation_linear.svg"):
        assert (out / name).exists()
    assert len((out / "metrics.csv").read_text().splitlines()) == 1 + 2 * 2 * 4 * 4

    assert main(["slopes", "--in", str(out), "--target", "train"]) == EXIT_OK
    printed = capsys.readouterr().out
    assert printed.startswith("model,quantity,metric,target_split")
    assert ",train," in printed and ",test," not in printed

    assert main(["report", "--in", str(out), "--out", str(tmp_path / "again")]) == EXIT_OK
    for name in ("metrics.csv", "slopes.csv"):
        assert (out / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_usage_errors(tmp_path, series_files):
    flow = str(series_files / "flow.csv")
    assert main(["sweep", "--flow", flow, "--models", "nope", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["sweep", "--flow", flow, "--windows", "0..3", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["sweep", "--out", str(tmp_path)]) == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--strategy", "sideways", "--out", str(tmp_path)])
    assert exc.value.code == EXIT_USAGE


def test_data_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("timestamp,value\n0,abc\n")
    assert main(["sweep", "--flow", str(bad), "--out", str(tmp_path / "o")]) == EXIT_DATA
    assert main(["ingest", "--pems", str(tmp_path / "missing.csv"), "--quantity", "flow",
                 "--out", str(tmp_path / "x")]) == EXIT_DATA


def test_partial_failure_exit(tmp_path, series_files):
    short = tmp_path / "short.csv"
    lines = (series_files / "flow.csv").read_text().splitlines()
    short.write_text("\n".join(lines[:61]) + "\n")
    code = main(["sweep", "--flow", str(short), "--models", "linear", "--windows", "1,2", "--out",
                 str(tmp_path / "o")])
    assert code == EXIT_PARTIAL
    assert "failed:" in (tmp_path / "o" / "metrics.csv").read_text()


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"models": ["linear", "knn"], "windows": "2..3", "seed": 7, "workers": 2}))
    args = build_parser().parse_args(["sweep", "--config", str(cfg), "--seed", "9", "--out", "x"])
    config = resolve_config(args)
    assert config["models"] == ("linear", "knn")
    assert config["windows"] == (2, 3)
    assert config["seed"] == 9  # flag beats file
    assert config["workers"] == 2  # file beats default
    assert config["strategy"] == "direct"  # default


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "horizonbench.cli", "synth", "--days", "1",
                           "--out", str(tmp_path / "s.csv")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
