import os
import subprocess
import sys
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parent.parent
SAMPLE = REPO / "data" / "sample_flows.csv"

SCHEMA_FLAGS = [
    "--time-column", "stime",
    "--src-columns", "saddr",
    "--dst-columns", "daddr",
    "--label-column", "category",
    "--pkts-column", "pkts",
    "--bytes-column", "bytes",
    "--rate-column", "rate",
]


def run_cli(*argv, env_extra=None):
    env = dict(os.environ)
    env.pop("FLOWGRAPH_CONFIG", None)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "flowgraph", *argv],
        capture_output=True, text=True, env=env,
    )


def small_log(tmp_path, rows=None):
    lines = ["stime,saddr,daddr,pkts,bytes,rate,category"]
    lines += rows if rows is not None else [
        "1.0,a,b,3,300,1.0,Normal",
        "2.0,b,c,5,500,2.0,Normal",
        "11.0,a,c,2,200,1.0,DDoS",
    ]
    path = tmp_path / "flows.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_no_arguments_exits_one():
    proc = run_cli()
    assert proc.returncode == 1
    assert "usage" in proc.stderr.lower()


def test_help_exits_zero():
    proc = run_cli("--help")
    assert proc.returncode == 0
    for sub in ("timeseries", "community-enrich", "spectral-extract", "render"):
        assert sub in proc.stdout


def test_unknown_flag_exits_one(tmp_path):
    proc = run_cli("spectral-extract", "--input", "x", "--output", "y", "--frobnicate")
    assert proc.returncode == 1


def test_missing_required_setting_names_the_key(tmp_path):
    log = small_log(tmp_path)
    proc = run_cli("spectral-extract", "--input", str(log), "--output", str(tmp_path / "o.csv"),
                   *SCHEMA_FLAGS)  # no --window anywhere
    assert proc.returncode == 1
    assert "spectral.window" in proc.stderr


def test_missing_schema_key_names_the_key(tmp_path):
    log = small_log(tmp_path)
    proc = run_cli("spectral-extract", "--input", str(log), "--output", str(tmp_path / "o.csv"),
                   "--window", "10s")
    assert proc.returncode == 1
    assert "schema.time_column" in proc.stderr


def test_missing_input_file_exits_one(tmp_path):
    proc = run_cli("spectral-extract", "--input", str(tmp_path / "nope.csv"),
                   "--output", str(tmp_path / "o.csv"), "--window", "10s", *SCHEMA_FLAGS)
    assert proc.returncode == 1
    assert "not found" in proc.stderr


def test_bad_data_exits_two(tmp_path):
    log = small_log(tmp_path, rows=["1.0,a,b,3,300,1.0,Normal", "2.0,a,b,junk,1,1,Normal"])
    proc = run_cli("spectral-extract", "--input", str(log), "--output", str(tmp_path / "o.csv"),
                   "--window", "10s", *SCHEMA_FLAGS)
    assert proc.returncode == 2
    assert "line 3" in proc.stderr


def test_dry_run_validates_and_writes_nothing(tmp_path):
    log = small_log(tmp_path)
    out = tmp_path / "out.csv"
    proc = run_cli("spectral-extract", "--input", str(log), "--output", str(out),
                   "--window", "10s", "--dry-run", *SCHEMA_FLAGS)
    assert proc.returncode == 0
    assert not out.exists()
    for sub, extra in (
        ("timeseries", ["--resolution", "10s", "--agg", "pkts=sum"]),
        ("community-enrich", ["--window", "10s"]),
    ):
        proc = run_cli(sub, "--input", str(log), "--output", str(out), "--dry-run",
                       *SCHEMA_FLAGS, *extra)
        assert proc.returncode == 0, proc.stderr
        assert not out.exists()
    proc = run_cli("render", "--input", str(log), "--out", str(tmp_path / "viz"),
                   "--dry-run", *SCHEMA_FLAGS)
    assert proc.returncode == 0
    assert not (tmp_path / "viz").exists()


def test_spectral_extract_end_to_end(tmp_path):
    log = small_log(tmp_path)
    out = tmp_path / "features.csv"
    proc = run_cli("spectral-extract", "--input", str(log), "--output", str(out),
                   "--window", "10s", "--devices", "2", *SCHEMA_FLAGS)
    assert proc.returncode == 0, proc.stderr
    lines = out.read_text(encoding="utf-8").strip().split("\n")
    assert lines[0].startswith("window_index,window_start,")
    assert lines[0].endswith(",label")
    assert len(lines) == 3  # header + 2 windows
    assert lines[2].endswith("DDoS")


def test_community_enrich_end_to_end(tmp_path):
    log = small_log(tmp_path)
    out = tmp_path / "enriched.csv"
    proc = run_cli("community-enrich", "--input", str(log), "--output", str(out),
                   "--window", "10s", "--strategy", "louvain", "--seed", "42",
                   "--suffix", "gc", *SCHEMA_FLAGS)
    assert proc.returncode == 0, proc.stderr
    lines = out.read_text(encoding="utf-8").strip().split("\n")
    assert len(lines) == 4  # header + 3 rows, row count preserved
    header = lines[0].split(",")
    assert header[:7] == ["stime", "saddr", "daddr", "pkts", "bytes", "rate", "category"]
    assert "community_gc" in header and "modularity_gc" in header
    # original cells intact
    assert lines[1].startswith("1.0,a,b,3,300,1.0,Normal,")


def test_render_outputs(tmp_path):
    log = small_log(tmp_path)
    proc = run_cli("render", "--input", str(log), "--mode", "dot",
                   "--out", str(tmp_path / "viz"), "--title", "tiny", *SCHEMA_FLAGS)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "viz" / "tiny.dot").is_file()
    proc = run_cli("render", "--input", str(log), "--mode", "html", "--color-by", "community",
                   "--out", str(tmp_path / "viz"), "--title", "tiny", *SCHEMA_FLAGS)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "viz" / "graph_representation" / "tiny.html").is_file()


def test_timeseries_end_to_end(tmp_path):
    log = small_log(tmp_path)
    out = tmp_path / "ts.csv"
    proc = run_cli("timeseries", "--input", str(log), "--output", str(out),
                   "--resolution", "10s", "--group-by", "saddr",
                   "--agg", "pkts=sum,category=first", *SCHEMA_FLAGS)
    assert proc.returncode == 0, proc.stderr
    lines = out.read_text(encoding="utf-8").strip().split("\n")
    assert lines[0] == "stime,saddr,pkts,category"
    assert "0,a,3,Normal" in lines
    assert "10,a,2,DDoS" in lines


def config_file(tmp_path, window="10s"):
    cfg = tmp_path / "flowgraph.yaml"
    cfg.write_text(
        "\n".join([
            "schema:",
            "  time_column: stime",
            "  src_columns: [saddr]",
            "  dst_columns: [daddr]",
            "  label_column: category",
            "  pkts_column: pkts",
            "  bytes_column: bytes",
            "  rate_column: rate",
            "spectral:",
            f"  window: {window}",
            "  devices: 2",
        ]) + "\n",
        encoding="utf-8",
    )
    return cfg


def test_config_file_supplies_settings(tmp_path):
    log = small_log(tmp_path)
    out = tmp_path / "o.csv"
    proc = run_cli("spectral-extract", "--input", str(log), "--output", str(out),
                   "--config", str(config_file(tmp_path)))
    assert proc.returncode == 0, proc.stderr
    assert out.is_file()


def test_config_via_environment_variable(tmp_path):
    log = small_log(tmp_path)
    out = tmp_path / "o.csv"
    proc = run_cli("spectral-extract", "--input", str(log), "--output", str(out),
                   env_extra={"FLOWGRAPH_CONFIG": str(config_file(tmp_path))})
    assert proc.returncode == 0, proc.stderr
    assert out.is_file()


def test_flags_win_over_config(tmp_path):
    log = small_log(tmp_path)
    out = tmp_path / "o.csv"
    # config says 10s (2 windows); the flag forces one big window
    proc = run_cli("spectral-extract", "--input", str(log), "--output", str(out),
                   "--config", str(config_file(tmp_path, window="10s")), "--window", "60s")
    assert proc.returncode == 0, proc.stderr
    lines = out.read_text(encoding="utf-8").strip().split("\n")
    assert len(lines) == 2  # header + 1 window


def test_unknown_config_key_is_named(tmp_path):
    log = small_log(tmp_path)
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("spectral:\n  windows: 10s\n", encoding="utf-8")
    proc = run_cli("spectral-extract", "--input", str(log), "--output", str(tmp_path / "o.csv"),
                   "--window", "10s", "--config", str(cfg), *SCHEMA_FLAGS)
    assert proc.returncode == 1
    assert "windows" in proc.stderr


def test_unknown_config_section_is_named(tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("spactral:\n  window: 10s\n", encoding="utf-8")
    proc = run_cli("spectral-extract", "--input", "x", "--output", "y",
                   "--config", str(cfg), *SCHEMA_FLAGS)
    assert proc.returncode == 1
    assert "spactral" in proc.stderr


def test_figures_flag_writes_pngs(tmp_path):
    out = tmp_path / "features.csv"
    figs = tmp_path / "figs"
    proc = run_cli("spectral-extract", "--input", str(SAMPLE), "--output", str(out),
                   "--window", "60s", "--devices", "3", "--figures", str(figs), *SCHEMA_FLAGS)
    assert proc.returncode == 0, proc.stderr
    assert (figs / "spectral_flooding.png").is_file()


def test_lenient_flag_skips_bad_rows(tmp_path):
    log = small_log(tmp_path, rows=["1.0,a,b,3,300,1.0,Normal", "2.0,a,b,junk,1,1,Normal"])
    out = tmp_path / "o.csv"
    proc = run_cli("spectral-extract", "--input", str(log), "--output", str(out),
                   "--window", "10s", "--lenient", *SCHEMA_FLAGS)
    assert proc.returncode == 0, proc.stderr
    assert out.is_file()
