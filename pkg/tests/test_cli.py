import json
import subprocess
import sys

import pytest

from ipsplice import __version__, cli
from ipsplice.cli import config_hash, emit_plot_data, load_config, loglog_slope, main
from ipsplice.stats import wilson

SPLICE = """[splice]
n = 16
eps = 1/4, 1/8
modes = threshold, invasion
samples = 40
seed = 3
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def files_in(d):
    return sorted(p for p in d.rglob("*") if p.is_file())


def test_verify_tiny_suite(tmp_path, capsys):
    cfg = write(tmp_path, "v.ini", "[verify]\nconfigs = 20\nflip_budget_random = 20\narm_checks = 10\ninvasion_checks = 1\n"
                "invasion_steps = 300\nrect_samples = 4000\n")
    out = tmp_path / "out"
    assert main(["verify", "--config", str(cfg), "--out", str(out), "-j", "1"]) == 0
    text = capsys.readouterr().out
    summary = json.loads((out / "summary.json").read_text())
    from ipsplice.verify import CHECKS

    for name in CHECKS:
        assert f"PASS {name}" in text
        assert summary["checks"][name] is True


def test_verify_failure_exit_code(tmp_path, monkeypatch):
    from ipsplice import verify

    monkeypatch.setattr(verify, "run_all", lambda p: [{"name": "broken", "passed": False, "detail": "x"}])
    cfg = write(tmp_path, "v.ini", "[verify]\n")
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_missing_required_field(tmp_path, capsys):
    cfg = write(tmp_path, "c.ini", "[crossings]\nsamples = 3\n")
    assert main(["crossings", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "missing required field 'n'" in err and "c.ini:1" in err


def test_bad_value_is_line_anchored(tmp_path, capsys):
    cfg = write(tmp_path, "c.ini", "# comment\n[crossings]\nn = 8\nsamples = many\n")
    assert main(["crossings", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "c.ini:4: field 'samples'" in capsys.readouterr().err


def test_domain_violations_rejected(tmp_path, capsys):
    cfg = write(tmp_path, "a.ini", "[arms]\nn = 8\ns = 2, 8\n")
    assert main(["arms", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "a.ini:3: field 's'" in capsys.readouterr().err
    cfg = write(tmp_path, "c.ini", "[corrlen]\np = 0.5\nn = 2\n")
    assert main(["corrlen", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1


def test_unknown_field_and_malformed_file(tmp_path, capsys):
    cfg = write(tmp_path, "c.ini", "[crossings]\nn = 8\nsamplez = 3\n")
    assert main(["crossings", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "c.ini:3: unknown field 'samplez'" in capsys.readouterr().err
    cfg = write(tmp_path, "bad.json", '{"crossings": {"n": [8],,}}')
    assert main(["crossings", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "bad.json:1: malformed JSON" in capsys.readouterr().err


def test_splice_rows_per_cell(tmp_path):
    cfg = write(tmp_path, "s.ini", SPLICE)
    out = tmp_path / "out"
    assert main(["splice", "--config", str(cfg), "--out", str(out), "-j", "2"]) == 0
    lines = (out / "cells.csv").read_text().splitlines()
    assert lines[0] == f"# ipsplice {__version__} config_hash={config_hash('splice', load_config(cfg, 'splice')[0])}"
    assert lines[1] == "n,epsilon,mode,estimate,stderr,samples"
    rows = [r.split(",") for r in lines[2:]]
    assert len(rows) == 4
    assert sorted((r[1], r[2]) for r in rows) == [("0.125", "invasion"), ("0.125", "threshold"),
                                                    ("0.25", "invasion"), ("0.25", "threshold")]
    assert (out / "config_snapshot.ini").read_text() == SPLICE


def test_every_output_carries_hash_and_version(tmp_path):
    cfg = write(tmp_path, "s.ini", SPLICE + "cv_outer = 4\ncv_inner = 3\na_samples = 4\npn_samples = 200\n")
    out = tmp_path / "out"
    assert main(["splice", "--config", str(cfg), "--out", str(out), "-j", "1"]) == 0
    h = config_hash("splice", load_config(cfg, "splice")[0])
    for f in files_in(out):
        if f.name.startswith("config_snapshot"):
            continue
        text = f.read_text()
        assert h in text and __version__ in text, f.name


def test_output_directory_precedence(tmp_path, monkeypatch):
    cfg = write(tmp_path, "c.ini", f"[crossings]\nn = 4\nsamples = 3\noutput = {tmp_path / 'from_config'}\n")
    monkeypatch.setenv("IPSPLICE_OUTPUT_DIR", str(tmp_path / "from_env"))
    assert main(["crossings", "--config", str(cfg)]) == 0
    assert (tmp_path / "from_env" / "summary.json").exists()
    assert main(["crossings", "--config", str(cfg), "--out", str(tmp_path / "from_flag")]) == 0
    assert (tmp_path / "from_flag" / "summary.json").exists()
    monkeypatch.delenv("IPSPLICE_OUTPUT_DIR")
    assert main(["crossings", "--config", str(cfg)]) == 0
    assert (tmp_path / "from_config" / "summary.json").exists()


def test_default_output_directory_uses_hash(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("IPSPLICE_OUTPUT_DIR", raising=False)
    cfg = write(tmp_path, "c.ini", "[crossings]\nn = 4\nsamples = 3\n")
    assert main(["crossings", "--config", str(cfg)]) == 0
    h = config_hash("crossings", load_config(cfg, "crossings")[0])
    assert (tmp_path / "runs" / f"crossings-{h}" / "summary.json").exists()


def test_json_config_and_overrides(tmp_path):
    cfg = write(tmp_path, "c.json", json.dumps({"corrlen": {"p": [0.9], "n": "2, 4", "samples": 300}}))
    params, _ = load_config(cfg, "corrlen", ["delta=1/5"])
    assert params["p"] == [0.9] and params["n"] == [2, 4] and params["delta"] == 0.2
    out = tmp_path / "o"
    assert main(["corrlen", "--config", str(cfg), "--out", str(out), "--set", "samples=200"]) == 0
    assert json.loads((out / "summary.json").read_text())["params"]["samples"] == 200


def test_hash_ignores_output_location():
    a = {"n": [8], "output": "x"}
    b = {"n": [8], "output": "y"}
    assert config_hash("crossings", a) == config_hash("crossings", b)
    assert config_hash("crossings", a) != config_hash("arms", a)


@pytest.mark.parametrize("sub, body", [
    ("splice", SPLICE + "cv_outer = 4\ncv_inner = 3\n"),
    ("arms", "[arms]\nn = 16\ns = 2, 4\nsamples = 300\n"),
    ("crossings", "[crossings]\nn = 8, 12\nsamples = 30\nsource = invasion\n"),
    ("invade", "[invade]\nmax_steps = 2000\nruns = 3\nwrite_steps = true\n"),
    ("corrlen", "[corrlen]\np = 0.7\nn = 2, 4\nsamples = 600\npn_scales = 4, 8\n"),
])
def test_outputs_identical_across_worker_counts(tmp_path, sub, body):
    cfg = write(tmp_path, "c.ini", body)
    for j in (1, 8):
        assert main([sub, "--config", str(cfg), "--out", str(tmp_path / f"w{j}"), "-j", str(j)]) == 0
    one, eight = files_in(tmp_path / "w1"), files_in(tmp_path / "w8")
    assert [p.name for p in one] == [p.name for p in eight]
    for a, b in zip(one, eight):
        assert a.read_bytes() == b.read_bytes(), a.name


def test_rerun_is_byte_identical(tmp_path):
    cfg = write(tmp_path, "c.ini", "[arms]\nn = 12\ns = 3\nsamples = 200\nbudget = per_arm:1\nrotations = 2\n")
    for k in (1, 2):
        assert main(["arms", "--config", str(cfg), "--out", str(tmp_path / f"r{k}"), "-j", "1"]) == 0
    for a, b in zip(files_in(tmp_path / "r1"), files_in(tmp_path / "r2")):
        assert a.read_bytes() == b.read_bytes()
    summary = json.loads((tmp_path / "r1" / "summary.json").read_text())
    assert summary["lower_bound_detection"] is True


def test_plot_data_empty_results(tmp_path):
    paths = emit_plot_data({}, tmp_path, "h0")
    for p in paths.values():
        lines = p.read_text().splitlines()
        assert len(lines) == 2 and lines[0].startswith("# ipsplice") and lines[1].startswith("# ")


def test_plot_data_single_cell(tmp_path):
    cell = {"n": 64, "eps": 0.125, "mode": "threshold", "estimate": 0.5, "stderr": 0.01}
    p = emit_plot_data({"cells": [cell]}, tmp_path, "h1")["mismatch"]
    data = [ln for ln in p.read_text().splitlines() if not ln.startswith("#")]
    assert data == ["64 0.125 threshold 0.5 0.01"]


def test_plot_data_sorted_and_loglog_columns(tmp_path):
    cells = [{"n": n, "eps": e, "mode": "threshold", "estimate": 0.1, "stderr": 0.01}
             for n, e in [(128, 0.25), (64, 0.25), (64, 0.0625), (128, 0.125)]]
    arms = [{"n": 64, "s": 16, "estimate": 0.4, "stderr": 0.02}, {"n": 64, "s": 4, "estimate": 0.0, "stderr": 0.01}]
    paths = emit_plot_data({"cells": cells, "arms": arms}, tmp_path, "h2")
    rows = [ln.split() for ln in paths["mismatch"].read_text().splitlines() if not ln.startswith("#")]
    assert [(int(r[0]), float(r[1])) for r in rows] == [(64, 0.0625), (64, 0.25), (128, 0.125), (128, 0.25)]
    text = paths["arm_loglog"].read_text().splitlines()
    assert text[1] == "# n s log_s_over_n log_estimate stderr_log"
    last = text[-1].split()
    assert float(last[2]) == pytest.approx(-1.3862943611198906)
    assert float(last[3]) == pytest.approx(-0.916290731874155)
    assert float(last[4]) == pytest.approx(0.05)
    assert text[2].split()[3] == "nan"


def test_plot_data_from_run_directory(tmp_path):
    cfg = write(tmp_path, "s.ini", SPLICE)
    out = tmp_path / "out"
    assert main(["splice", "--config", str(cfg), "--out", str(out), "-j", "1"]) == 0
    before = (out / "mismatch.dat").read_text()
    (out / "mismatch.dat").unlink()
    emit_plot_data(out)
    assert (out / "mismatch.dat").read_text() == before


def test_loglog_slope_recovers_power_law():
    ss = [2, 4, 8, 16]
    ests = [wilson(round(10000 * (s / 128) ** 1.25), 10000) for s in ss]
    fit = loglog_slope(ss, 128, ests)
    assert fit["slope"] == pytest.approx(1.25, abs=0.02)
    assert fit["lower95"] < fit["slope"] < fit["upper95"]
    assert loglog_slope([2], 128, ests[:1])["slope"] is None


def test_bad_worker_count(tmp_path):
    cfg = write(tmp_path, "c.ini", "[crossings]\nn = 4\n")
    assert main(["crossings", "--config", str(cfg), "-j", "0"]) == 1


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, "c.ini", "[crossings]\nn = 4\n")
    r = subprocess.run([sys.executable, "-m", "ipsplice", "crossings", "--config", str(cfg), "--out", str(tmp_path / "o")],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "PASS maxflow_equals_dual" in r.stdout
