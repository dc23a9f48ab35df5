import csv
import io
import json
import math
import subprocess
import sys

import pytest

from fading_service import cli
from fading_service import service_rate as sr


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_db_conversions():
    assert cli.db_to_linear(3.0) == pytest.approx(1.9953, abs=1e-4)
    assert cli.dbw_to_watts(15.0) == pytest.approx(31.623, abs=1e-3)
    assert cli.db_to_linear(0.0) == 1.0


def test_rate_awgn(capsys):
    code, out, _ = run(capsys, "rate", "--model", "awgn", "--rho", "1", "--w-hz", "1")
    assert code == 0
    assert "0.693147" in out and "bits/s" in out


def test_rate_rayleigh_json(capsys):
    code, out, _ = run(capsys, "rate", "--model", "rayleigh", "--rho", "10", "--w-hz", "1000", "--format", "json")
    payload = json.loads(out)
    assert code == 0
    assert payload["rate"]["c_star"] == pytest.approx(2014.6425447084516791, rel=1e-13)
    assert payload["rate"]["c_star_bits"] == pytest.approx(payload["rate"]["c_star"] / math.log(2), rel=1e-15)


def test_rate_rejects_small_m(capsys):
    code, _, err = run(capsys, "rate", "--model", "nakagami", "--m", "0.3", "--rho", "1")
    assert code == 2
    assert "0.5" in err


def test_config_errors(capsys, tmp_path):
    assert run(capsys, "rate", "--model", "nakagami", "--rho", "1")[0] == 2
    assert run(capsys, "rate")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"rho": 1, "colour": "red"}')
    assert run(capsys, "rate", "--config", str(bad))[0] == 2
    both = tmp_path / "both.json"
    both.write_text('{"rho": 1, "n0_w_per_hz": 1e-3}')
    assert run(capsys, "rate", "--config", str(both))[0] == 2
    assert run(capsys, "rate", "--config", str(tmp_path / "missing.json"))[0] == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["rate", "--model", "weibull"])
    assert info.value.code == 2


def test_numerical_failure_exit_code(capsys, monkeypatch):
    monkeypatch.setattr(sr, "C0_TOLERANCE", 0.0)
    code, _, err = run(capsys, "rate", "--model", "nakagami", "--m", "2", "--rho", "10")
    assert code == 3 and "numerical" in err


def test_budget_exit_code(capsys):
    code, _, err = run(capsys, "simulate", "--rho", "10", "--delta-tau", "1e-9", "--rounds", "100")
    assert code == 4 and "budget" in err


def test_bundled_setup(capsys):
    code, out, _ = run(capsys, "rate", "--config", "paper-setup.json", "--format", "json")
    payload = json.loads(out)
    assert code == 0
    assert payload["rho"] == pytest.approx(10.0, rel=1e-12)
    assert payload["config"]["pr_db"] == 3.0 and payload["config"]["pt_dbw"] == 15.0
    assert payload["config"]["d_m"] == 1000.0 and payload["config"]["alpha"] == 4.0


def test_flags_override_file(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"_note": "ignored", "rho": 1, "w_hz": 1, "model": "awgn"}')
    code, out, _ = run(capsys, "rate", "--config", str(cfg), "--w-hz", "2", "--format", "json")
    assert code == 0
    assert json.loads(out)["rate"]["c_star"] == pytest.approx(2 * math.log(2), rel=1e-15)
    # physical fields on the command line replace the file's rho
    code, out, _ = run(capsys, "rate", "--config", str(cfg), "--n0", "0.5", "--format", "json")
    assert json.loads(out)["rho"] == pytest.approx(2.0)


def test_simulate_outputs_and_roundtrip(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["simulate", "--model", "nakagami", "--m", "1.5", "--rho", "10", "--rounds", "4",
            "--delta-tau", "1e-4", "--horizon", "0.5", "--seed", "31"]
    assert run(capsys, *args, "--out", str(a))[0] == 0
    stats = json.loads((a / "stats.json").read_text())
    assert set(stats) >= {"mean_final", "std_final", "max_dev_ratio", "slope_fit", "intercept_fit",
                          "r_squared", "rng_algorithm", "config"}
    assert run(capsys, "simulate", "--config", str(a / "stats.json"), "--out", str(b))[0] == 0
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()
    assert not [p for p in a.iterdir() if p.name.endswith(".tmp")]


def test_simulate_deterministic(capsys):
    code, out, _ = run(capsys, "simulate", "--model", "awgn", "--rho", "10", "--rounds", "3", "--format", "json")
    assert code == 0
    assert json.loads(out)["max_dev_ratio"] == 0.0


def test_queue_commands(capsys, tmp_path):
    code, out, _ = run(capsys, "queue", "--rho", "10", "--utilization", "0", "--horizon", "0.1", "--format", "csv")
    assert code == 0
    assert all(float(r["backlog_nats"]) == 0 and float(r["s_tilde_nats"]) == 0 for r in rows(out))
    code, out, _ = run(capsys, "queue", "--rho", "10", "--utilization", "0.9", "--format", "json")
    assert json.loads(out)["mean_delay"] <= 1e-3
    code, out, _ = run(capsys, "queue", "--rho", "10", "--utilization", "1.1", "--out", str(tmp_path), "--format", "json")
    s = json.loads(out)
    assert s["growth_slope"] == pytest.approx(0.1 * s["c_star"], rel=3e-2)
    assert (tmp_path / "queue.csv").exists() and (tmp_path / "queue_summary.json").exists()
    assert run(capsys, "queue", "--rho", "10")[0] == 2
    assert run(capsys, "queue", "--rho", "10", "--utilization", "1", "--source-rate", "5")[0] == 2


def test_sweep_rayleigh_points_agree(capsys):
    _, m_out, _ = run(capsys, "sweep", "--param", "m", "--grid", "1", "--rho", "10")
    _, k_out, err = run(capsys, "sweep", "--param", "k", "--grid", "0", "--rho", "10")
    m_row, k_row = rows(m_out)[0], rows(k_out)[0]
    assert float(m_row["c_star_nats"]) == pytest.approx(float(k_row["c_star_nats"]), rel=1e-12)
    assert "nondecreasing" in err


def test_sweep_tail_approaches_awgn(capsys):
    _, out, err = run(capsys, "sweep", "--param", "m", "--grid", "0.5,1,4,16,64,256,1024,4096", "--rho", "10")
    table = rows(out)
    awgn = float(table[-1]["c_star_nats"])
    assert table[-1]["param"] == "awgn"
    gaps = [awgn - float(r["c_star_nats"]) for r in table[:-1]]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] / awgn < 1e-3
    assert "yes" in err


def test_sweep_zero_rho_and_errors(capsys):
    _, out, _ = run(capsys, "sweep", "--param", "rho", "--grid", "0", "--model", "nakagami", "--m", "3")
    assert all(float(r["c_star_nats"]) == 0.0 for r in rows(out))
    assert run(capsys, "sweep", "--param", "m", "--grid", "2,1", "--rho", "1")[0] == 2
    assert run(capsys, "sweep", "--param", "m", "--grid", "", "--rho", "1")[0] == 2
    assert run(capsys, "sweep", "--grid", "1", "--rho", "1")[0] == 2


def test_cf_check(capsys):
    code, out, _ = run(capsys, "cf-check", "--rho", "10", "--rounds", "40", "--delta-tau", "1e-4")
    table = rows(out)
    assert code == 0
    assert float(table[0]["deviation"]) == 0.0
    assert all(float(r["deviation"]) <= 0.05 for r in table)
    _, out, _ = run(capsys, "cf-check", "--model", "awgn", "--rho", "10", "--rounds", "30", "--delta-tau", "1e-4")
    assert all(float(r["deviation"]) <= 1e-9 for r in rows(out))
    assert run(capsys, "cf-check", "--rho", "10", "--rounds", "5", "--delta-tau", "1e-3")[0] == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fading_service", "rate", "--model", "awgn", "--rho", "1", "--w-hz", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "0.693147" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "fading_service", "rate", "--model", "nakagami", "--m", "0.3", "--rho", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 2
