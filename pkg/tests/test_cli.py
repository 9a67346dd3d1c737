import csv
import io
import json
import subprocess
import sys

import pytest

from risradar.cli import MC_COLUMNS, run
from risradar.experiments import CSV_COLUMNS


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_optimize_reports_feasible_saturated_design(capsys):
    code, out, _ = call(capsys, "optimize", "--config", "table1.json",
                        "--set", "target.snr0_db=15", "--set", "ris.a_max_db=40")
    assert code == 0
    report, table = out.split("\n\n")
    assert "(ok)" in report
    (rec,) = rows(table)
    assert rec["case"] == "active_40db"
    assert float(rec["amplitude"]) == pytest.approx(100.0, rel=1e-12)
    assert int(rec["l"]) > 0 and rec["budget_ok"] == "true"
    assert float(rec["radar_consumed_w"]) + float(rec["ris_consumed_w"]) <= 4.0 + 1e-9


def test_sweep_cardinality_and_repeatability(capsys):
    argv = ("sweep", "--config", "table1.json", "--start", "0", "--stop", "6", "--step", "2")
    code, first, _ = call(capsys, *argv)
    assert code == 0
    recs = rows(first)
    assert list(recs[0]) == list(CSV_COLUMNS)
    assert len(recs) == 6 * 4
    _, second, _ = call(capsys, *argv)
    assert first == second


def test_sweep_mismatched_adds_cases(capsys):
    _, out, _ = call(capsys, "sweep", "--config", "table1.json", "--start", "20", "--stop", "20",
                     "--step", "1", "--mismatched")
    cases = [r["case"] for r in rows(out)]
    assert len(cases) > 6 and len(set(cases)) == len(cases)


def test_simulate_given_design(capsys):
    code, out, _ = call(capsys, "simulate", "--config", "table1.json", "--trials", "20000",
                        "--seed", "4", "--p-r", "1.2", "--l", "100", "--amplitude", "10",
                        "--pfa", "0.1", "--pfa", "0.01")
    assert code == 0
    recs = rows(out)
    assert list(recs[0]) == list(MC_COLUMNS)
    assert [(r["hypothesis"], float(r["pfa"])) for r in recs] == [
        ("target-absent", 0.1), ("target-present", 0.1),
        ("target-absent", 0.01), ("target-present", 0.01)]
    assert all(int(r["trials"]) == 20000 and r["seed"] == "4" for r in recs)


def test_simulate_partial_design_is_an_error(capsys):
    code, _, err = call(capsys, "simulate", "--config", "table1.json", "--p-r", "1.0")
    assert code == 2 and "together" in err


def test_validate_passes(capsys):
    code, out, err = call(capsys, "validate", "--config", "table1.json", "--trials", "100000",
                          "--seed", "7", "--set", "target.snr0_db=12",
                          "--coherence-trials", "20000")
    assert code == 0, out
    recs = rows(out)
    assert len(recs) == 9 and all(r["pass"] == "true" for r in recs)
    assert "9/9" in err


def test_show_config_reflects_overrides(capsys):
    _, _, err = call(capsys, "optimize", "--config", "table1.json", "--show-config",
                     "--set", "radar.p_max=5", "--seed", "99")
    doc = json.loads(err[: err.rindex("}") + 1])
    assert doc["radar"]["p_max"] == 5 and doc["mc"]["seed"] == 99


def test_out_writes_file(capsys, tmp_path):
    target = tmp_path / "s.csv"
    code, out, err = call(capsys, "sweep", "--config", "table1.json", "--start", "3",
                          "--stop", "3", "--step", "1", "--cases", "no_ris", "--out", str(target))
    assert code == 0 and out == ""
    assert "wrote 1 records" in err
    assert len(rows(target.read_text())) == 1


def test_missing_config_exits_nonzero(capsys, tmp_path):
    code, _, err = call(capsys, "optimize", "--config", str(tmp_path / "nope.json"))
    assert code == 2 and "error" in err


def test_unknown_subcommand_exits_nonzero():
    with pytest.raises(SystemExit) as exc:
        run(["teleport", "--config", "table1.json"])
    assert exc.value.code != 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "risradar", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("risradar ")
