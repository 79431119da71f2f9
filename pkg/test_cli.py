"""
Tests for the command-line surface: exit codes, formats and config files.
"""

import csv
import io
import json

import pytest

from app.cli import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, load_config_file, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_constants_json_is_reproducible(capsys):
    argv = ["constants", "--n", "3", "--m", "4", "--p", "1.5", "--format", "json", "--no-timestamp"]
    code, first = run(capsys, *argv)
    _, second = run(capsys, *argv)
    assert code == EXIT_PASS
    assert first == second
    envelope = json.loads(first)
    assert envelope["schema_version"] == 1
    assert envelope["generated_at"] is None
    assert envelope["passed"] is None
    assert envelope["config"]["seed"] == 20240601
    verdict = envelope["payload"]["verdicts"][0]
    assert verdict["name"] == "S_tilde below both legacy constants" and verdict["passed"]


def test_constants_chain_table(capsys):
    code, out = run(capsys, "constants", "--n", "3", "--p", "2", "--chain")
    assert code == EXIT_PASS
    assert "RESULT: PASS" in out
    assert "MS > C > S > AT" in out


def test_constants_csv(capsys):
    code, out = run(capsys, "constants", "--n", "4", "--m", "2", "--p", "3", "--t", "0.5", "--format", "csv")
    assert code == EXIT_PASS
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["name", "value", "log_value", "out_of_theorem", "formula"]
    assert "K_t" in {row[0] for row in rows[1:]}


def test_exponent_outside_window_is_a_usage_error(capsys):
    assert main(["constants", "--n", "2", "--p", "2"]) == EXIT_USAGE
    assert "usage error" in capsys.readouterr().err


def test_missing_arguments(capsys):
    assert main(["constants", "--n", "3"]) == EXIT_USAGE


def test_unknown_suite_is_rejected_by_the_parser():
    with pytest.raises(SystemExit) as info:
        main(["verify", "everything"])
    assert info.value.code == 2


def test_non_positive_tolerance(capsys):
    assert main(["constants", "--n", "3", "--p", "2", "--quad-tol", "0"]) == EXIT_USAGE


def test_config_file_fills_unset_flags(tmp_path, capsys):
    path = tmp_path / "run.cfg"
    path.write_text("# constants run\nn = 3\nm = 4\np = 1.5\nformat = json\nno_timestamp = yes\n")
    code, out = run(capsys, "constants", "--config", str(path), "--m", "1")
    assert code == EXIT_PASS
    config = json.loads(out)["config"]
    # flags win over the file
    assert (config["n"], config["m"], config["p"]) == (3, 1, 1.5)
    assert config["format"] == "json"


def test_config_file_errors(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("colour = blue\n")
    assert main(["constants", "--n", "3", "--p", "2", "--config", str(path)]) == EXIT_USAGE
    path.write_text("n = three\n")
    assert main(["constants", "--config", str(path)]) == EXIT_USAGE
    assert main(["constants", "--config", str(tmp_path / "missing.cfg")]) == EXIT_USAGE


def test_load_config_file_types(tmp_path):
    path = tmp_path / "types.cfg"
    path.write_text("grid = 8, 16\nchain = yes\nepsilon = 0.05\nn-points = 300\n")
    assert load_config_file(str(path)) == {"grid": [8, 16], "chain": True, "epsilon": 0.05, "n_points": 300}


def test_verify_identities(capsys):
    code, out = run(capsys, "verify", "identities", "--format", "json", "--no-timestamp")
    assert code == EXIT_PASS
    report = json.loads(out)
    assert report["passed"] is True
    assert report["payload"]["suite"] == "identities"


def test_euclidean_recovery_through_the_cli(capsys):
    code, out = run(capsys, "verify", "sobolev-quotient", "--surface", "flat_ball", "--p", "2",
                    "--seeds", "0", "--format", "json", "--no-timestamp")
    assert code == EXIT_PASS
    names = [c["name"] for c in json.loads(out)["payload"]["checks"]]
    assert names == ["bubble quotient within [0.95, 1.0001] AT(3,2)", "bubble quotient below S(3,2)"]


def test_report_written_to_file(tmp_path, capsys):
    path = tmp_path / "quad.json"
    code, out = run(capsys, "verify", "quadrature-check", "--seed", "5", "--format", "json",
                    "--output", str(path))
    assert code == EXIT_PASS
    assert out == ""
    report = json.loads(path.read_text())
    assert report["config"]["seed"] == 5
    assert len(report["payload"]["artifacts"]["tuples"]) == 20


def test_geometry_export(tmp_path, capsys):
    path = tmp_path / "disk.csv"
    code, _ = run(capsys, "geometry", "export", "--surface", "disk", "--grid", "8,16", "--output", str(path))
    assert code == EXIT_PASS
    lines = path.read_text().splitlines()
    assert len(lines) == 1 + 8 * 16


def test_unknown_surface_is_a_usage_error(capsys):
    assert main(["geometry", "export", "--surface", "torus"]) == EXIT_USAGE


def test_failed_check_exit_code(capsys, monkeypatch):
    from app.schemas.reports import CheckResult, SuiteReport
    from app.services.suites import verification_service

    failing = SuiteReport(suite="identities", passed=False,
                          checks=[CheckResult(name="forced", passed=False)])
    monkeypatch.setattr(verification_service, "run", lambda suite, **options: failing)
    assert main(["verify", "identities"]) == EXIT_FAIL
    assert "forced" in capsys.readouterr().err
