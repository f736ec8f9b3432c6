"""Tests for the command-line front end."""

import csv
import json

import pytest

from pingpong_qkd import cli
from pingpong_qkd.cli import main
from pingpong_qkd.errors import SolverError

CAPACITY = 8.65002


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


class TestAnalyze:
    def test_lossless_defaults(self, tmp_path):
        out = tmp_path / "analyze.json"

        assert main(["analyze", "--out", str(out)]) == 0

        report = read_json(out)
        assert report["delta_i_bits"] == pytest.approx(CAPACITY, abs=0.05)
        assert report["fidelity"] == 1.0
        assert report["i_ae_bits"] == 0.0
        assert report["secure"] is True
        assert (report["v1"], report["v2"]) == (0.25, 0.25)

    def test_near_threshold(self, tmp_path):
        out = tmp_path / "analyze.json"

        assert main(["analyze", "--eta", "0.845", "--out", str(out)]) == 0

        report = read_json(out)
        assert report["eta1"] == report["eta2"] == 0.845
        assert abs(report["delta_i_bits"]) < 0.05

    def test_transmittance_above_one(self, tmp_path):
        assert main(["analyze", "--eta2", "1.2", "--out", str(tmp_path / "x.json")]) == 2

    def test_stdout_when_no_path(self, capsys):
        assert main(["analyze", "--eta1", "0.9", "--eta2", "0.9", "--quiet"]) == 0

        report = json.loads(capsys.readouterr().out)
        assert report["fidelity"] == pytest.approx(0.03218, rel=1e-3)


class TestSweep:
    def test_fig2_table(self, tmp_path):
        out = tmp_path / "fig2.csv"

        assert main(["sweep", "--fig", "2", "--grid-n", "11", "--out", str(out)]) == 0

        rows = read_csv(out)
        assert rows[0] == ["eta1", "eta2", "i_ab_bits", "i_ae_bits", "delta_i_bits", "fidelity"]
        assert len(rows) == 1 + 11 * 11
        assert rows[1][:2] == ["0", "0"]
        assert rows[-1][:2] == ["1", "1"]
        assert float(rows[-1][4]) == pytest.approx(CAPACITY, abs=0.05)
        assert rows[-1][4] == f"{float(rows[-1][4]):.9g}"
        assert b"\r\n" not in out.read_bytes()

    def test_byte_identical_reruns(self, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"

        assert main(["sweep", "--fig", "3", "--grid-n", "21", "--out", str(first)]) == 0
        assert main(["sweep", "--fig", "3", "--grid-n", "21", "--out", str(second)]) == 0

        assert first.read_bytes() == second.read_bytes()

    def test_fig4_envelope_crosses_near_critical_fidelity(self, tmp_path):
        out = tmp_path / "fig4.csv"

        assert main(["sweep", "--fig", "4", "--out", str(out)]) == 0

        rows = read_csv(out)
        assert rows[0] == ["fidelity_bin", "delta_i_min_bits"]
        points = [(float(f), float(d)) for f, d in rows[1:]]
        last_negative = max(f for f, d in points if d < 0)
        first_secure = min(f for f, d in points if d >= 0)
        assert (last_negative + first_secure) / 2 == pytest.approx(0.02, abs=0.01)
        assert points[-1][1] == pytest.approx(CAPACITY, abs=0.01)

    def test_json_format(self, tmp_path):
        out = tmp_path / "fig2.json"

        assert main(["sweep", "--grid-n", "3", "--format", "json", "--out", str(out)]) == 0

        table = read_json(out)
        assert len(table) == 9
        assert set(table[0]) == {"eta1", "eta2", "i_ab_bits", "i_ae_bits", "delta_i_bits", "fidelity"}

    def test_envelope_needs_resolution(self, tmp_path):
        assert main(["sweep", "--fig", "4", "--grid-n", "20", "--out", str(tmp_path / "x.csv")]) == 2

    def test_unwritable_output(self, tmp_path):
        assert main(["sweep", "--grid-n", "3", "--out", str(tmp_path / "missing" / "x.csv")]) == 3


class TestSimulate:
    def test_summary_and_run_dump(self, tmp_path):
        out, runs = tmp_path / "summary.json", tmp_path / "runs.csv"

        code = main([
            "simulate", "--n-runs", "2000", "--disclosure-fraction", "0.2", "--seed", "4",
            "--out", str(out), "--runs-out", str(runs),
        ])

        assert code == 0
        summary = read_json(out)
        assert set(summary) == {
            "empirical_snr", "empirical_mutual_info_bits", "empirical_fidelity", "analytic_snr",
            "analytic_fidelity", "n_runs", "seed", "abort", "fidelity_stderr", "n_disclosed", "key_length",
        }
        assert summary["abort"] is False
        assert summary["n_disclosed"] + summary["key_length"] == 2000
        rows = read_csv(runs)
        assert rows[0] == ["basis", "alpha", "x", "bob_measurement", "disclosed"]
        assert len(rows) == 2001
        assert sum(row[4] == "true" for row in rows[1:]) == summary["n_disclosed"]

    def test_deterministic_output(self, tmp_path):
        paths = [tmp_path / "a.json", tmp_path / "b.json"]
        for path in paths:
            assert main(["simulate", "--n-runs", "1000", "--eta", "0.9", "--seed", "12", "--out", str(path)]) == 0

        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_lossy_line_aborts(self, tmp_path):
        out = tmp_path / "summary.json"

        assert main(["simulate", "--n-runs", "20000", "--eta", "0.5", "--out", str(out)]) == 0

        summary = read_json(out)
        assert summary["analytic_fidelity"] < 0.02
        assert summary["abort"] is True

    def test_too_few_disclosed_runs(self, tmp_path):
        code = main([
            "simulate", "--n-runs", "100", "--disclosure-fraction", "0.01", "--out", str(tmp_path / "s.json"),
        ])
        assert code == 4

    def test_minimum_session_size(self, tmp_path):
        assert main(["simulate", "--n-runs", "50", "--out", str(tmp_path / "s.json")]) == 2

    @pytest.mark.slow
    def test_no_attack_session(self, tmp_path):
        out = tmp_path / "summary.json"

        assert main(["simulate", "--n-runs", "100000", "--out", str(out)]) == 0

        summary = read_json(out)
        assert summary["empirical_mutual_info_bits"] == pytest.approx(CAPACITY, abs=0.1)
        assert summary["abort"] is False


class TestThresholds:
    def test_report(self, tmp_path):
        out = tmp_path / "thresholds.json"

        assert main(["thresholds", "--grid-n", "100", "--bins", "20", "--out", str(out)]) == 0

        report = read_json(out)
        assert report["eta_star"] == pytest.approx(0.845, abs=0.002)
        assert report["f_critical"] == pytest.approx(0.02, abs=0.01)
        assert report["grid_n"] == 100 and report["bins"] == 20
        assert report["tolerance"] == 1e-4

    def test_weak_squeezing(self, tmp_path):
        out = tmp_path / "thresholds.json"

        assert main(["thresholds", "--r", "1", "--grid-n", "60", "--bins", "20", "--out", str(out)]) == 0

        report = read_json(out)
        assert 0 < report["eta_star"] < 1
        assert 0 < report["f_critical"] < 1

    def test_solver_failure(self, tmp_path, monkeypatch):
        def fail(*args, **kwargs):
            raise SolverError("no sign change", 1.0, 2.0)

        monkeypatch.setattr(cli, "thresholds", fail)
        assert main(["thresholds", "--out", str(tmp_path / "t.json")]) == 5


class TestConfiguration:
    def test_flags_override_config_file(self, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("r=2\nsigma-prime2=50\neta1=0.9\n", encoding="utf-8")
        out = tmp_path / "analyze.json"

        assert main(["analyze", "--config", str(config), "--r", "3", "--out", str(out)]) == 0

        report = read_json(out)
        assert report["r"] == 3.0
        assert report["sigma_prime2"] == 50.0
        assert report["eta1"] == 0.9

    def test_leg_flag_overrides_config_file_eta(self, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("eta=0.9\n", encoding="utf-8")
        out = tmp_path / "analyze.json"

        assert main(["analyze", "--config", str(config), "--eta1", "0.5", "--out", str(out)]) == 0

        report = read_json(out)
        assert report["eta1"] == 0.5
        assert report["eta2"] == 0.9

    def test_eta_flag_sets_both_legs_over_config_file(self, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("eta1=0.3\neta2=0.4\n", encoding="utf-8")
        out = tmp_path / "analyze.json"

        assert main(["analyze", "--config", str(config), "--eta", "0.8", "--out", str(out)]) == 0

        report = read_json(out)
        assert report["eta1"] == report["eta2"] == 0.8

    def test_missing_config_file(self, tmp_path):
        assert main(["analyze", "--config", str(tmp_path / "absent.cfg")]) == 3

    def test_unknown_config_key(self, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("squeeze=3\n", encoding="utf-8")

        assert main(["analyze", "--config", str(config)]) == 2

    def test_help_lists_exit_codes(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["--help"])

        assert e.value.code == 0
        assert "exit codes" in capsys.readouterr().out
