"""End-to-end CLI behavior: validation, outputs, determinism."""

import json
import math

from semimartreg.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload, indent=1))
    return str(path)


def zero_noise_config(tmp_path, **extra):
    payload = {
        "signal": {"coeffs": [0.4, 0.3, -0.2]},
        "noise": {"family": "levy", "rho1": 0.0, "rho2": 0.0},
        "n": 4,
        "M": 64,
        "J": 8,
        "reps": 10,
        "seed": 5,
        **extra,
    }
    return write_config(tmp_path, "zero.json", payload)


def run(argv):
    return main(argv)


def csv_rows(path):
    # read raw bytes: text mode would fold the RFC-4180 \r\n line endings
    return path.read_bytes().decode("utf-8").strip().split("\r\n")


class TestSimulate:
    def test_zero_noise_integral(self, tmp_path):
        cfg = zero_noise_config(tmp_path)
        out = tmp_path / "out"
        assert run(["simulate", "--config", cfg, "--out-dir", str(out), "--workers", "1"]) == EXIT_OK
        rows = csv_rows(out / "path.csv")
        assert rows[0] == "t,dy,config_hash"
        total = sum(float(r.split(",")[1]) for r in rows[1:])
        # integral of S over [0, 4] is 4 * theta_1
        assert abs(total - 4 * 0.4) < 1e-8

    def test_record_has_provenance(self, tmp_path):
        cfg = zero_noise_config(tmp_path)
        out = tmp_path / "out"
        run(["simulate", "--config", cfg, "--out-dir", str(out), "--workers", "1"])
        record = json.loads((out / "simulate_record.json").read_text())
        assert record["command"] == "simulate"
        assert len(record["config_hash"]) == 64
        assert record["seed"] == 5
        assert "version" in record

    def test_json_format_embeds_table(self, tmp_path):
        cfg = zero_noise_config(tmp_path)
        out = tmp_path / "out"
        run(["simulate", "--config", cfg, "--out-dir", str(out), "--workers", "1",
             "--format", "json"])
        assert not (out / "path.csv").exists()
        record = json.loads((out / "simulate_record.json").read_text())
        assert record["tables"]["path"]["header"] == ["t", "dy", "config_hash"]


class TestDeterminism:
    def test_oracle_check_rerun_is_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, "oracle.json", {
            "signal": {"coeffs": [0.5, 0.2]},
            "noise": {"family": "levy", "rho1": 0.5, "rho2": 0.5},
            "n": 50,
            "M": 64,
            "J": 8,
            "reps": 25,
            "seed": 11,
            "delta": 0.05,
        })
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            assert run(["oracle-check", "--config", cfg, "--out-dir", str(out),
                        "--workers", "1"]) == EXIT_OK
            outs.append(out)
        rec_a = (outs[0] / "oracle_check_record.json").read_bytes()
        rec_b = (outs[1] / "oracle_check_record.json").read_bytes()
        assert rec_a == rec_b
        assert (outs[0] / "members.csv").read_bytes() == (outs[1] / "members.csv").read_bytes()

    def test_workers_do_not_change_bytes(self, tmp_path):
        cfg = write_config(tmp_path, "w.json", {
            "signal": {"coeffs": [0.4, 0.3]},
            "noise": {"family": "levy", "rho1": 0.7, "rho2": 0.5},
            "n": 20, "M": 64, "J": 6, "reps": 12, "seed": 5,
        })
        a, b = tmp_path / "w1", tmp_path / "w2"
        assert run(["estimate", "--config", cfg, "--out-dir", str(a), "--workers", "1"]) == EXIT_OK
        assert run(["estimate", "--config", cfg, "--out-dir", str(b), "--workers", "2"]) == EXIT_OK
        assert (a / "estimate_record.json").read_bytes() == (b / "estimate_record.json").read_bytes()

    def test_env_seed_overrides(self, tmp_path, monkeypatch):
        cfg = zero_noise_config(tmp_path)
        out1, out2 = tmp_path / "e1", tmp_path / "e2"
        monkeypatch.setenv("SEMIMART_SEED", "99")
        run(["simulate", "--config", cfg, "--out-dir", str(out1), "--workers", "1"])
        monkeypatch.delenv("SEMIMART_SEED")
        run(["simulate", "--config", cfg, "--seed", "99", "--out-dir", str(out2),
             "--workers", "1"])
        assert (out1 / "simulate_record.json").read_bytes() == (out2 / "simulate_record.json").read_bytes()


class TestEstimate:
    def test_projection_estimator(self, tmp_path):
        cfg = write_config(tmp_path, "proj.json", {
            "signal": {"coeffs": [0.0]},
            "noise": {"family": "levy", "rho1": 1.0, "rho2": 0.0},
            "n": 25, "M": 64, "J": 5, "reps": 200, "seed": 3,
            "estimator": {"projection": 5},
        })
        out = tmp_path / "out"
        assert run(["estimate", "--config", cfg, "--out-dir", str(out), "--workers", "1"]) == EXIT_OK
        record = json.loads((out / "estimate_record.json").read_text())
        risk = record["report"]["mean_risk"]
        se = record["report"]["std_error"]
        assert abs(risk - 5 / 25) <= 4 * se

    def test_selection_estimator_with_family(self, tmp_path):
        cfg = write_config(tmp_path, "sel.json", {
            "signal": {"sobolev": {"k": 1, "r": 1.0, "J": 8}},
            "noise_family": {
                "members": [
                    {"family": "levy", "rho1": 1.0, "rho2": 0.0},
                    {"family": "levy", "rho1": 0.6, "rho2": 0.8},
                ],
                "rho_lower": 0.36,
                "sigma_star": 1.0,
            },
            "n": 50, "M": 64, "J": 8, "reps": 20, "seed": 4,
            "sigma_source": {"known": 1.0},
        })
        out = tmp_path / "out"
        assert run(["estimate", "--config", cfg, "--out-dir", str(out), "--workers", "1"]) == EXIT_OK
        record = json.loads((out / "estimate_record.json").read_text())
        assert record["report"]["argmax_member"] in (0, 1)
        assert "selection_example" in record
        assert record["selection_example"]["sigma_hat"] == 1.0


class TestImproveCheck:
    def test_improve_check_runs(self, tmp_path):
        cfg = write_config(tmp_path, "imp.json", {
            "signal": {"coeffs": [0.5, 0.3, 0.2]},
            "noise": {"family": "levy", "rho1": 1.0, "rho2": 0.0},
            "n": 100, "M": 64, "J": 10, "reps": 200, "seed": 8,
            "estimator": "improved",
            "shrinkage": {"d": 10},
        })
        out = tmp_path / "out"
        assert run(["improve-check", "--config", cfg, "--out-dir", str(out),
                    "--workers", "1"]) == EXIT_OK
        record = json.loads((out / "improve_check_record.json").read_text())
        rep = record["report"]
        assert rep["improvement_bound"] < 0
        assert rep["delta_hat"] < 0


class TestEfficiencySweep:
    def test_three_rows_finite_ratio(self, tmp_path):
        cfg = write_config(tmp_path, "eff.json", {
            "signal": {"coeffs": [0.0]},
            "noise_family": {
                "members": [{"family": "levy", "rho1": 1.0, "rho2": 0.0}],
                "rho_lower": 0.9,
                "sigma_star": 1.0,
            },
            "n": 50, "M": 64, "reps": 25, "seed": 12,
            "efficiency": {"k": 1, "r": 1.0, "n_values": [40, 60, 90], "n_signals": 2},
        })
        out = tmp_path / "out"
        assert run(["efficiency-sweep", "--config", cfg, "--out-dir", str(out),
                    "--workers", "1"]) == EXIT_OK
        rows = csv_rows(out / "efficiency.csv")
        assert rows[0] == "n,estimator,risk,se,ratio,config_hash"
        assert len(rows) == 4
        for row in rows[1:]:
            ratio = float(row.split(",")[4])
            assert math.isfinite(ratio) and ratio > 0


class TestValidation:
    def test_missing_file(self, tmp_path, capsys):
        assert run(["simulate", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG
        assert "cannot read config" in capsys.readouterr().err

    def test_invalid_json_reports_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{\n  "n": 10,\n  oops\n}\n')
        assert run(["simulate", "--config", str(bad)]) == EXIT_CONFIG
        assert "line 3" in capsys.readouterr().err

    def test_schema_violation_names_field(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "bad2.json", {
            "signal": {"coeffs": [1.0]},
            "noise": {"family": "levy", "rho1": -1.0, "rho2": 0.0},
            "n": 10,
        })
        assert run(["simulate", "--config", cfg]) == EXIT_CONFIG
        assert "noise" in capsys.readouterr().err

    def test_delta_range_checked(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "bad3.json", {
            "signal": {"coeffs": [1.0]},
            "noise": {"family": "levy", "rho1": 1.0, "rho2": 0.0},
            "n": 10, "delta": 0.5,
        })
        assert run(["oracle-check", "--config", cfg]) == EXIT_CONFIG
        assert "delta" in capsys.readouterr().err

    def test_runtime_error_exit_code(self, tmp_path, capsys):
        # signal norm above r* violates the improvement hypothesis at run time
        cfg = write_config(tmp_path, "runtime.json", {
            "signal": {"coeffs": [50.0]},
            "noise": {"family": "levy", "rho1": 1.0, "rho2": 0.0},
            "n": 20, "M": 64, "J": 10, "reps": 10, "seed": 1,
            "shrinkage": {"d": 5},
        })
        assert run(["improve-check", "--config", cfg, "--workers", "1",
                    "--out-dir", str(tmp_path / "o")]) == EXIT_RUNTIME
        assert "r_star" in capsys.readouterr().err

    def test_unknown_family(self, tmp_path):
        cfg = write_config(tmp_path, "bad4.json", {
            "signal": {"coeffs": [1.0]},
            "noise": {"family": "stable", "rho1": 1.0, "rho2": 0.0},
            "n": 10,
        })
        assert run(["simulate", "--config", cfg]) == EXIT_CONFIG

    def test_efficiency_requires_family(self, tmp_path):
        cfg = write_config(tmp_path, "bad5.json", {
            "signal": {"coeffs": [1.0]},
            "noise": {"family": "levy", "rho1": 1.0, "rho2": 0.0},
            "n": 10,
            "efficiency": {"k": 1, "r": 1.0, "n_values": [10, 20]},
        })
        assert run(["efficiency-sweep", "--config", cfg,
                    "--out-dir", str(tmp_path / "o")]) == EXIT_CONFIG
