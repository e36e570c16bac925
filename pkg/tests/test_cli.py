import json
import logging

import pandas as pd
import pytest

from regula.cli import EXIT_CERTIFY, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_OK, EXIT_VERIFY, main
from regula.config_manager import SEED_ENV

ROTATION = {"kind": "rotation", "angle": 1.5707963267948966, "dim": 2}


@pytest.fixture(autouse=True)
def restore_logging(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    monkeypatch.delenv("REGULA_LOG_LEVEL", raising=False)
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def config_file(tmp_path):
    def write(**data):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(data))
        return str(path)
    return write


def read_json(path):
    with open(path) as f:
        return json.load(f)


class TestRun:
    def test_default_run(self, tmp_path):
        out = tmp_path / "out"
        assert main(["run", "--out", str(out)]) == EXIT_OK
        df = pd.read_csv(out / "trace.csv")
        assert len(df) == 101
        assert list(df.columns) == ["n", "residual", "weight", "delta_partial"]
        assert df["residual"][0] == 3.0
        summary = read_json(out / "summary.json")
        assert summary["empirical_index"] == {"0.1": 1}

    def test_points_and_horizon(self, tmp_path, config_file):
        path = config_file(operator=ROTATION, schedule={"kind": "constant", "lambda": 0.5},
                           horizon=10, include_points=True)
        assert main(["run", "--config", path, "--out", str(tmp_path)]) == EXIT_OK
        df = pd.read_csv(tmp_path / "trace.csv")
        assert len(df) == 11
        assert {"x_0", "x_1"} <= set(df.columns)


class TestCertify:
    def test_rotation_passes(self, tmp_path, config_file):
        path = config_file(operator=ROTATION, schedule={"kind": "constant", "lambda": 0.5},
                           eps=[0.5], certify_samples=200)
        assert main(["certify", "--config", path, "--out", str(tmp_path)]) == EXIT_OK
        report = read_json(tmp_path / "report.json")
        assert report["bound_holds"] is True
        assert report["hypothesis_verified"] is True
        assert report["phi"] == 64

    def test_several_eps(self, tmp_path):
        assert main(["certify", "--eps", "0.5", "0.1", "--out", str(tmp_path)]) == EXIT_OK
        report = read_json(tmp_path / "report.json")
        assert [r["eps"] for r in report["reports"]] == [0.5, 0.1]
        assert [r["phi"] for r in report["reports"]] == [324, 8100]

    def test_understated_kappa(self, tmp_path):
        assert main(["certify", "--kappa", "0.2", "--out", str(tmp_path)]) == EXIT_CERTIFY
        report = read_json(tmp_path / "report.json")
        strict = next(c for c in report["checks"] if c["name"] == "check_strict")
        assert strict["ok"] is False

    def test_lambda_not_above_kappa(self, tmp_path, capsys):
        assert main(["certify", "--lambda", "0.2", "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "regula: error:" in capsys.readouterr().err
        assert not (tmp_path / "report.json").exists()

    def test_b_below_residual(self, tmp_path, config_file):
        path = config_file(b=0.5, certify_samples=100)
        assert main(["certify", "--config", path, "--out", str(tmp_path)]) == EXIT_HYPOTHESIS
        report = read_json(tmp_path / "report.json")
        assert report["hypothesis_verified"] is False

    def test_several_lambdas_need_sweep(self, tmp_path):
        assert main(["certify", "--lambda", "0.5", "0.75", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_missing_config(self, tmp_path):
        assert main(["certify", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG

    def test_deterministic_artifacts(self, tmp_path):
        args = ["certify", "--eps", "0.5", "--seed", "11"]
        assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
        assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
        assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
        provenance = read_json(tmp_path / "a" / "report.json")["provenance"]
        assert provenance["seed"] == 11
        assert provenance["operator_spec"] == {"kind": "scaling", "dim": 1, "a": -2.0}
        assert provenance["schedule_spec"]["kind"] == "constant"
        assert provenance["schedule_spec"]["lambda"] == pytest.approx(2.0 / 3.0)

    def test_provenance_records_claimed_kappa(self, tmp_path):
        assert main(["certify", "--kappa", "0.2", "--out", str(tmp_path)]) == EXIT_CERTIFY
        provenance = read_json(tmp_path / "report.json")["provenance"]
        assert provenance["operator_spec"]["kappa"] == 0.2
        assert provenance["seed"] == 0


class TestSweep:
    def test_grid(self, tmp_path):
        code = main(["sweep", "--eps", "0.5", "0.1", "--lambda", "0.5", "0.75", "--out", str(tmp_path)])
        assert code == EXIT_OK
        df = pd.read_csv(tmp_path / "sweep.csv")
        assert len(df) == 4
        assert df["eps"].tolist() == [0.5, 0.5, 0.1, 0.1]
        assert df["lambda"].tolist() == [0.5, 0.75, 0.5, 0.75]
        assert df["bound_holds"].all()

    def test_bad_cell_is_recorded(self, tmp_path):
        code = main(["sweep", "--eps", "0.5", "--lambda", "0.2", "0.5", "--out", str(tmp_path)])
        assert code == EXIT_OK
        df = pd.read_csv(tmp_path / "sweep.csv", keep_default_na=False)
        assert df.loc[0, "error"] != ""
        assert df.loc[1, "error"] == ""


class TestVerify:
    def test_suite_passes(self, tmp_path, config_file):
        path = config_file(operator=ROTATION, schedule={"kind": "constant", "lambda": 0.5},
                           eps=[0.5], n_samples=200)
        assert main(["verify", "--config", path, "--out", str(tmp_path)]) == EXIT_OK
        suite = read_json(tmp_path / "suite.json")
        assert suite["ok"] is True

    def test_corrupted_kappa(self, tmp_path, config_file):
        path = config_file(eps=[0.5], n_samples=200)
        assert main(["verify", "--config", path, "--kappa", "0.2", "--out", str(tmp_path)]) == EXIT_VERIFY
        suite = read_json(tmp_path / "suite.json")
        failed = {o["name"] for o in suite["suites"][0]["outcomes"] if not o["ok"]}
        assert "check_strict" in failed

    def test_hand_edited_trace(self, tmp_path):
        assert main(["run", "--out", str(tmp_path)]) == EXIT_OK
        df = pd.read_csv(tmp_path / "trace.csv")
        assert main(["verify", "--trace", str(tmp_path / "trace.csv"), "--out", str(tmp_path / "v1")]) == EXIT_OK

        df.loc[5, "residual"] = 1.0
        edited = tmp_path / "edited.csv"
        df.to_csv(edited, index=False)
        assert main(["verify", "--trace", str(edited), "--out", str(tmp_path / "v2")]) == EXIT_VERIFY
        suite = read_json(tmp_path / "v2" / "suite.json")
        monotone = suite["suites"][0]["outcomes"][0]
        assert monotone["name"] == "check_monotone_residuals"
        assert monotone["witness"] == {"first_violation": 4}

    def test_unreadable_trace(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        assert main(["verify", "--trace", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
