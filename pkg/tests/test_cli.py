import json
import math

import numpy as np
import pytest

from hbrd import cli
from hbrd.verify import PropertyResult

from conftest import INSTANCE_DIR

MIXED_TR = str(INSTANCE_DIR / "trace_mixed_2x2.json")
MISMATCHED_MSE = str(INSTANCE_DIR / "mse_mismatched_2x2.json")
MIXED_SC = str(INSTANCE_DIR / "sc_mixed_2x2.json")
DEGRADED = str(INSTANCE_DIR / "degraded_2x2.json")


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestCanonicalize:
    def test_mixed_instance(self, capsys):
        code, out, _ = run_cli(capsys, "canonicalize", MIXED_TR)
        assert code == 0
        doc = json.loads(out)
        assert doc["canonical"]["l1"] == 1 and doc["canonical"]["l2"] == 1
        np.testing.assert_allclose(doc["canonical"]["A"], [2.0], atol=1e-9)
        np.testing.assert_allclose(doc["canonical"]["B"], [-1.0], atol=1e-9)
        assert doc["degraded"] is None

    def test_degraded_notice(self, capsys):
        code, out, _ = run_cli(capsys, "canonicalize", DEGRADED)
        assert code == 0
        doc = json.loads(out)
        assert doc["degraded"] == [1, 2]
        assert doc["canonical"]["l1"] == 0  # decoder 1 stronger everywhere

    def test_malformed_matrix_row(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(
            json.dumps(
                {
                    "schema_version": 1,
                    "k": 2,
                    "K_X_given_Y1": [[1.0, 0.0], [0.0]],
                    "K_X_given_Y2": [[1.0, 0.0], [0.0, 1.0]],
                    "distortion": {"type": "trace", "d1": 0.1, "d2": 0.1},
                }
            )
        )
        code, _, err = run_cli(capsys, "canonicalize", str(bad))
        assert code == 2
        assert "K_X_given_Y1 row 1" in err

    def test_validation_error_exit_code(self, tmp_path, capsys):
        doc = json.loads(open(MIXED_TR).read())
        doc["distortion"]["d1"] = 0.5  # above the smallest eigenvalue
        bad = tmp_path / "infeasible.json"
        bad.write_text(json.dumps(doc))
        code, out, _ = run_cli(capsys, "canonicalize", str(bad))
        assert code == 2
        assert "DistortionInfeasible" in json.loads(out)["errors"][0]


class TestRate:
    def test_mse_value(self, capsys):
        code, out, _ = run_cli(capsys, "rate", MISMATCHED_MSE, "--family", "mse")
        assert code == 0
        doc = json.loads(out)
        np.testing.assert_allclose(
            doc["rates"]["r_nats"], 0.5 * math.log(10.0), atol=1e-12
        )
        assert doc["rates"]["unit"] == "nats"

    def test_family_mismatch(self, capsys):
        code, _, err = run_cli(capsys, "rate", MISMATCHED_MSE, "--family", "tr")
        assert code == 2
        assert "family mismatch" in err

    def test_bits_flag(self, capsys):
        code, out, _ = run_cli(capsys, "rate", MISMATCHED_MSE, "--family", "mse", "--bits")
        doc = json.loads(out)
        np.testing.assert_allclose(
            doc["rates"]["r_bits"], doc["rates"]["r_nats"] / math.log(2.0), rtol=1e-15
        )

    def test_trace_solver_value(self, capsys):
        code, out, _ = run_cli(
            capsys, "rate", MIXED_TR, "--family", "tr", "--restarts", "24", "--seed", "0"
        )
        assert code == 0
        doc = json.loads(out)
        np.testing.assert_allclose(doc["rates"]["r_nats"], 1.7808784, atol=1e-3)
        assert "argmin" in doc and "diagnostics" in doc

    def test_byte_stable_output(self, capsys):
        args = ("rate", MIXED_TR, "--family", "tr", "--restarts", "8", "--seed", "7")
        _, out1, _ = run_cli(capsys, *args)
        _, out2, _ = run_cli(capsys, *args)
        assert out1 == out2


class TestBounds:
    def test_trace_panel_reports_gap(self, capsys):
        code, out, _ = run_cli(
            capsys, "bounds", MIXED_TR, "--restarts", "24", "--seed", "0"
        )
        assert code == 0
        doc = json.loads(out)
        gap = doc["bounds"]["gap_nats"]
        np.testing.assert_allclose(gap, 1.7808784 - 1.7802127, atol=2e-4)
        assert doc["bounds"]["minimax"]["label"] == "certified"

    def test_mse_panel_is_tight(self, capsys):
        code, out, _ = run_cli(
            capsys, "bounds", MISMATCHED_MSE, "--restarts", "6", "--seed", "0"
        )
        assert code == 0
        doc = json.loads(out)
        b = doc["bounds"]
        assert abs(b["tightness_gap_nats"]) <= 1e-10
        assert b["achievable_closed_form"]["label"] == "certified"
        assert b["inner_search_estimates"]["mlb"]["label"] == "heuristic"


class TestSweep:
    def test_single_step_matches_rate(self, capsys):
        _, rate_out, _ = run_cli(
            capsys, "rate", MIXED_TR, "--family", "tr", "--restarts", "16", "--seed", "0"
        )
        want = json.loads(rate_out)["rates"]["r_nats"]
        code, out, _ = run_cli(
            capsys,
            "sweep", MIXED_TR,
            "--axis", "both", "--start", "0.15", "--stop", "0.15", "--steps", "1",
            "--restarts", "16", "--seed", "0", "--format", "csv",
        )
        assert code == 0
        header, row = out.strip().splitlines()
        assert header.startswith("axis_value,")
        got = float(row.split(",")[6])
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_rows_cross_feasibility_boundary(self, capsys):
        code, out, _ = run_cli(
            capsys,
            "sweep", MIXED_TR,
            "--axis", "both", "--start", "0.12", "--stop", "0.4", "--steps", "5",
            "--restarts", "8", "--seed", "0", "--format", "csv",
        )
        assert code == 0
        rows = out.strip().splitlines()[1:]
        assert len(rows) == 5
        flags = [r.split(",")[3] for r in rows]
        assert flags[0] == "yes" and flags[-1] == "no"

    def test_monotone_nonincreasing(self, capsys):
        code, out, _ = run_cli(
            capsys,
            "sweep", MISMATCHED_MSE,
            "--axis", "both", "--start", "0.5", "--stop", "1.0", "--steps", "6",
            "--format", "csv",
        )
        assert code == 0
        rates = [float(r.split(",")[6]) for r in out.strip().splitlines()[1:]]
        assert all(b <= a + 1e-9 for a, b in zip(rates, rates[1:]))


class TestVerifyCommand:
    def test_small_suite_record(self, capsys):
        code, out, _ = run_cli(capsys, "verify", "diag-inverse", "--trials", "10")
        assert code == 0
        doc = json.loads(out)
        suite = doc["suites"][0]
        assert suite["name"] == "diag-inverse"
        assert suite["trials"] == 10
        assert suite["failures"] == 0

    def test_unknown_suite_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["verify", "no-such-suite"])
        assert exc.value.code == 2
        assert "diag-inverse" in capsys.readouterr().err

    def test_failure_exit_code(self, capsys, monkeypatch):
        def failing(trials, seed):
            return PropertyResult("diag-inverse", trials, 3, 1.0, seed)

        monkeypatch.setattr(cli, "check_diag_inverse_lemma", failing)
        code, out, _ = run_cli(capsys, "verify", "diag-inverse", "--trials", "5")
        assert code == 4
        assert json.loads(out)["suites"][0]["failures"] == 3
