"""
End-to-end tests for the tasync command line.
"""

import json
import os
from unittest.mock import patch

import pytest

from scripts.cli import main, parse_args, run
from tasync.timing import TC_SECONDS, Numerology, timing_constants
from utils.metrics import reset_metrics_collector
from utils.shared import ExitCode


def invoke(argv):
    return run(parse_args(argv))


def data_lines(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


def metadata_lines(text):
    return [line for line in text.splitlines() if line.startswith("#")]


@pytest.fixture(autouse=True)
def clean_metrics():
    reset_metrics_collector()
    yield
    reset_metrics_collector()


class TestParseArgs:
    def test_sim_flags_map_to_document(self):
        config = parse_args(
            ["sim", "--scs", "30", "--sigma-rel", "0.25", "--avg", "4", "--trials", "1000", "--seed", "7"]
        )
        assert config.command == "sim"
        assert config.flag_document == {
            "scs_khz": 30,
            "trials": 1000,
            "seed": 7,
            "avg_window": 4,
            "error_model": {"sigma_rel": 0.25, "sigma_ns": None},
        }

    def test_nlos_and_prior_kinds_are_inferred(self):
        config = parse_args(["sim", "--p-detect", "0.8", "--toa-ns", "500"])
        assert config.flag_document["error_model"] == {"kind": "nlos", "p_detect": 0.8}
        assert config.flag_document["toa_prior"] == {"kind": "fixed", "toa_ns": 500.0}

    def test_sweep_window_list(self):
        config = parse_args(["sweep", "--avg", "1,4,16"])
        assert config.flag_document["avg_windows"] == [1, 4, 16]

    def test_constants_has_no_document(self):
        assert parse_args(["constants"]).flag_document == {}

    @pytest.mark.parametrize(
        "argv",
        [
            ["sim", "--scs", "25"],
            ["sim", "--no-such-flag"],
            ["sim", "--sigma-rel", "0.5", "--sigma-ns", "10"],
            ["sweep", "--avg", "0,2"],
            ["sim", "--workers", "0"],
            ["frobnicate"],
        ],
    )
    def test_usage_errors_exit_2(self, argv, capsys):
        with pytest.raises(SystemExit) as exc:
            parse_args(argv)
        assert exc.value.code == ExitCode.USAGE_ERROR
        assert capsys.readouterr().err


class TestConstantsCommand:
    def test_json_values_are_exact(self, capsys):
        assert invoke(["constants", "--format", "json"]) == ExitCode.OK
        payload = json.loads(capsys.readouterr().out)
        rows = payload["constants"]
        assert [r["scs_khz"] for r in rows] == [15, 30, 60, 120]
        assert rows[0]["t_c"] == TC_SECONDS
        assert rows[0]["slot_width"] == timing_constants(Numerology(0)).slot_width
        assert rows[3]["max_quantization_error"] == rows[3]["slot_width"] / 2
        assert payload["metadata"]["command"] == "constants"

    def test_default_table(self, capsys):
        assert invoke(["constants"]) == ExitCode.OK
        out = capsys.readouterr().out
        assert "260.417" in out
        assert "32.552" in out


class TestBudgetCommand:
    def test_json_total(self, capsys):
        assert invoke(["budget", "--format", "json"]) == ExitCode.OK
        report = json.loads(capsys.readouterr().out)["report"]
        assert report["total_ns"] == 1160.0
        assert report["passed"] is False
        assert report["margin_ns"] == -160.0

    def test_fail_on_target_miss(self, capsys):
        assert invoke(["budget", "--fail-on-target-miss"]) == ExitCode.BUDGET_TARGET_MISSED
        assert "misses its target" in capsys.readouterr().err
        assert invoke(["budget", "--scs", "30", "--fail-on-target-miss"]) == ExitCode.OK

    def test_target_miss_without_flag_is_ok(self):
        assert invoke(["budget"]) == ExitCode.OK

    def test_table_verdict(self, capsys):
        invoke(["budget", "--scs", "120"])
        out = capsys.readouterr().out
        assert "PASS" in out
        assert "542.5" in out

    def test_csv_rows(self, capsys):
        invoke(["budget", "--format", "csv", "--small-area"])
        lines = data_lines(capsys.readouterr().out)
        assert lines[0] == "key,included,contribution_ns,reason"
        assert lines[-1] == "total,yes,770.0,worst-case-sum"

    def test_from_sim_replaces_ta_granularity(self, tmp_path, capsys):
        summary = tmp_path / "summary.json"
        sim_args = ["sim", "--trials", "4000", "--seed", "3", "--output", str(tmp_path / "cdf.csv")]
        assert invoke([*sim_args, "--summary", str(summary)]) == ExitCode.OK
        p_e_ns = json.loads(summary.read_text())["summary"]["p_e_ns"]

        assert invoke(["budget", "--from-sim", str(summary), "--format", "json"]) == ExitCode.OK
        report = json.loads(capsys.readouterr().out)["report"]
        row = next(c for c in report["components"] if c["key"] == "ta_granularity")
        assert row["contribution_ns"] == pytest.approx(p_e_ns, rel=1e-12)
        assert row["reason"] == "substituted"

    def test_from_sim_numerology_mismatch(self, tmp_path, capsys):
        summary = tmp_path / "summary.json"
        invoke(["sim", "--trials", "1000", "--format", "json", "--output", str(summary)])
        code = invoke(["budget", "--scs", "30", "--from-sim", str(summary)])
        assert code == ExitCode.INVALID_SCENARIO
        assert "15 kHz" in capsys.readouterr().err


class TestSimCommand:
    def test_output_is_byte_identical(self, tmp_path):
        args = ["sim", "--trials", "5000", "--seed", "11", "--nlos"]
        first, second, pooled = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
        assert invoke([*args, "-o", str(first)]) == ExitCode.OK
        assert invoke([*args, "-o", str(second)]) == ExitCode.OK
        assert invoke([*args, "-o", str(pooled), "--workers", "2"]) == ExitCode.OK
        assert first.read_bytes() == second.read_bytes() == pooled.read_bytes()

    def test_environment_cannot_change_results(self, tmp_path):
        plain, overridden = tmp_path / "plain.csv", tmp_path / "env.csv"
        assert invoke(["sim", "--trials", "2000", "-o", str(plain)]) == ExitCode.OK
        env = {"TASYNC_DEFAULT_SEED": "7", "TASYNC_DEFAULT_CONFIDENCE": "0.5"}
        with patch.dict(os.environ, env):
            assert invoke(["sim", "--trials", "2000", "-o", str(overridden)]) == ExitCode.OK
        assert "# seed: 42" in metadata_lines(overridden.read_text())
        assert plain.read_bytes() == overridden.read_bytes()

    def test_csv_metadata_and_round_trip_floats(self, tmp_path):
        out = tmp_path / "cdf.csv"
        assert invoke(["sim", "--trials", "2000", "--seed", "5", "-o", str(out)]) == ExitCode.OK
        text = out.read_text()
        meta = metadata_lines(text)
        assert meta[0].startswith("# tool_version: ")
        assert "# command: sim" in meta
        assert "# seed: 5" in meta

        lines = data_lines(text)
        assert lines[0] == "error_ns,cdf"
        rows = [line.split(",") for line in lines[1:]]
        for error_text, cdf_text in rows:
            assert repr(float(error_text)) == error_text
            assert repr(float(cdf_text)) == cdf_text
        assert float(rows[-1][1]) == 1.0

    def test_json_summary(self, capsys):
        code = invoke(["sim", "--trials", "3000", "--format", "json", "--scs", "60"])
        assert code == ExitCode.OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["summary"]["scs_khz"] == 60
        assert payload["summary"]["trials"] == 3000
        assert payload["metadata"]["config"]["scs_khz"] == 60

    def test_config_file_merges_under_flags(self, tmp_path, capsys):
        config = tmp_path / "scenario.json"
        config.write_text(json.dumps({"scs_khz": 30, "trials": 1500, "seed": 3}))
        code = invoke(["sim", "--config", str(config), "--seed", "9", "--format", "json"])
        assert code == ExitCode.OK
        document = json.loads(capsys.readouterr().out)["metadata"]["config"]
        assert document["scs_khz"] == 30
        assert document["trials"] == 1500
        assert document["seed"] == 9

    def test_bad_config_file_is_usage_error(self, tmp_path, capsys):
        config = tmp_path / "broken.json"
        config.write_text("[1, 2")
        assert invoke(["sim", "--config", str(config)]) == ExitCode.USAGE_ERROR
        assert "--config" in capsys.readouterr().err

    def test_unknown_config_field_is_invalid(self, tmp_path, capsys):
        config = tmp_path / "scenario.json"
        config.write_text(json.dumps({"trials": 100, "colour": "blue"}))
        assert invoke(["sim", "--config", str(config)]) == ExitCode.INVALID_SCENARIO
        assert "colour" in capsys.readouterr().err

    def test_negative_sigma_names_the_flag(self, capsys):
        assert invoke(["sim", "--trials", "100", "--sigma-rel", "-1"]) == ExitCode.INVALID_SCENARIO
        assert "--sigma-rel" in capsys.readouterr().err

    def test_sample_limit_exceeded(self, capsys):
        with patch.dict(os.environ, {"TASYNC_MAX_RETAINED_SAMPLES": "1000"}):
            code = invoke(["sim", "--trials", "5000"])
        assert code == ExitCode.INVALID_SCENARIO
        assert "retained-sample limit" in capsys.readouterr().err

    def test_invalid_environment_is_usage_error(self, capsys):
        with patch.dict(os.environ, {"TASYNC_WORKERS": "0"}):
            assert invoke(["constants"]) == ExitCode.USAGE_ERROR
        assert "TASYNC_WORKERS" in capsys.readouterr().err

    def test_unwritable_output(self, tmp_path, capsys):
        blocker = tmp_path / "file.txt"
        blocker.write_text("not a directory")
        code = invoke(["sim", "--trials", "100", "-o", str(blocker / "out.csv")])
        assert code == ExitCode.IO_ERROR
        assert "out.csv" in capsys.readouterr().err

    def test_output_dir_from_environment(self, tmp_path):
        with patch.dict(os.environ, {"TASYNC_OUTPUT_DIR": str(tmp_path)}):
            assert invoke(["sim", "--trials", "100", "-o", "nested/rel.csv"]) == ExitCode.OK
        assert (tmp_path / "nested" / "rel.csv").exists()

    def test_metrics_snapshot_on_stderr(self, capsys):
        assert invoke(["sim", "--trials", "200", "--metrics", "--format", "table"]) == ExitCode.OK
        err = capsys.readouterr().err
        assert "trials_total[scs_khz=15]" in err


class TestSweepCommand:
    def test_output_is_byte_identical(self, tmp_path):
        args = ["sweep", "--avg", "1,2,4", "--trials", "6000", "--seed", "3", "--nlos"]
        first, second, pooled = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
        assert invoke([*args, "-o", str(first)]) == ExitCode.OK
        assert invoke([*args, "-o", str(second)]) == ExitCode.OK
        assert invoke([*args, "-o", str(pooled), "--workers", "2"]) == ExitCode.OK
        assert first.read_bytes() == second.read_bytes() == pooled.read_bytes()

    def test_wide_csv_header(self, capsys):
        assert invoke(["sweep", "--avg", "1,4", "--trials", "2000"]) == ExitCode.OK
        lines = data_lines(capsys.readouterr().out)
        assert lines[0] == "error_ns_k1,cdf_k1,error_ns_k4,cdf_k4"
        assert all(len(line.split(",")) == 4 for line in lines[1:])

    def test_json_results_per_window(self, capsys):
        code = invoke(["sweep", "--avg", "1,2,8", "--trials", "3000", "--format", "json"])
        assert code == ExitCode.OK
        results = json.loads(capsys.readouterr().out)["results"]
        assert [r["avg_window"] for r in results] == [1, 2, 8]
        assert results[2]["summary"]["p_e_ns"] <= results[0]["summary"]["p_e_ns"]


class TestPipelineCommand:
    def test_output_is_byte_identical(self, tmp_path):
        args = ["pipeline", "--epochs", "200", "--drift-ppm", "10", "--seed", "9", "--nlos"]
        first, second, pooled = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
        assert invoke([*args, "-o", str(first)]) == ExitCode.OK
        assert invoke([*args, "-o", str(second)]) == ExitCode.OK
        assert invoke([*args, "-o", str(pooled), "--workers", "2"]) == ExitCode.OK
        assert first.read_bytes() == second.read_bytes() == pooled.read_bytes()

    def test_csv_rows_and_metadata(self, capsys):
        code = invoke(["pipeline", "--epochs", "50", "--drift-ppm", "5", "--seed", "8"])
        assert code == ExitCode.OK
        text = capsys.readouterr().out
        assert "# command: pipeline" in metadata_lines(text)
        lines = data_lines(text)
        assert lines[0] == "epoch,pre_offset_ns,post_offset_ns"
        assert len(lines) == 51
        assert lines[1].startswith("1,")

    def test_json_summary_reports_resync_interval(self, capsys):
        code = invoke(["pipeline", "--epochs", "20", "--format", "json", "--residual-ns", "100"])
        assert code == ExitCode.OK
        summary = json.loads(capsys.readouterr().out)["summary"]
        assert summary["epochs"] == 20
        assert summary["max_resync_interval_s"] == 0.01

    def test_zero_drift_interval_is_null(self, capsys):
        code = invoke(["pipeline", "--epochs", "5", "--drift-ppm", "0", "--format", "json"])
        assert code == ExitCode.OK
        assert json.loads(capsys.readouterr().out)["summary"]["max_resync_interval_s"] is None

    def test_ideal_pipeline_is_exact(self, capsys):
        argv = [
            "pipeline",
            "--epochs",
            "100",
            "--sigma-rel",
            "0",
            "--granularity-ns",
            "0",
            "--drift-ppm",
            "0",
            "--toa-ns",
            "0",
        ]
        assert invoke(argv) == ExitCode.OK
        rows = data_lines(capsys.readouterr().out)[1:]
        assert all(row.endswith(",0.0,0.0") for row in rows)


def test_main_exits_with_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["budget", "--scs", "60", "--fail-on-target-miss"])
    assert exc.value.code == ExitCode.OK
    assert "737.0" in capsys.readouterr().out
