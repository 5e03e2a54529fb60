"""
Tests for configuration documents: defaults, merging, validation and
conversion into scenarios.
"""

import math
import os
from unittest.mock import patch

import pytest

from tasync.channel import LosGaussianModel, NlosModel
from tasync.errors import InvalidScenarioError
from tasync.scenario_schema import (
    default_document,
    error_model_from_document,
    merge_documents,
    pipeline_from_document,
    prior_from_document,
    resolve_document,
    scenario_from_document,
    validate_document,
)
from tasync.simulator import FixedToa, UniformInRange, UniformInSlot
from tasync.timing import Numerology, timing_constants


class TestDefaultDocument:
    @pytest.mark.parametrize("command", ["sim", "sweep", "budget", "pipeline"])
    def test_defaults_validate(self, command):
        document = default_document(command)
        assert validate_document(command, document) is document

    def test_environment_does_not_change_defaults(self):
        env = {
            "TASYNC_DEFAULT_SEED": "7",
            "TASYNC_DEFAULT_TRIALS": "10",
            "TASYNC_DEFAULT_CONFIDENCE": "0.5",
            "TASYNC_DEFAULT_TARGET_NS": "1",
        }
        with patch.dict(os.environ, env, clear=True):
            sim = resolve_document("sim", None, {})
            budget = resolve_document("budget", None, {})
        assert (sim["seed"], sim["trials"], sim["confidence"]) == (42, 1_000_000, 0.999)
        assert budget["target_ns"] == 1000.0

    def test_sweep_windows(self):
        assert default_document("sweep")["avg_windows"] == [1, 2, 4, 8, 16]
        assert "avg_window" not in default_document("sweep")

    def test_unknown_command(self):
        with pytest.raises(InvalidScenarioError):
            default_document("constants")


class TestMergeDocuments:
    def test_deep_merge_without_mutation(self):
        base = {"a": 1, "model": {"kind": "los", "sigma_rel": 0.5}}
        override = {"model": {"sigma_rel": 0.25}}
        merged = merge_documents(base, override)
        assert merged == {"a": 1, "model": {"kind": "los", "sigma_rel": 0.25}}
        assert base["model"]["sigma_rel"] == 0.5

    def test_none_deletes(self):
        merged = merge_documents({"model": {"sigma_rel": 0.5}}, {"model": {"sigma_rel": None, "sigma_ns": 10}})
        assert merged == {"model": {"sigma_ns": 10}}

    def test_kind_change_replaces_section(self):
        base = {"toa_prior": {"kind": "slot", "center_index": 100}}
        merged = merge_documents(base, {"toa_prior": {"kind": "fixed", "toa_ns": 500.0, "lo_ns": None}})
        assert merged == {"toa_prior": {"kind": "fixed", "toa_ns": 500.0}}

    def test_lists_are_replaced(self):
        merged = merge_documents({"avg_windows": [1, 2, 4]}, {"avg_windows": [8]})
        assert merged["avg_windows"] == [8]


class TestValidateDocument:
    def test_error_lists_fields_and_flags(self):
        document = default_document("sim")
        document["trials"] = 0
        document["error_model"]["p_detect"] = 2.0
        with pytest.raises(InvalidScenarioError) as exc:
            validate_document("sim", document)
        message = str(exc.value)
        assert "'trials'" in message and "(--trials)" in message
        assert "(--p-detect)" in message

    def test_unsupported_scs(self):
        document = default_document("budget")
        document["scs_khz"] = 25
        with pytest.raises(InvalidScenarioError, match="--scs"):
            validate_document("budget", document)

    def test_bool_is_not_a_count(self):
        document = default_document("pipeline")
        document["epochs"] = True
        with pytest.raises(InvalidScenarioError, match="epochs"):
            validate_document("pipeline", document)

    def test_empty_window_list(self):
        document = default_document("sweep")
        document["avg_windows"] = []
        with pytest.raises(InvalidScenarioError, match="avg_windows"):
            validate_document("sweep", document)


class TestResolveDocument:
    def test_precedence(self):
        document = resolve_document(
            "sim",
            file_document={"scs_khz": 30, "seed": 1, "trials": 500},
            flag_document={"seed": 2},
        )
        assert document["scs_khz"] == 30
        assert document["trials"] == 500
        assert document["seed"] == 2
        assert document["error_model"] == {"kind": "los", "sigma_rel": 0.5}


class TestConversions:
    def test_relative_and_absolute_sigma(self):
        n = Numerology(1)
        slot = timing_constants(n).slot_width
        model = error_model_from_document({"kind": "los", "sigma_rel": 0.25}, n)
        assert model == LosGaussianModel(0.25 * slot)
        model = error_model_from_document({"kind": "los", "sigma_ns": 40.0}, n)
        assert math.isclose(model.sigma, 40e-9)

    def test_nlos_defaults(self):
        n = Numerology(0)
        slot = timing_constants(n).slot_width
        model = error_model_from_document({"kind": "nlos"}, n)
        assert isinstance(model, NlosModel)
        assert model.sigma_detected == 0.5 * slot
        assert model.sigma_blocked == slot
        assert math.isclose(model.bias_bp, 100e-9)
        assert model.p_detect == 0.9

    def test_priors(self):
        assert prior_from_document({"kind": "slot", "center_index": 7}) == UniformInSlot(7)
        prior = prior_from_document({"kind": "range", "lo_ns": 100.0, "hi_ns": 200.0})
        assert isinstance(prior, UniformInRange)
        assert math.isclose(prior.hi, 200e-9)
        assert prior_from_document({"kind": "fixed", "toa_ns": 0.0}) == FixedToa(0.0)

    def test_missing_prior_bound_names_flag(self):
        with pytest.raises(InvalidScenarioError, match="--toa-hi-ns"):
            prior_from_document({"kind": "range", "lo_ns": 100.0})

    def test_scenario_from_sim_document(self):
        document = default_document("sim")
        document.update(scs_khz=60, trials=2000, avg_window=4, bias_correction_ns=10.0)
        scenario = scenario_from_document(document)
        assert scenario.numerology.mu == 2
        assert scenario.trials == 2000
        assert scenario.avg_window == 4
        assert math.isclose(scenario.bias_correction, 10e-9)
        assert scenario.toa_prior == UniformInSlot(100)

    def test_scenario_from_sweep_document_uses_smallest_window(self):
        document = default_document("sweep")
        document["avg_windows"] = [8, 2, 4]
        assert scenario_from_document(document).avg_window == 2

    def test_pipeline_document(self):
        document = default_document("pipeline")
        document.update(drift_ppm=-2.0, granularity_ns=0.0, modem_delay_ns=65.0)
        clock, scenario = pipeline_from_document(document)
        assert clock.offset == 0.0
        assert clock.drift_ppm == -2.0
        assert scenario.errors.granularity is None
        assert math.isclose(scenario.errors.modem_delay, 65e-9)
        assert math.isclose(scenario.true_toa, 1e-6)
