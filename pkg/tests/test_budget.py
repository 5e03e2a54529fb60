"""
Tests for the synchronization error budget.
"""

import math
import unittest

import pytest

from tasync.budget import (
    TA_GRANULARITY_KEY,
    BudgetComponent,
    BudgetInputs,
    Category,
    Policy,
    TaeVariant,
    aggregate,
    builtin_components,
    set_included,
    substitute_ta_error,
    tae_requirements,
)
from tasync.errors import BudgetError
from tasync.simulator import SimSummary


def summary(scs_khz=15, p_e_ns=100.0):
    return SimSummary(
        scs_khz=scs_khz,
        trials=1000,
        avg_window=1,
        seed=42,
        confidence=0.999,
        p_e=p_e_ns * 1e-9,
        mean_abs_error=0.0,
        mean_signed_error=0.0,
        max_error=p_e_ns * 1e-9,
        quantiles={0.999: p_e_ns * 1e-9},
        saturation_count=0,
    )


class TestDefaultBudget:
    @pytest.mark.parametrize(
        "scs,total,passed",
        [(15, 1160.0, False), (30, 900.0, True), (60, 737.0, True), (120, 542.5, True)],
    )
    def test_worst_case_totals(self, scs, total, passed):
        report = aggregate(builtin_components(), scs, Policy.WORST_CASE_SUM)
        assert report.total_ns == total
        assert report.passed is passed
        assert report.margin_ns == 1000.0 - total

    def test_rows(self):
        keys = [c.key for c in builtin_components()]
        assert keys == [
            "tae_tx_diversity",
            "tae_positioning",
            "reference_time_granularity",
            "ue_dl_frame_timing",
            "ta_granularity",
            "ta_adjustment",
            "dl_ul_asymmetry",
            "ue_ul_tx_timing",
            "modem_to_host",
        ]

    def test_excluded_rows_contribute_zero_with_reason(self):
        report = aggregate(builtin_components(), 15)
        excluded = {c.key: c for c in report.components if not c.included}
        assert set(excluded) == {"tae_positioning", "ue_ul_tx_timing"}
        assert excluded["ue_ul_tx_timing"].contribution_ns == 0.0
        assert "negated" in excluded["ue_ul_tx_timing"].reason

    def test_categories(self):
        categories = {c.key: c.category for c in builtin_components()}
        assert categories["reference_time_granularity"] is Category.REFERENCE_TIME_INDICATION
        assert categories[TA_GRANULARITY_KEY] is Category.TA_RELATED
        assert categories["modem_to_host"] is Category.OTHER


class TestBudgetVariants:
    def test_positioning_tae(self):
        report = aggregate(builtin_components(TaeVariant.POSITIONING), 15)
        assert report.total_ns == 1160.0 - 65.0 + 10.0

    def test_include_ul_tx_error(self):
        report = aggregate(builtin_components(include_ul_tx_error=True), 15)
        assert report.total_ns == 1160.0 + 390.0

    def test_small_area_drops_ta_rows(self):
        report = aggregate(builtin_components(small_area=True), 15)
        assert report.total_ns == 65.0 + 250.0 + 390.0 + 65.0
        assert report.passed

    def test_root_sum_square(self):
        report = aggregate(builtin_components(), 15, Policy.ROOT_SUM_SQUARE)
        squares = 65**2 + 250**2 + 390**2 + 260**2 + 130**2 + 65**2
        assert math.isclose(report.total_ns, math.sqrt(squares))
        assert report.total_ns < 1160.0

    def test_custom_target(self):
        report = aggregate(builtin_components(), 15, target_ns=1200.0)
        assert report.passed
        assert report.margin_ns == 40.0

    def test_override_forces_inclusion(self):
        report = aggregate(builtin_components(), 15, overrides={"ue_ul_tx_timing": 10.0})
        assert report.total_ns == 1170.0

    def test_set_included(self):
        components = set_included(builtin_components(), "dl_ul_asymmetry", False)
        report = aggregate(components, 15)
        assert report.total_ns == 1160.0
        row = next(c for c in report.components if c.key == "dl_ul_asymmetry")
        assert not row.included


class TestBudgetErrors(unittest.TestCase):
    def test_unsupported_scs(self):
        with self.assertRaises(BudgetError):
            aggregate(builtin_components(), 25)

    def test_non_positive_target(self):
        with self.assertRaises(BudgetError):
            aggregate(builtin_components(), 15, target_ns=0.0)

    def test_unknown_component(self):
        with self.assertRaises(BudgetError):
            set_included(builtin_components(), "no_such_row", True)

    def test_per_scs_values_need_four_entries(self):
        with self.assertRaises(BudgetError):
            BudgetComponent("x", "X", Category.OTHER, (1.0, 2.0, 3.0))  # type: ignore[arg-type]

    def test_negative_value(self):
        with self.assertRaises(BudgetError):
            BudgetComponent("x", "X", Category.OTHER, -1.0)


class TestSubstituteTaError:
    def test_replaces_ta_granularity_row(self):
        inputs = BudgetInputs(builtin_components(), scs_khz=15)
        report = substitute_ta_error(inputs, summary(p_e_ns=100.0))
        row = next(c for c in report.components if c.key == TA_GRANULARITY_KEY)
        assert math.isclose(row.contribution_ns, 100.0)
        assert row.reason == "substituted"
        assert math.isclose(report.total_ns, 1000.0)

    def test_numerology_mismatch(self):
        inputs = BudgetInputs(builtin_components(), scs_khz=30)
        with pytest.raises(BudgetError, match="15 kHz"):
            substitute_ta_error(inputs, summary(scs_khz=15))

    def test_keeps_other_overrides(self):
        inputs = BudgetInputs(
            builtin_components(), scs_khz=15, overrides={"modem_to_host": 0.0}
        )
        report = substitute_ta_error(inputs, summary(p_e_ns=100.0))
        assert math.isclose(report.total_ns, 935.0)


def test_tae_requirements():
    requirements = {r.service: r.requirement_ns for r in tae_requirements()}
    assert requirements["tx-diversity"] == 65.0
    assert requirements["positioning"] == 10.0
    assert requirements["tdd-frame-structure"] == 390.0
    assert requirements["inter-bs-carrier-aggregation"] == 260.0
