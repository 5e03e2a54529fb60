"""
Device synchronization error budget for reference time delivered over NR.

Component values are the typical per-SCS figures for reference time delivery
from base station to device; approximate ("~") entries are carried as their
nominal value with the approximation noted.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from enum import Enum

from tasync.errors import BudgetError
from tasync.simulator import SimResult, SimSummary
from tasync.timing import SUPPORTED_SCS_KHZ

logger = logging.getLogger(__name__)

DEFAULT_TARGET_NS = 1000.0

TA_GRANULARITY_KEY = "ta_granularity"


class Category(Enum):
    """Grouping of budget rows."""

    REFERENCE_TIME_INDICATION = "reference-time-indication"
    TA_RELATED = "ta-related"
    OTHER = "other"


class Policy(Enum):
    """How included contributions combine into a total."""

    WORST_CASE_SUM = "worst-case-sum"
    ROOT_SUM_SQUARE = "root-sum-square"


class TaeVariant(Enum):
    """Which inter-BS time alignment error requirement the budget assumes."""

    TX_DIVERSITY = "tx-diversity"
    POSITIONING = "positioning"


PerScs = tuple[float, float, float, float]


@dataclass(frozen=True)
class BudgetComponent:
    """One budget row; per-SCS values are ordered [15, 30, 60, 120] kHz."""

    key: str
    name: str
    category: Category
    value_ns: float | PerScs
    included_by_default: bool = True
    note: str = ""
    exclusion_reason: str = ""

    def __post_init__(self) -> None:
        values = self.value_ns if isinstance(self.value_ns, tuple) else (self.value_ns,)
        if isinstance(self.value_ns, tuple) and len(self.value_ns) != len(SUPPORTED_SCS_KHZ):
            raise BudgetError(f"{self.name}: per-SCS values need exactly 4 entries")
        if any(v < 0 for v in values):
            raise BudgetError(f"{self.name}: values must be >= 0")

    def value_at(self, scs_khz: int) -> float:
        if isinstance(self.value_ns, tuple):
            return self.value_ns[SUPPORTED_SCS_KHZ.index(scs_khz)]
        return self.value_ns


@dataclass(frozen=True)
class Contribution:
    """A component's share of one report; excluded rows contribute 0."""

    key: str
    name: str
    contribution_ns: float
    included: bool
    reason: str = ""


@dataclass(frozen=True)
class BudgetReport:
    scs_khz: int
    policy: Policy
    components: list[Contribution]
    total_ns: float
    target_ns: float
    passed: bool
    margin_ns: float


@dataclass(frozen=True)
class BudgetInputs:
    """Everything :func:`aggregate` needs, bundled for re-aggregation."""

    components: list[BudgetComponent]
    scs_khz: int
    policy: Policy = Policy.WORST_CASE_SUM
    target_ns: float = DEFAULT_TARGET_NS
    overrides: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class TaeRequirement:
    service: str
    requirement_ns: float
    note: str = ""


def builtin_components(
    tae_variant: TaeVariant = TaeVariant.TX_DIVERSITY,
    include_ul_tx_error: bool = False,
    small_area: bool = False,
) -> list[BudgetComponent]:
    """
    The reference-time delivery error rows.

    Args:
        tae_variant: Which TAE row is included
        include_ul_tx_error: Re-include UE UL transmit timing (normally
            cancelled by DL frame timing error)
        small_area: Drop every TA-related row; propagation delay is negligible
    """
    ue_frame_timing: PerScs = (390.0, 260.0, 227.0, 114.0)

    components = [
        BudgetComponent(
            key="tae_tx_diversity",
            name="Time alignment error (Tx diversity)",
            category=Category.REFERENCE_TIME_INDICATION,
            value_ns=65.0,
            included_by_default=tae_variant is TaeVariant.TX_DIVERSITY,
            note="~65 ns, MIMO / Tx diversity requirement",
            exclusion_reason="positioning TAE variant selected",
        ),
        BudgetComponent(
            key="tae_positioning",
            name="Time alignment error (positioning)",
            category=Category.REFERENCE_TIME_INDICATION,
            value_ns=10.0,
            included_by_default=tae_variant is TaeVariant.POSITIONING,
            note="~10 ns, positioning requirement",
            exclusion_reason="Tx diversity TAE variant selected",
        ),
        BudgetComponent(
            key="reference_time_granularity",
            name="Reference time granularity",
            category=Category.REFERENCE_TIME_INDICATION,
            value_ns=250.0,
            note="SIB16 timestamp granularity",
        ),
        BudgetComponent(
            key="ue_dl_frame_timing",
            name="UE DL frame timing estimation",
            category=Category.REFERENCE_TIME_INDICATION,
            value_ns=ue_frame_timing,
            note="DL detection error and device processing jitter",
        ),
        BudgetComponent(
            key=TA_GRANULARITY_KEY,
            name="TA granularity",
            category=Category.TA_RELATED,
            value_ns=(260.0, 130.0, 65.0, 32.5),
            note="tabulated values; exact slot widths are 260.42/130.21/65.10/32.55 ns",
        ),
        BudgetComponent(
            key="ta_adjustment",
            name="TA adjustment error",
            category=Category.TA_RELATED,
            value_ns=(130.0, 130.0, 65.0, 16.0),
            note="systematic and dynamic UE adjustment error",
        ),
        BudgetComponent(
            key="dl_ul_asymmetry",
            name="Asymmetric DL/UL propagation delay",
            category=Category.TA_RELATED,
            value_ns=0.0,
            note="negligible in TDD",
        ),
        BudgetComponent(
            key="ue_ul_tx_timing",
            name="UE UL transmit timing error",
            category=Category.TA_RELATED,
            value_ns=ue_frame_timing,
            included_by_default=include_ul_tx_error,
            note="same as UE DL frame timing estimation",
            exclusion_reason="negated by DL frame timing error",
        ),
        BudgetComponent(
            key="modem_to_host",
            name="UE modem to host interface delay",
            category=Category.OTHER,
            value_ns=65.0,
            note="~65 ns chipset interface delay",
        ),
    ]

    if small_area:
        components = [
            replace(
                c,
                included_by_default=False,
                exclusion_reason="propagation delay negligible in a small service area",
            )
            if c.category is Category.TA_RELATED
            else c
            for c in components
        ]

    return components


def set_included(
    components: Sequence[BudgetComponent], key: str, included: bool
) -> list[BudgetComponent]:
    """Copy of ``components`` with one row's inclusion flag changed."""
    if not any(c.key == key for c in components):
        raise BudgetError(f"Unknown budget component '{key}'")
    return [replace(c, included_by_default=included) if c.key == key else c for c in components]


def aggregate(
    components: Sequence[BudgetComponent],
    scs_khz: int,
    policy: Policy = Policy.WORST_CASE_SUM,
    target_ns: float = DEFAULT_TARGET_NS,
    overrides: dict[str, float] | None = None,
) -> BudgetReport:
    """
    Combine the included rows at ``scs_khz`` into a total and check the target.

    ``overrides`` replaces a row's value (by key) and forces it included.

    Raises:
        BudgetError: If ``scs_khz`` is not 15, 30, 60 or 120
    """
    if scs_khz not in SUPPORTED_SCS_KHZ:
        raise BudgetError(f"Unsupported subcarrier spacing {scs_khz} kHz for budget")
    if target_ns <= 0:
        raise BudgetError(f"target must be positive, got {target_ns} ns")
    overrides = overrides or {}

    contributions = []
    for component in components:
        if component.key in overrides:
            contributions.append(
                Contribution(
                    component.key,
                    component.name,
                    overrides[component.key],
                    included=True,
                    reason="substituted",
                )
            )
        elif component.included_by_default:
            contributions.append(
                Contribution(
                    component.key, component.name, component.value_at(scs_khz), included=True
                )
            )
        else:
            contributions.append(
                Contribution(
                    component.key,
                    component.name,
                    0.0,
                    included=False,
                    reason=component.exclusion_reason or "excluded",
                )
            )

    included = [c.contribution_ns for c in contributions if c.included]
    if policy is Policy.ROOT_SUM_SQUARE:
        total = math.sqrt(sum(v * v for v in included))
    else:
        total = sum(included)

    report = BudgetReport(
        scs_khz=scs_khz,
        policy=policy,
        components=contributions,
        total_ns=total,
        target_ns=target_ns,
        passed=total <= target_ns,
        margin_ns=target_ns - total,
    )

    logger.info(
        f"Budget at {scs_khz} kHz: {total:.1f} ns vs target {target_ns:.1f} ns",
        extra={
            "action": "budget_computed",
            "scs_khz": scs_khz,
            "policy": policy.value,
            "total_ns": total,
            "target_ns": target_ns,
            "passed": report.passed,
        },
    )

    return report


def substitute_ta_error(report_inputs: BudgetInputs, sim: SimResult | SimSummary) -> BudgetReport:
    """
    Re-aggregate with the TA granularity row replaced by a simulated P_e.

    Raises:
        BudgetError: If the simulation ran at a different subcarrier spacing
    """
    summary = sim.summary() if isinstance(sim, SimResult) else sim
    if summary.scs_khz != report_inputs.scs_khz:
        raise BudgetError(
            f"Simulation at {summary.scs_khz} kHz cannot feed a {report_inputs.scs_khz} kHz budget"
        )

    overrides = dict(report_inputs.overrides)
    overrides[TA_GRANULARITY_KEY] = summary.p_e * 1e9

    return aggregate(
        report_inputs.components,
        report_inputs.scs_khz,
        report_inputs.policy,
        report_inputs.target_ns,
        overrides,
    )


def tae_requirements() -> list[TaeRequirement]:
    """Inter-BS time alignment error requirements by service."""
    return [
        TaeRequirement("tx-diversity", 65.0, "MIMO and Tx diversity, +/-65 ns"),
        TaeRequirement("inter-bs-carrier-aggregation", 260.0, "inter-BS CA, < 260 ns"),
        TaeRequirement(
            "comp-inter-site",
            260.0,
            "inter-site CoMP, <= 260 ns; device time-offset window [-0.5, 2] us",
        ),
        TaeRequirement("tdd-frame-structure", 390.0, "TDD D2B alignment, +/-390 ns"),
        TaeRequirement("positioning", 10.0, "positioning, +/-10 ns among BSs"),
    ]
