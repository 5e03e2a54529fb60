"""
Command-line front end for the TA synchronization simulator.

Subcommands: constants, sim, sweep, budget, pipeline. Results go to stdout
or to ``--output`` (written atomically); logs go to stderr. Exit codes are
listed in :class:`utils.shared.ExitCode`.
"""

import argparse
import logging
import sys
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

from tasync import __version__
from tasync.config import SimulatorConfig, get_config
from tasync.errors import UsageError
from tasync.nodes import run_command
from tasync.output import FORMATS
from tasync.timing import SUPPORTED_SCS_KHZ
from utils.metrics import export_json
from utils.shared import ExitCode, map_exception_to_exit_code

logger = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class CliConfig:
    """Parsed command line: the subcommand, where output goes, and the flag document."""

    command: str
    fmt: str | None = None
    output: str | None = None
    summary_path: str | None = None
    config_path: str | None = None
    workers: int | None = None
    log_level: str | None = None
    metrics: bool = False
    fail_on_target_miss: bool = False
    flag_document: dict[str, Any] = field(default_factory=dict)


# Argument types


def _positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}") from e
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {number}")
    return number


def _window_list(value: str) -> list[int]:
    try:
        windows = [int(part) for part in value.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}") from e
    if not windows or any(k < 1 for k in windows):
        raise argparse.ArgumentTypeError(f"averaging windows must be >= 1, got {value!r}")
    return windows


# Parser


def _add_common(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("output and execution")
    group.add_argument("-o", "--output", help="Output file (default: stdout, '-')")
    group.add_argument("--format", choices=FORMATS, help="Output format")
    group.add_argument("--config", dest="config_path", help="JSON configuration file; flags win")
    group.add_argument("--workers", type=_positive_int, help="Worker processes for simulations")
    group.add_argument("--log-level", choices=LOG_LEVELS, help="Logging level on stderr")
    group.add_argument(
        "--metrics", action="store_true", help="Dump a run-metrics JSON snapshot to stderr"
    )


def _add_scs(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--scs", type=int, choices=SUPPORTED_SCS_KHZ, help="Subcarrier spacing in kHz (default 15)"
    )


def _add_error_model(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("TOA error model")
    sigma = group.add_mutually_exclusive_group()
    sigma.add_argument("--sigma-rel", type=float, help="Sigma as a multiple of the slot width")
    sigma.add_argument("--sigma-ns", type=float, help="Sigma in nanoseconds")
    group.add_argument("--nlos", action="store_true", default=None, help="Two-state NLOS model")
    group.add_argument("--p-detect", type=float, help="Direct-path detection probability")
    group.add_argument("--bias-ns", type=float, help="NLOS bias of the first non-direct path")
    group.add_argument("--sigma-blocked-rel", type=float, help="Sigma when the direct path is missed")


def _add_simulation(parser: argparse.ArgumentParser, sweep: bool) -> None:
    _add_scs(parser)
    _add_error_model(parser)
    group = parser.add_argument_group("scenario")
    group.add_argument("--prior", choices=("slot", "range", "fixed"), help="True TOA prior")
    group.add_argument("--center-index", type=int, help="TA bin of the uniform-in-slot prior")
    group.add_argument("--toa-lo-ns", type=float, help="Lower bound of the range prior")
    group.add_argument("--toa-hi-ns", type=float, help="Upper bound of the range prior")
    group.add_argument("--toa-ns", type=float, help="TOA of the fixed prior")
    group.add_argument("--trials", type=int, help="Monte Carlo trials (default 10^6)")
    if sweep:
        group.add_argument(
            "--avg", type=_window_list, help="Averaging windows, comma separated (default 1,2,4,8,16)"
        )
    else:
        group.add_argument("--avg", type=int, help="TA commands averaged per estimate (default 1)")
    group.add_argument("--seed", type=int, help="Random seed (default 42)")
    group.add_argument("--confidence", type=float, help="Confidence level of P_e (default 0.999)")
    group.add_argument(
        "--bias-correction-ns", type=float, help="Subtracted from every measured TOA"
    )
    if not sweep:
        group.add_argument("--summary", dest="summary_path", help="Also write the JSON summary here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tasync",
        description="Timing-advance based device synchronization error simulator for 5G NR",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    constants = subparsers.add_parser("constants", help="Timing constants per subcarrier spacing")
    _add_common(constants)

    sim = subparsers.add_parser("sim", help="Monte Carlo TOA-from-TA error for one scenario")
    _add_simulation(sim, sweep=False)
    _add_common(sim)

    sweep = subparsers.add_parser("sweep", help="Error CDF per averaging window")
    _add_simulation(sweep, sweep=True)
    _add_common(sweep)

    budget = subparsers.add_parser("budget", help="Device synchronization error budget")
    _add_scs(budget)
    budget.add_argument(
        "--policy", choices=("worst-case-sum", "root-sum-square"), help="Aggregation policy"
    )
    budget.add_argument("--tae", choices=("tx-diversity", "positioning"), help="TAE variant")
    budget.add_argument(
        "--include-ul-tx-error", action="store_true", default=None, help="Keep UE UL Tx timing row"
    )
    budget.add_argument(
        "--small-area", action="store_true", default=None, help="Exclude TA-related rows"
    )
    budget.add_argument("--target-ns", type=float, help="Synchronization target (default 1000)")
    budget.add_argument("--from-sim", help="Simulation summary JSON replacing the TA granularity row")
    budget.add_argument(
        "--fail-on-target-miss", action="store_true", help="Exit 4 when the total misses the target"
    )
    _add_common(budget)

    pipeline = subparsers.add_parser("pipeline", help="Clock offset trace over RTI epochs")
    _add_scs(pipeline)
    _add_error_model(pipeline)
    pipeline.add_argument("--drift-ppm", type=float, help="Device frequency error (default 10)")
    pipeline.add_argument("--resync-ms", type=float, help="Time between indications (default 10)")
    pipeline.add_argument("--epochs", type=int, help="Number of indications (default 1000)")
    pipeline.add_argument("--seed", type=int, help="Random seed (default 42)")
    pipeline.add_argument("--toa-ns", type=float, help="One-way propagation delay (default 1000)")
    pipeline.add_argument("--avg", type=int, help="TA commands averaged per estimate (default 1)")
    pipeline.add_argument(
        "--granularity-ns", type=float, help="Timestamp granularity; 0 for ideal (default 250)"
    )
    pipeline.add_argument("--dl-error-ns", type=float, help="DL frame timing error")
    pipeline.add_argument("--asymmetry-ns", type=float, help="DL/UL propagation asymmetry")
    pipeline.add_argument("--modem-delay-ns", type=float, help="Modem to host interface delay")
    pipeline.add_argument(
        "--residual-ns", type=float, help="Drift budget for the resync interval (default 100)"
    )
    _add_common(pipeline)

    return parser


# Flags -> partial configuration document


def _set(document: dict[str, Any], key: str, value: Any) -> None:
    if value is not None:
        document[key] = value


def _error_model_document(args: argparse.Namespace) -> dict[str, Any]:
    model: dict[str, Any] = {}
    nlos_flags = (args.p_detect, args.bias_ns, args.sigma_blocked_rel)
    if args.nlos or any(v is not None for v in nlos_flags):
        model["kind"] = "nlos"
    if args.sigma_rel is not None:
        model.update(sigma_rel=args.sigma_rel, sigma_ns=None)
    if args.sigma_ns is not None:
        model.update(sigma_ns=args.sigma_ns, sigma_rel=None)
    _set(model, "p_detect", args.p_detect)
    _set(model, "bias_ns", args.bias_ns)
    _set(model, "sigma_blocked_rel", args.sigma_blocked_rel)
    return model


def _prior_document(args: argparse.Namespace) -> dict[str, Any]:
    prior: dict[str, Any] = {}
    kind = args.prior
    if kind is None:
        if args.toa_ns is not None:
            kind = "fixed"
        elif args.toa_lo_ns is not None or args.toa_hi_ns is not None:
            kind = "range"
        elif args.center_index is not None:
            kind = "slot"
    _set(prior, "kind", kind)
    _set(prior, "center_index", args.center_index)
    _set(prior, "lo_ns", args.toa_lo_ns)
    _set(prior, "hi_ns", args.toa_hi_ns)
    _set(prior, "toa_ns", args.toa_ns)
    return prior


def flag_document(args: argparse.Namespace) -> dict[str, Any]:
    """The configuration document fields set explicitly on the command line."""
    document: dict[str, Any] = {}
    command = args.command
    if command == "constants":
        return document

    _set(document, "scs_khz", args.scs)

    if command in ("sim", "sweep"):
        _set(document, "trials", args.trials)
        _set(document, "seed", args.seed)
        _set(document, "confidence", args.confidence)
        _set(document, "bias_correction_ns", args.bias_correction_ns)
        _set(document, "avg_windows" if command == "sweep" else "avg_window", args.avg)
        prior = _prior_document(args)
        if prior:
            document["toa_prior"] = prior
        model = _error_model_document(args)
        if model:
            document["error_model"] = model

    elif command == "budget":
        _set(document, "policy", args.policy)
        _set(document, "tae", args.tae)
        _set(document, "include_ul_tx_error", args.include_ul_tx_error)
        _set(document, "small_area", args.small_area)
        _set(document, "target_ns", args.target_ns)
        _set(document, "from_sim", args.from_sim)

    elif command == "pipeline":
        _set(document, "seed", args.seed)
        _set(document, "avg_window", args.avg)
        _set(document, "toa_ns", args.toa_ns)
        _set(document, "drift_ppm", args.drift_ppm)
        _set(document, "resync_ms", args.resync_ms)
        _set(document, "epochs", args.epochs)
        _set(document, "granularity_ns", args.granularity_ns)
        _set(document, "dl_error_ns", args.dl_error_ns)
        _set(document, "asymmetry_ns", args.asymmetry_ns)
        _set(document, "modem_delay_ns", args.modem_delay_ns)
        _set(document, "residual_budget_ns", args.residual_ns)
        model = _error_model_document(args)
        if model:
            document["error_model"] = model

    return document


def parse_args(argv: Sequence[str] | None = None) -> CliConfig:
    """
    Parse ``argv`` into a :class:`CliConfig`.

    Unknown flags, missing values and out-of-choice values exit with status 2
    and a message naming the flag.
    """
    args = build_parser().parse_args(argv)
    return CliConfig(
        command=args.command,
        fmt=args.format,
        output=args.output,
        summary_path=getattr(args, "summary_path", None),
        config_path=args.config_path,
        workers=args.workers,
        log_level=args.log_level,
        metrics=args.metrics,
        fail_on_target_miss=getattr(args, "fail_on_target_miss", False),
        flag_document=flag_document(args),
    )


def setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
    )


def _load_config() -> SimulatorConfig:
    try:
        return get_config()
    except ValueError as e:
        raise UsageError("environment", str(e)) from e


def run(config: CliConfig) -> int:
    """Run one parsed command line; returns the process exit code."""
    shared: dict[str, Any] = {}
    try:
        settings = _load_config()
        setup_logging(config.log_level or settings.log_level)

        shared = {
            "command": config.command,
            "config": settings,
            "config_path": config.config_path,
            "flag_document": config.flag_document,
            "format": config.fmt,
            "output": config.output,
            "summary_path": config.summary_path,
            "workers": config.workers,
        }
        run_command(shared)
    except Exception as e:
        code, message = map_exception_to_exit_code(e)
        print(f"tasync: {message}", file=sys.stderr)
        return int(code)
    finally:
        if config.metrics:
            print(export_json(), file=sys.stderr)

    if config.fail_on_target_miss and shared.get("target_missed"):
        print("tasync: synchronization budget misses its target", file=sys.stderr)
        return int(ExitCode.BUDGET_TARGET_MISSED)
    return int(ExitCode.OK)


def main(argv: Sequence[str] | None = None) -> None:
    sys.exit(run(parse_args(argv)))


if __name__ == "__main__":
    main()
