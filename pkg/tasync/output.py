"""
Rendering of results to CSV, JSON and text tables, and atomic file output.

Every rendering embeds the tool version and the resolved configuration
document (seed included) so a result can be regenerated exactly. CSV files
carry them as leading ``# key: value`` lines; JSON under ``"metadata"``.
Floats are written with ``repr``, the shortest string that parses back to
the same double. Nothing time- or host-dependent is written, so identical
invocations produce identical bytes.
"""

import json
import logging
import math
import os
import sys
import tempfile
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import pandas as pd

from tasync import __version__
from tasync.budget import BudgetReport, TaeRequirement
from tasync.errors import InvalidScenarioError, OutputError
from tasync.pipeline import SyncTrace
from tasync.simulator import SimResult, SimSummary
from utils.shared import time_operation

logger = logging.getLogger(__name__)

STDOUT = "-"
FORMATS = ("csv", "json", "table")


def fmt(value: float) -> str:
    """Shortest round-trip text of a float."""
    return repr(float(value))


def _ns(seconds: float) -> float:
    return seconds * 1e9


def _json_number(value: float) -> float | None:
    return value if math.isfinite(value) else None


def build_metadata(command: str, document: dict[str, Any]) -> dict[str, Any]:
    metadata: dict[str, Any] = {"tool_version": __version__, "command": command}
    if "seed" in document:
        metadata["seed"] = document["seed"]
    metadata["config"] = document
    return metadata


def _csv_header(metadata: dict[str, Any]) -> list[str]:
    lines = []
    for key, value in metadata.items():
        text = json.dumps(value, sort_keys=True) if isinstance(value, dict) else str(value)
        lines.append(f"# {key}: {text}")
    return lines


def _json(payload: dict[str, Any]) -> str:
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def _csv(metadata: dict[str, Any], frame: pd.DataFrame) -> str:
    """Metadata comment lines followed by ``frame``; cells are preformatted text."""
    body = frame.to_csv(index=False, lineterminator="\n", na_rep="")
    return "\n".join(_csv_header(metadata)) + "\n" + body


def _table(lines: list[str]) -> str:
    return "\n".join(lines) + "\n"


# constants


def render_constants(rows: list[dict[str, Any]], fmt_name: str) -> str:
    metadata = build_metadata("constants", {})
    if fmt_name == "json":
        return _json({"metadata": metadata, "constants": rows})
    if fmt_name == "csv":
        frame = pd.DataFrame(
            [
                [
                    str(r["scs_khz"]),
                    str(r["mu"]),
                    fmt(r["t_c"]),
                    fmt(r["t_mu"]),
                    fmt(r["slot_width"]),
                    fmt(r["max_quantization_error"]),
                ]
                for r in rows
            ],
            columns=["scs_khz", "mu", "t_c_s", "t_mu_s", "slot_width_s", "max_quantization_error_s"],
        )
        return _csv(metadata, frame)

    lines = [
        f"{'SCS (kHz)':>9}  {'mu':>2}  {'T_c (ns)':>10}  {'T_mu (ns)':>10}  "
        f"{'slot (ns)':>10}  {'max err (ns)':>12}"
    ]
    for r in rows:
        lines.append(
            f"{r['scs_khz']:>9}  {r['mu']:>2}  {_ns(r['t_c']):>10.4f}  {_ns(r['t_mu']):>10.3f}  "
            f"{_ns(r['slot_width']):>10.3f}  {_ns(r['max_quantization_error']):>12.3f}"
        )
    return _table(lines)


# sim / sweep


def cdf_rows(result: SimResult) -> tuple[list[str], list[str]]:
    """Error values (ns) and CDF values of the distinct samples, formatted."""
    values, probabilities = result.cdf.steps()
    return [fmt(v * 1e9) for v in values], [fmt(p) for p in probabilities]


def _cdf_frame(result: SimResult, error_column: str, cdf_column: str) -> pd.DataFrame:
    errors, cdf = cdf_rows(result)
    return pd.DataFrame({error_column: errors, cdf_column: cdf}, dtype=object)


def render_sim_csv(result: SimResult, document: dict[str, Any]) -> str:
    return _csv(build_metadata("sim", document), _cdf_frame(result, "error_ns", "cdf"))


def render_sim_json(summary: SimSummary, document: dict[str, Any]) -> str:
    return _json({"metadata": build_metadata("sim", document), "summary": summary.to_dict()})


def _summary_lines(summary: SimSummary) -> list[str]:
    lines = [
        f"SCS: {summary.scs_khz} kHz   trials: {summary.trials}   K: {summary.avg_window}   "
        f"seed: {summary.seed}",
        f"P_e at {summary.confidence}: {_ns(summary.p_e):.3f} ns",
        f"mean |error|: {_ns(summary.mean_abs_error):.3f} ns",
        f"mean signed error: {_ns(summary.mean_signed_error):.3f} ns",
        f"max |error|: {_ns(summary.max_error):.3f} ns",
    ]
    for q, v in sorted(summary.quantiles.items()):
        lines.append(f"  q{q}: {_ns(v):.3f} ns")
    if summary.saturation_count:
        lines.append(f"saturated measurements: {summary.saturation_count}")
    return lines


def render_sim_table(summary: SimSummary) -> str:
    return _table(_summary_lines(summary))


def render_sweep_csv(results: Sequence[tuple[int, SimResult]], document: dict[str, Any]) -> str:
    """Wide CSV: one ``error_ns_k<K>,cdf_k<K>`` column pair per averaging window."""
    frame = pd.concat(
        [_cdf_frame(result, f"error_ns_k{k}", f"cdf_k{k}") for k, result in results], axis=1
    )
    return _csv(build_metadata("sweep", document), frame)


def render_sweep_json(results: Sequence[tuple[int, SimResult]], document: dict[str, Any]) -> str:
    return _json(
        {
            "metadata": build_metadata("sweep", document),
            "results": [{"avg_window": k, "summary": r.summary().to_dict()} for k, r in results],
        }
    )


def render_sweep_table(results: Sequence[tuple[int, SimResult]]) -> str:
    first = results[0][1].scenario
    lines = [
        f"SCS {first.numerology.scs_khz} kHz, {first.trials} trials, seed {first.seed}",
        f"{'K':>4}  {'P_e (ns)':>10}  {'mean |e| (ns)':>13}  {'max |e| (ns)':>12}",
    ]
    for k, r in results:
        lines.append(
            f"{k:>4}  {_ns(r.p_e):>10.3f}  {_ns(r.mean_abs_error):>13.3f}  {_ns(r.max_error):>12.3f}"
        )
    return _table(lines)


def load_sim_summary(path: str) -> SimSummary:
    """
    Read a simulation summary written by ``sim --format json`` or ``--summary``.

    Raises:
        InvalidScenarioError: If the file is not a simulation summary
    """
    with open(path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise InvalidScenarioError(f"{path} is not valid JSON: {e}") from e
    if isinstance(data, dict) and "summary" in data:
        data = data["summary"]
    if not isinstance(data, dict):
        raise InvalidScenarioError(f"{path} does not contain a simulation summary")
    return SimSummary.from_dict(data)


# budget


def budget_to_dict(report: BudgetReport) -> dict[str, Any]:
    return {
        "scs_khz": report.scs_khz,
        "policy": report.policy.value,
        "components": [
            {
                "key": c.key,
                "name": c.name,
                "included": c.included,
                "contribution_ns": c.contribution_ns,
                "reason": c.reason,
            }
            for c in report.components
        ],
        "total_ns": report.total_ns,
        "target_ns": report.target_ns,
        "passed": report.passed,
        "margin_ns": report.margin_ns,
    }


def render_budget(
    report: BudgetReport,
    document: dict[str, Any],
    fmt_name: str,
    requirements: list[TaeRequirement] | None = None,
) -> str:
    metadata = build_metadata("budget", document)
    if fmt_name == "json":
        payload: dict[str, Any] = {"metadata": metadata, "report": budget_to_dict(report)}
        if requirements is not None:
            payload["tae_requirements"] = [
                {"service": r.service, "requirement_ns": r.requirement_ns, "note": r.note}
                for r in requirements
            ]
        return _json(payload)
    if fmt_name == "csv":
        rows = [
            [c.key, "yes" if c.included else "no", fmt(c.contribution_ns), c.reason]
            for c in report.components
        ]
        rows.append(["total", "yes", fmt(report.total_ns), report.policy.value])
        frame = pd.DataFrame(rows, columns=["key", "included", "contribution_ns", "reason"])
        return _csv(metadata, frame)

    width = max(len(c.name) for c in report.components)
    lines = [f"Synchronization budget at {report.scs_khz} kHz ({report.policy.value})", ""]
    for c in report.components:
        value = f"{c.contribution_ns:>8.1f} ns" if c.included else f"{'-':>8}   "
        suffix = f"  ({c.reason})" if c.reason else ""
        lines.append(f"  {c.name:<{width}}  {value}{suffix}")
    lines.append("")
    lines.append(f"  {'Total':<{width}}  {report.total_ns:>8.1f} ns")
    verdict = "PASS" if report.passed else "FAIL"
    lines.append(
        f"  {'Target':<{width}}  {report.target_ns:>8.1f} ns  "
        f"{verdict} (margin {report.margin_ns:.1f} ns)"
    )
    if requirements:
        lines.append("")
        lines.append("Inter-BS time alignment error requirements:")
        for r in requirements:
            lines.append(f"  {r.service:<30} {r.requirement_ns:>6.1f} ns  {r.note}")
    return _table(lines)


# pipeline


def pipeline_summary(trace: SyncTrace, resync_interval: float) -> dict[str, Any]:
    post = trace.post_offsets
    pre = trace.pre_offsets
    return {
        "epochs": len(trace.records),
        "mean_post_offset_ns": _ns(float(post.mean())),
        "std_post_offset_ns": _ns(float(post.std())),
        "max_abs_post_offset_ns": _ns(float(abs(post).max())),
        "max_abs_pre_offset_ns": _ns(float(abs(pre).max())),
        "max_resync_interval_s": _json_number(resync_interval),
    }


def render_pipeline(
    trace: SyncTrace, document: dict[str, Any], fmt_name: str, resync_interval: float
) -> str:
    metadata = build_metadata("pipeline", document)
    if fmt_name == "json":
        return _json(
            {
                "metadata": metadata,
                "summary": pipeline_summary(trace, resync_interval),
                "records": [
                    {
                        "epoch": r.epoch,
                        "pre_offset_ns": _ns(r.pre_offset),
                        "post_offset_ns": _ns(r.post_offset),
                    }
                    for r in trace.records
                ],
            }
        )
    if fmt_name == "csv":
        frame = pd.DataFrame(
            [[str(r.epoch), fmt(_ns(r.pre_offset)), fmt(_ns(r.post_offset))] for r in trace.records],
            columns=["epoch", "pre_offset_ns", "post_offset_ns"],
        )
        return _csv(metadata, frame)

    summary = pipeline_summary(trace, resync_interval)
    interval = summary["max_resync_interval_s"]
    return _table(
        [
            f"epochs: {summary['epochs']}",
            f"mean post-correction offset: {summary['mean_post_offset_ns']:.3f} ns",
            f"std post-correction offset: {summary['std_post_offset_ns']:.3f} ns",
            f"max |post-correction offset|: {summary['max_abs_post_offset_ns']:.3f} ns",
            f"max |pre-correction offset|: {summary['max_abs_pre_offset_ns']:.3f} ns",
            "max resync interval: "
            + ("unbounded" if interval is None else f"{interval * 1e3:.6g} ms"),
        ]
    )


# writing


def resolve_output_path(path: str | None, output_dir: str = "") -> str:
    """Relative paths resolve under ``output_dir`` when one is configured."""
    if path is None or path == STDOUT:
        return STDOUT
    if output_dir and not os.path.isabs(path):
        return os.path.join(output_dir, path)
    return path


@time_operation("output", "write")
def write_output(text: str, path: str) -> None:
    """
    Write ``text`` to ``path`` atomically (temp file + rename), or to stdout for ``-``.

    Raises:
        OutputError: If the file cannot be written; names the path and cause
    """
    if path == STDOUT:
        sys.stdout.write(text)
        sys.stdout.flush()
        return

    target = Path(path)
    tmp_name: str | None = None
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(
            "w",
            encoding="utf-8",
            newline="\n",
            dir=target.parent,
            prefix=f".{target.name}.",
            suffix=".tmp",
            delete=False,
        ) as tmp:
            tmp_name = tmp.name
            tmp.write(text)
        os.replace(tmp_name, target)
    except OSError as e:
        if tmp_name is not None and os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise OutputError(path, e) from e

    logger.info(
        f"Wrote {path}",
        extra={"action": "output_written", "path": path, "bytes": len(text.encode("utf-8"))},
    )
