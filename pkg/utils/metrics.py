"""
In-process run metrics for simulations and flows.

Tracks trial counts, TA saturation events, per-node execution counts and
durations. Metrics are diagnostics only: they are never written into result
files, so outputs stay byte-identical between runs.
"""

import json
import logging
import time
from collections import defaultdict
from dataclasses import dataclass, field
from threading import Lock
from types import TracebackType
from typing import Any

import numpy as np

logger = logging.getLogger(__name__)

_PERCENTILES = (50, 95, 99)


@dataclass
class HistogramStats:
    """Running statistics plus a bounded window of recent values."""

    window: int = 1000
    count: int = 0
    sum: float = 0.0
    min: float = float("inf")
    max: float = float("-inf")
    recent: list[float] = field(default_factory=list)

    def update(self, value: float) -> None:
        self.count += 1
        self.sum += value
        self.min = min(self.min, value)
        self.max = max(self.max, value)
        self.recent.append(value)
        if len(self.recent) > self.window:
            del self.recent[0]

    def snapshot(self) -> dict[str, float]:
        stats = {
            "count": self.count,
            "sum": self.sum,
            "min": self.min if self.count else 0.0,
            "max": self.max if self.count else 0.0,
            "avg": self.sum / self.count if self.count else 0.0,
        }
        values = np.percentile(self.recent, _PERCENTILES) if self.recent else [0.0] * 3
        for p, v in zip(_PERCENTILES, values, strict=True):
            stats[f"p{p}"] = float(v)
        return stats


def metric_key(name: str, tags: dict[str, str] | None) -> str:
    """Stable key ``name[k=v,...]`` with tags sorted by key."""
    if not tags:
        return name
    return f"{name}[{','.join(f'{k}={v}' for k, v in sorted(tags.items()))}]"


class MetricsCollector:
    """Thread-safe counters, gauges and histograms."""

    def __init__(self, histogram_window: int = 1000):
        self.histogram_window = histogram_window
        self._counters: dict[str, float] = defaultdict(float)
        self._gauges: dict[str, float] = {}
        self._histograms: dict[str, HistogramStats] = {}
        self._lock = Lock()

    def increment(self, name: str, value: float = 1.0, tags: dict[str, str] | None = None) -> None:
        with self._lock:
            self._counters[metric_key(name, tags)] += value

    def gauge(self, name: str, value: float, tags: dict[str, str] | None = None) -> None:
        with self._lock:
            self._gauges[metric_key(name, tags)] = value

    def histogram(self, name: str, value: float, tags: dict[str, str] | None = None) -> None:
        key = metric_key(name, tags)
        with self._lock:
            if key not in self._histograms:
                self._histograms[key] = HistogramStats(window=self.histogram_window)
            self._histograms[key].update(value)

    def timer(self, name: str, tags: dict[str, str] | None = None) -> "Timer":
        """Context manager recording ``<name>_duration`` and success/error counts."""
        return Timer(self, name, tags)

    def get_metrics(self) -> dict[str, Any]:
        with self._lock:
            return {
                "counters": dict(self._counters),
                "gauges": dict(self._gauges),
                "histograms": {k: h.snapshot() for k, h in self._histograms.items()},
            }

    def export_json(self) -> str:
        return json.dumps(self.get_metrics(), indent=2, sort_keys=True)

    def reset(self) -> None:
        with self._lock:
            self._counters.clear()
            self._gauges.clear()
            self._histograms.clear()
        logger.debug("Metrics collector reset", extra={"action": "metrics_collector_reset"})


class Timer:
    """Times a block and records the outcome on exit."""

    def __init__(self, collector: MetricsCollector, name: str, tags: dict[str, str] | None = None):
        self.collector = collector
        self.name = name
        self.tags = tags or {}
        self.start_time: float | None = None
        self.duration: float | None = None

    def __enter__(self) -> "Timer":
        self.start_time = time.perf_counter()
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_val: BaseException | None,
        exc_tb: TracebackType | None,
    ) -> None:
        if self.start_time is None:
            return
        self.duration = time.perf_counter() - self.start_time
        self.collector.histogram(f"{self.name}_duration", self.duration, self.tags)
        outcome = "errors" if exc_type is not None else "success"
        self.collector.increment(f"{self.name}_{outcome}", 1.0, self.tags)


# Global metrics collector instance
_metrics_collector: MetricsCollector | None = None
_collector_lock = Lock()


def get_metrics_collector() -> MetricsCollector:
    global _metrics_collector
    with _collector_lock:
        if _metrics_collector is None:
            _metrics_collector = MetricsCollector()
        return _metrics_collector


def reset_metrics_collector() -> None:
    """Drop the global collector (tests)."""
    global _metrics_collector
    with _collector_lock:
        if _metrics_collector is not None:
            _metrics_collector.reset()
        _metrics_collector = None


def increment(name: str, value: float = 1.0, tags: dict[str, str] | None = None) -> None:
    get_metrics_collector().increment(name, value, tags)


def gauge(name: str, value: float, tags: dict[str, str] | None = None) -> None:
    get_metrics_collector().gauge(name, value, tags)


def histogram(name: str, value: float, tags: dict[str, str] | None = None) -> None:
    get_metrics_collector().histogram(name, value, tags)


def timer(name: str, tags: dict[str, str] | None = None) -> Timer:
    return get_metrics_collector().timer(name, tags)


def get_metrics() -> dict[str, Any]:
    return get_metrics_collector().get_metrics()


def export_json() -> str:
    return get_metrics_collector().export_json()