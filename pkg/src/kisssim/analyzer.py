"""Workload statistics: function memory estimation, percentile tables,
invocation-frequency time series and sliding-window inter-arrival times.
"""

from __future__ import annotations

import logging
import math
import statistics
from dataclasses import dataclass
from typing import NamedTuple

from .errors import DomainError
from .metrics import DEFAULT_THRESHOLD_MB, SizeClass
from .trace import Invocation, RawAppRecord, RawFunctionRecord

log = logging.getLogger(__name__)

DEFAULT_PERCENTILES = (1.0, 5.0, 10.0, 25.0, 50.0, 75.0, 85.0, 90.0, 95.0, 99.0)


def estimate_function_memory(
    app_memory_mb: float, function_duration_ms: float, application_duration_ms: float
) -> float:
    """Apportion an application's memory to one function by duration share."""
    if app_memory_mb <= 0 or function_duration_ms <= 0 or application_duration_ms <= 0:
        raise DomainError("memory and durations must all be positive")
    if function_duration_ms > application_duration_ms:
        raise DomainError(
            f"function duration {function_duration_ms} exceeds application "
            f"duration {application_duration_ms}"
        )
    # Ratio first: equal durations give a ratio of exactly 1.0, so the
    # whole-app identity holds without floating error.
    return app_memory_mb * (function_duration_ms / application_duration_ms)


@dataclass(frozen=True)
class FunctionProfile:
    function_id: str
    est_memory_mb: float
    avg_duration_ms: float
    total_invocations: int
    size_class: SizeClass


def build_profiles(
    apps: list[RawAppRecord],
    functions: list[RawFunctionRecord],
    threshold_mb: float = DEFAULT_THRESHOLD_MB,
) -> list[FunctionProfile]:
    """Estimate per-function memory and classify against the size threshold.

    The application duration is the sum of average durations over the app's
    functions, so the per-function estimates add back up to the app memory.
    """
    if threshold_mb <= 0:
        raise DomainError("threshold_mb must be positive")
    app_by_id = {a.app_id: a for a in apps}
    app_duration: dict[str, float] = {}
    for f in functions:
        if f.app_id not in app_by_id:
            raise DomainError(f"function {f.function_id!r} references unknown app {f.app_id!r}")
        app_duration[f.app_id] = app_duration.get(f.app_id, 0.0) + f.avg_duration_ms
    for app_id, total in app_duration.items():
        if total <= 0:
            raise DomainError(f"app {app_id!r} has zero total duration")

    profiles = []
    for f in functions:
        est = estimate_function_memory(
            app_by_id[f.app_id].avg_app_memory_mb, f.avg_duration_ms, app_duration[f.app_id]
        )
        profiles.append(
            FunctionProfile(
                function_id=f.function_id,
                est_memory_mb=est,
                avg_duration_ms=f.avg_duration_ms,
                total_invocations=f.total_invocations(),
                size_class=SizeClass.of(est, threshold_mb),
            )
        )
    return profiles


class PercentileTable(NamedTuple):
    """Ordered (percentile, value) pairs computed with the nearest-rank rule."""

    entries: tuple[tuple[float, float], ...]

    def value_at(self, percentile: float) -> float:
        for p, v in self.entries:
            if p == percentile:
                return v
        raise KeyError(percentile)

    def is_empty(self) -> bool:
        return not self.entries


def percentile_distribution(values, percentiles=DEFAULT_PERCENTILES) -> PercentileTable:
    """Nearest-rank percentiles over the given values."""
    values = sorted(values)
    if not values:
        raise DomainError("percentile_distribution needs at least one value")
    requested = sorted(set(float(p) for p in percentiles))
    if not requested:
        raise DomainError("no percentiles requested")
    if requested[0] < 0 or requested[-1] > 100:
        raise DomainError("percentiles must lie in [0, 100]")
    n = len(values)
    entries = []
    for p in requested:
        rank = max(1, math.ceil(p / 100.0 * n))
        entries.append((p, values[rank - 1]))
    return PercentileTable(tuple(entries))


@dataclass(frozen=True)
class IATWindowConfig:
    window_ms: int = 3_600_000
    overlap_ms: int = 1_800_000
    zscore_threshold: float = 3.0

    def validate(self) -> None:
        if not (0 < self.overlap_ms < self.window_ms):
            raise DomainError("require 0 < overlap_ms < window_ms")
        if self.zscore_threshold <= 0:
            raise DomainError("zscore_threshold must be positive")


def _window_starts(horizon_ms: int, config: IATWindowConfig):
    stride = config.window_ms - config.overlap_ms
    start = 0
    while True:
        yield start
        if start + config.window_ms > horizon_ms:
            break
        start += stride


def iat_analysis(
    events: list[Invocation],
    config: IATWindowConfig = IATWindowConfig(),
    threshold_mb: float = DEFAULT_THRESHOLD_MB,
    percentiles=DEFAULT_PERCENTILES,
) -> dict[SizeClass, PercentileTable]:
    """Per-class inter-arrival-time percentiles over overlapping windows.

    IATs are taken between consecutive invocations of the same function
    inside each window; within every (window, class) group, values whose
    Z-score against the group mean exceeds the threshold are discarded.
    Zero-variance groups are kept whole. A class with fewer than two events
    yields an empty table.
    """
    config.validate()
    for a, b in zip(events, events[1:]):
        if b.timestamp_ms < a.timestamp_ms:
            raise DomainError("events must be sorted by timestamp")

    by_class: dict[SizeClass, dict[str, list[int]]] = {cls: {} for cls in SizeClass}
    for e in events:
        by_class[SizeClass.of(e.memory_mb, threshold_mb)].setdefault(e.function_id, []).append(
            e.timestamp_ms
        )

    horizon = events[-1].timestamp_ms if events else 0
    result: dict[SizeClass, PercentileTable] = {}
    for cls, series in by_class.items():
        n_events = sum(len(ts) for ts in series.values())
        if n_events < 2:
            if n_events:
                log.warning("size class %s has fewer than 2 events; empty IAT table", cls.value)
            result[cls] = PercentileTable(())
            continue
        pooled: list[int] = []
        for start in _window_starts(horizon, config):
            end = start + config.window_ms
            window_iats: list[int] = []
            for timestamps in series.values():
                in_window = [t for t in timestamps if start <= t < end]
                window_iats.extend(b - a for a, b in zip(in_window, in_window[1:]))
            if not window_iats:
                continue
            mean = statistics.fmean(window_iats)
            stdev = statistics.pstdev(window_iats)
            if stdev == 0:
                pooled.extend(window_iats)
            else:
                pooled.extend(
                    iat for iat in window_iats if abs(iat - mean) / stdev <= config.zscore_threshold
                )
        result[cls] = (
            percentile_distribution(pooled, percentiles) if pooled else PercentileTable(())
        )
    return result


class FrequencyBucket(NamedTuple):
    bucket_start_ms: int
    small_count: int
    large_count: int
    ratio: float


def frequency_report(
    events: list[Invocation],
    profiles: list[FunctionProfile] | None,
    bucket_ms: int,
    threshold_mb: float = DEFAULT_THRESHOLD_MB,
) -> list[FrequencyBucket]:
    """Per-bucket small/large invocation counts and their ratio.

    Classification comes from the profiles when given; otherwise from each
    invocation's own memory footprint (synthesized traces have no profiles).
    """
    if bucket_ms <= 0:
        raise DomainError("bucket_ms must be positive")
    class_of: dict[str, SizeClass] = (
        {p.function_id: p.size_class for p in profiles} if profiles else {}
    )
    if not events:
        return []
    n_buckets = events[-1].timestamp_ms // bucket_ms + 1
    small = [0] * n_buckets
    large = [0] * n_buckets
    for e in events:
        cls = class_of.get(e.function_id) or SizeClass.of(e.memory_mb, threshold_mb)
        if cls is SizeClass.SMALL:
            small[e.timestamp_ms // bucket_ms] += 1
        else:
            large[e.timestamp_ms // bucket_ms] += 1
    return [
        FrequencyBucket(i * bucket_ms, small[i], large[i], small[i] / max(large[i], 1))
        for i in range(n_buckets)
    ]
