"""Trace ingestion and synthesis.

Reads Azure-Functions-style CSV triples (per-minute invocation counts,
average durations, application memory), expands them into timestamped
invocation events, and synthesizes edge-scaled traces with small/large
container classes, long-tailed cold-init latencies and optional bursts.
"""

from __future__ import annotations

import csv
import logging
import math
import random
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .errors import ConfigError, ReferentialIntegrityError, TraceParseError

log = logging.getLogger(__name__)

MINUTE_MS = 60_000

# 85th percentile of the standard normal, used to pin the lognormal scale.
_Z85 = 1.0364333894937898


class RawAppRecord(NamedTuple):
    app_id: str
    avg_app_memory_mb: float


class RawFunctionRecord(NamedTuple):
    function_id: str
    app_id: str
    avg_duration_ms: float
    per_minute_counts: tuple[int, ...]

    def total_invocations(self) -> int:
        return sum(self.per_minute_counts)


class Invocation(NamedTuple):
    """One timestamped function request."""

    timestamp_ms: int
    function_id: str
    memory_mb: float
    warm_duration_ms: int
    cold_init_ms: int


EVENT_CSV_HEADER = "timestamp_ms,function_id,memory_mb,warm_duration_ms,cold_init_ms"


# ---------------------------------------------------------------------------
# Raw Azure-style trace parsing
# ---------------------------------------------------------------------------


def _open_rows(path):
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise TraceParseError(path, 0, f"cannot open file: {exc}") from exc
    return handle


def parse_raw_trace(
    invocations_path, durations_path, memory_path
) -> tuple[list[RawAppRecord], list[RawFunctionRecord]]:
    """Parse the three-file raw trace into app and function records.

    Functions with zero total invocations are kept but logged, so downstream
    analysis can still see them.
    """
    apps: dict[str, RawAppRecord] = {}
    with _open_rows(memory_path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["app_id", "avg_app_memory_mb"]:
            raise TraceParseError(memory_path, 1, "expected header app_id,avg_app_memory_mb")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise TraceParseError(memory_path, line_no, f"expected 2 columns, got {len(row)}")
            app_id = row[0].strip()
            try:
                mem = float(row[1])
            except ValueError:
                raise TraceParseError(
                    memory_path, line_no, f"non-numeric avg_app_memory_mb {row[1]!r}"
                ) from None
            if mem <= 0:
                raise TraceParseError(memory_path, line_no, f"avg_app_memory_mb must be > 0, got {mem}")
            if app_id in apps:
                raise TraceParseError(memory_path, line_no, f"duplicate app_id {app_id!r}")
            apps[app_id] = RawAppRecord(app_id, mem)

    durations: dict[str, float] = {}
    with _open_rows(durations_path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["function_id", "avg_duration_ms"]:
            raise TraceParseError(durations_path, 1, "expected header function_id,avg_duration_ms")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise TraceParseError(durations_path, line_no, f"expected 2 columns, got {len(row)}")
            function_id = row[0].strip()
            try:
                dur = float(row[1])
            except ValueError:
                raise TraceParseError(
                    durations_path, line_no, f"non-numeric avg_duration_ms {row[1]!r}"
                ) from None
            if dur <= 0:
                raise TraceParseError(durations_path, line_no, f"avg_duration_ms must be > 0, got {dur}")
            if function_id in durations:
                raise TraceParseError(durations_path, line_no, f"duplicate function_id {function_id!r}")
            durations[function_id] = dur

    functions: list[RawFunctionRecord] = []
    seen: set[str] = set()
    horizon_minutes: int | None = None
    with _open_rows(invocations_path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if (
            header is None
            or len(header) < 3
            or [h.strip() for h in header[:2]] != ["function_id", "app_id"]
        ):
            raise TraceParseError(invocations_path, 1, "expected header function_id,app_id,m0,...")
        horizon_minutes = len(header) - 2
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != horizon_minutes + 2:
                raise TraceParseError(
                    invocations_path,
                    line_no,
                    f"expected {horizon_minutes + 2} columns, got {len(row)}",
                )
            function_id, app_id = row[0].strip(), row[1].strip()
            if function_id in seen:
                raise TraceParseError(invocations_path, line_no, f"duplicate function_id {function_id!r}")
            seen.add(function_id)
            if app_id not in apps:
                raise ReferentialIntegrityError(
                    f"{invocations_path}:{line_no}: function {function_id!r} references "
                    f"unknown app {app_id!r}"
                )
            if function_id not in durations:
                raise ReferentialIntegrityError(
                    f"{invocations_path}:{line_no}: function {function_id!r} has no row "
                    f"in the durations file"
                )
            counts = []
            for col, cell in enumerate(row[2:], start=2):
                try:
                    value = int(cell)
                except ValueError:
                    raise TraceParseError(
                        invocations_path, line_no, f"non-integer count {cell!r} in column {col}"
                    ) from None
                if value < 0:
                    raise TraceParseError(invocations_path, line_no, f"negative count {value}")
                counts.append(value)
            functions.append(
                RawFunctionRecord(function_id, app_id, durations[function_id], tuple(counts))
            )

    idle = [f.function_id for f in functions if f.total_invocations() == 0]
    if idle:
        log.warning("%d function(s) have zero invocations in the trace: %s", len(idle), idle[:10])
    return list(apps.values()), functions


# ---------------------------------------------------------------------------
# Count expansion
# ---------------------------------------------------------------------------


def expand_counts_to_events(
    functions: list[RawFunctionRecord],
    apps: list[RawAppRecord],
    seed: int,
    cold_init_ms: int = 15_000,
) -> list[Invocation]:
    """Expand per-minute invocation counts into timestamped events.

    Timestamps are placed uniformly at random inside their minute bucket
    using a generator seeded with `seed`; the raw trace carries no init
    latencies, so every event gets the configured constant cold_init_ms.
    """
    from .analyzer import estimate_function_memory

    app_by_id = {a.app_id: a for a in apps}
    app_duration: dict[str, float] = {}
    for f in functions:
        if f.app_id not in app_by_id:
            raise ReferentialIntegrityError(f"function {f.function_id!r} references unknown app")
        app_duration[f.app_id] = app_duration.get(f.app_id, 0.0) + f.avg_duration_ms

    rng = random.Random(seed)
    events: list[Invocation] = []
    for f in functions:
        memory = estimate_function_memory(
            app_by_id[f.app_id].avg_app_memory_mb, f.avg_duration_ms, app_duration[f.app_id]
        )
        warm = max(1, round(f.avg_duration_ms))
        for minute, count in enumerate(f.per_minute_counts):
            base = minute * MINUTE_MS
            for _ in range(count):
                events.append(
                    Invocation(base + rng.randrange(MINUTE_MS), f.function_id, memory, warm, cold_init_ms)
                )
    events.sort(key=lambda e: (e.timestamp_ms, e.function_id))
    return events


# ---------------------------------------------------------------------------
# Edge trace synthesis
# ---------------------------------------------------------------------------


@dataclass
class SynthesisConfig:
    """Knobs for the edge-scaled synthetic trace generator.

    The class split follows edge container sizing: small containers of
    30-60 MB invoked roughly `frequency_ratio` times as often (in aggregate)
    as large 300-400 MB containers. Small functions model always-on event
    sources with power-law popularity; large functions model triggered
    pipelines that sample at a fixed period during recurring activity
    windows, warm up after deployment, and retire when their staggered
    lifetime ends.
    """

    horizon_ms: int = 7_200_000
    small_memory_range_mb: tuple[float, float] = (30.0, 60.0)
    large_memory_range_mb: tuple[float, float] = (300.0, 400.0)
    small_count: int = 240
    large_count: int = 4
    frequency_ratio: float = 5.0
    total_invocations: int = 22_000
    small_init_p85_ms: int = 15_000
    large_init_p85_ms: int = 100_000
    burst_spec: list[tuple[int, int, float]] | None = None
    seed: int = 42
    # Warm runtimes per class, sampled per invocation. The large upper bound
    # stays below the burst sampling gap so back-to-back invocations of a
    # warm large pipeline do not force scale-out.
    small_warm_range_ms: tuple[int, int] = (50, 500)
    large_warm_range_ms: tuple[int, int] = (1000, 1600)
    # Power-law exponent for per-function small invocation rates.
    small_rate_skew: float = 0.52
    # Large functions model triggered pipelines (video analytics, batch
    # jobs): each one is active for `large_duty_on_ms` out of every
    # `large_duty_cycle_ms`, firing at a fixed sampling period (with
    # fractional jitter) inside its activity window. Activity phases are
    # staggered evenly so only a fraction of them run at once.
    large_duty_on_ms: int = 210_000
    large_duty_cycle_ms: int = 420_000
    large_jitter: float = 0.15
    # Each large function starts with two widely spaced warm-up invocations
    # so its first long initialization finishes before burst traffic begins.
    large_settle_gap_ms: int = 220_000
    # Lifetime of one large deployment; staggered starts mean some large
    # functions retire before the trace ends and fresh ones appear later.
    large_active_span_ms: int = 4_800_000
    # Shape of the lognormal cold-init distributions.
    init_sigma: float = 0.8

    def validate(self) -> None:
        checks = [
            (self.horizon_ms > 0, "horizon_ms must be positive"),
            (self.small_count >= 1 and self.large_count >= 1, "function counts must be >= 1"),
            (self.frequency_ratio >= 1.0, "frequency_ratio must be >= 1"),
            (self.total_invocations >= 2, "total_invocations must be >= 2"),
            (self.small_init_p85_ms > 0 and self.large_init_p85_ms > 0, "init p85 must be positive"),
            (self.init_sigma > 0, "init_sigma must be positive"),
            (
                0 < self.large_duty_on_ms <= self.large_duty_cycle_ms,
                "require 0 < large_duty_on_ms <= large_duty_cycle_ms",
            ),
            (0 <= self.large_jitter < 0.5, "large_jitter must be in [0, 0.5)"),
            (self.large_settle_gap_ms >= 0, "large_settle_gap_ms must be >= 0"),
            (self.large_active_span_ms > 0, "large_active_span_ms must be positive"),
        ]
        for rng_name in (
            "small_memory_range_mb",
            "large_memory_range_mb",
            "small_warm_range_ms",
            "large_warm_range_ms",
        ):
            lo, hi = getattr(self, rng_name)
            checks.append((0 < lo <= hi, f"{rng_name} must be a non-empty positive interval"))
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        if self.burst_spec is not None:
            for start, end, mult in self.burst_spec:
                if not (0 <= start < end <= self.horizon_ms):
                    raise ConfigError(f"burst window ({start}, {end}) outside the horizon")
                if mult <= 0:
                    raise ConfigError(f"burst multiplier must be positive, got {mult}")

    @staticmethod
    def from_dict(raw: dict) -> "SynthesisConfig":
        known = {f for f in SynthesisConfig.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown synthesis config keys: {sorted(unknown)}")
        cfg = SynthesisConfig(**raw)
        for name in (
            "small_memory_range_mb",
            "large_memory_range_mb",
            "small_warm_range_ms",
            "large_warm_range_ms",
        ):
            value = getattr(cfg, name)
            setattr(cfg, name, (value[0], value[1]))
        if cfg.burst_spec is not None:
            cfg.burst_spec = [(int(s), int(e), float(m)) for s, e, m in cfg.burst_spec]
        cfg.validate()
        return cfg


def _lognormal_init_samples(rng, p85_ms: int, sigma: float, n: int) -> np.ndarray:
    # Pin the 85th percentile: mu = ln(p85) - sigma * z85. Samples above
    # twice the p85 are clamped there, which leaves the p85 itself exact.
    mu = math.log(p85_ms) - sigma * _Z85
    samples = rng.lognormal(mean=mu, sigma=sigma, size=n)
    return np.minimum(samples, 2.0 * p85_ms).round().astype(np.int64)


def _sample_times(rng, n: int, start_ms: int, cfg: SynthesisConfig) -> np.ndarray:
    """Draw n integer timestamps in [start_ms, horizon) honoring bursts.

    The arrival density is piecewise constant, proportional to the burst
    multiplier inside burst windows and 1 elsewhere; class totals stay fixed.
    """
    if n == 0:
        return np.empty(0, dtype=np.int64)
    edges = {start_ms, cfg.horizon_ms}
    for s, e, _ in cfg.burst_spec or []:
        if e > start_ms:
            edges.add(max(s, start_ms))
            edges.add(e)
    bounds = sorted(edges)
    segments = []
    for lo, hi in zip(bounds, bounds[1:]):
        mult = 1.0
        for s, e, m in cfg.burst_spec or []:
            if s <= lo and hi <= e:
                mult = m
                break
        segments.append((lo, hi, (hi - lo) * mult))
    weights = np.array([w for _, _, w in segments], dtype=float)
    per_segment = rng.multinomial(n, weights / weights.sum())
    parts = [
        rng.integers(lo, hi, size=count, dtype=np.int64)
        for (lo, hi, _), count in zip(segments, per_segment)
        if count
    ]
    return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)


def _large_times(rng, count: int, phase_ms: int, config: SynthesisConfig) -> np.ndarray:
    """Timestamps for one duty-cycled large function.

    Two warm-up invocations spaced `large_settle_gap_ms` apart precede the
    burst traffic, so the first initialization completes before full-rate
    sampling begins. Burst invocations are spread at a fixed period (with
    fractional jitter) across the function's activity windows.
    """
    if count == 0:
        return np.empty(0, dtype=np.int64)
    retire_ms = min(phase_ms + config.large_active_span_ms, config.horizon_ms)
    settle_gap = config.large_settle_gap_ms
    bulk_start = phase_ms + 2 * settle_gap
    if bulk_start >= retire_ms or count <= 2:
        return np.sort(_sample_times(rng, count, min(phase_ms, config.horizon_ms - 1), config))
    settle = np.array([phase_ms, phase_ms + settle_gap], dtype=np.int64)
    n = count - 2

    cycle, on = config.large_duty_cycle_ms, config.large_duty_on_ms
    windows: list[tuple[int, int]] = []
    window_start = phase_ms + ((bulk_start - phase_ms) // cycle) * cycle
    while window_start < retire_ms:
        lo = max(window_start, bulk_start)
        hi = min(window_start + on, retire_ms)
        if hi > lo:
            windows.append((lo, hi))
        window_start += cycle
    if not windows:
        windows = [(bulk_start, retire_ms)]
    lengths = np.array([hi - lo for lo, hi in windows], dtype=float)
    offsets = np.concatenate([[0.0], np.cumsum(lengths)])
    total_on = offsets[-1]

    period = total_on / n
    jitter = rng.uniform(-config.large_jitter, config.large_jitter, size=n) * period
    positions = np.clip((np.arange(n) + 0.5) * period + jitter, 0, total_on - 1)
    window_idx = np.clip(np.searchsorted(offsets, positions, side="right") - 1, 0, len(windows) - 1)
    starts = np.array([lo for lo, _ in windows], dtype=float)
    bulk = (starts[window_idx] + (positions - offsets[window_idx])).round().astype(np.int64)
    return np.concatenate([settle, np.sort(bulk)])


def synthesize_edge_trace(config: SynthesisConfig) -> list[Invocation]:
    """Generate an edge-scaled invocation trace, sorted by timestamp.

    Deterministic for a fixed config and seed. Aggregate small volume is
    `frequency_ratio` times the large volume by construction (exact up to
    integer rounding).
    """
    config.validate()
    rng = np.random.default_rng(config.seed)

    n_large = max(1, round(config.total_invocations / (1.0 + config.frequency_ratio)))
    n_small = config.total_invocations - n_large
    if n_small < 1:
        raise ConfigError("total_invocations too small for the requested frequency_ratio")

    width = max(4, len(str(config.small_count)))
    small_ids = [f"s{i:0{width}d}" for i in range(config.small_count)]
    large_ids = [f"l{i:0{width}d}" for i in range(config.large_count)]

    small_mem = rng.uniform(*config.small_memory_range_mb, size=config.small_count)
    large_mem = rng.uniform(*config.large_memory_range_mb, size=config.large_count)

    small_weights = (np.arange(config.small_count) + 1.0) ** -config.small_rate_skew
    small_per_fn = rng.multinomial(n_small, small_weights / small_weights.sum())

    large_per_fn = rng.multinomial(n_large, np.full(config.large_count, 1.0 / config.large_count))

    fid_arrays, ts_arrays, mem_arrays, warm_arrays, init_arrays = [], [], [], [], []

    def emit(fid_ordinal, ts, memory_mb, warm_range, p85):
        count = len(ts)
        fid_arrays.append(np.full(count, fid_ordinal, dtype=np.int64))
        ts_arrays.append(ts)
        mem_arrays.append(np.full(count, memory_mb))
        warm_arrays.append(rng.integers(warm_range[0], warm_range[1] + 1, size=count, dtype=np.int64))
        init_arrays.append(_lognormal_init_samples(rng, p85, config.init_sigma, count))

    all_ids = small_ids + large_ids
    for i in range(config.small_count):
        ts = _sample_times(rng, int(small_per_fn[i]), 0, config)
        emit(i, ts, float(small_mem[i]), config.small_warm_range_ms, config.small_init_p85_ms)
    deploy_spread = max(0, config.horizon_ms - config.large_active_span_ms)
    for i in range(config.large_count):
        phase = (i * deploy_spread) // max(1, config.large_count - 1)
        ts = _large_times(rng, int(large_per_fn[i]), phase, config)
        emit(len(small_ids) + i, ts, float(large_mem[i]),
             config.large_warm_range_ms, config.large_init_p85_ms)

    fids = np.concatenate(fid_arrays)
    ts = np.concatenate(ts_arrays)
    mems = np.concatenate(mem_arrays)
    warms = np.concatenate(warm_arrays)
    inits = np.concatenate(init_arrays)

    # Ties break on function_id string order, which matches ordinal order
    # because ids are zero-padded and 'l' sorts before 's'.
    ordinal_rank = np.argsort(np.argsort(np.array(all_ids)))
    order = np.lexsort((ordinal_rank[fids], ts))

    id_of = [sys.intern(fid) for fid in all_ids]
    return [
        Invocation(int(ts[k]), id_of[fids[k]], float(mems[k]), int(warms[k]), int(inits[k]))
        for k in order
    ]


def default_edge_config(seed: int = 42) -> SynthesisConfig:
    """The stock desk-scale edge trace used by the sweep defaults and tests."""
    return SynthesisConfig(seed=seed)


def stress_config(seed: int = 42, total_invocations: int = 4_200_000) -> SynthesisConfig:
    """A two-hour overload trace in the millions of invocations."""
    return SynthesisConfig(
        seed=seed,
        total_invocations=total_invocations,
        small_count=3000,
        large_count=60,
        small_rate_skew=1.2,
    )


# ---------------------------------------------------------------------------
# Canonical event file I/O
# ---------------------------------------------------------------------------


def write_events(path, events: Iterable[Invocation]) -> int:
    """Write events as canonical CSV; returns the number of rows written."""
    count = 0
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(EVENT_CSV_HEADER + "\n")
        for e in events:
            fh.write(f"{e.timestamp_ms},{e.function_id},{e.memory_mb!r},{e.warm_duration_ms},{e.cold_init_ms}\n")
            count += 1
    return count


def iter_events(path) -> Iterator[Invocation]:
    """Stream events from a canonical CSV, validating order and invariants."""
    with _open_rows(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != EVENT_CSV_HEADER:
            raise TraceParseError(path, 1, f"expected header {EVENT_CSV_HEADER!r}")
        prev_ts = -1
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise TraceParseError(path, line_no, f"expected 5 columns, got {len(parts)}")
            try:
                ts = int(parts[0])
                memory = float(parts[2])
                warm = int(parts[3])
                init = int(parts[4])
            except ValueError as exc:
                raise TraceParseError(path, line_no, str(exc)) from None
            if memory <= 0 or warm < 1 or init < 0:
                raise TraceParseError(path, line_no, "event violates field invariants")
            if ts < prev_ts:
                raise TraceParseError(path, line_no, "events not sorted by timestamp_ms")
            prev_ts = ts
            yield Invocation(ts, sys.intern(parts[1]), memory, warm, init)


def load_events(path) -> list[Invocation]:
    return list(iter_events(path))
