"""Simulation counters, the final report, and report comparison.

Six core metrics are tracked per run: cold starts (misses), hits, drops,
total accesses, serviceable accesses and cumulative execution duration —
overall and sliced by container size class.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .errors import ConfigError, InternalConsistencyError


class SizeClass(Enum):
    SMALL = "small"
    LARGE = "large"

    @staticmethod
    def of(memory_mb: float, threshold_mb: float) -> "SizeClass":
        # Boundary rule: exactly at the threshold classifies as small.
        return SizeClass.SMALL if memory_mb <= threshold_mb else SizeClass.LARGE


DEFAULT_THRESHOLD_MB = 225.0


@dataclass
class Counters:
    """Mutable tally for one traffic slice (overall or one size class)."""

    hits: int = 0
    misses: int = 0
    drops: int = 0
    oversized_drops: int = 0
    execution_duration_ms: int = 0

    @property
    def total_accesses(self) -> int:
        return self.hits + self.misses + self.drops

    @property
    def serviceable_accesses(self) -> int:
        return self.hits + self.misses

    def merge(self, other: "Counters") -> None:
        self.hits += other.hits
        self.misses += other.misses
        self.drops += other.drops
        self.oversized_drops += other.oversized_drops
        self.execution_duration_ms += other.execution_duration_ms


@dataclass
class RunCounters:
    """Overall counters plus per-class slices, filled in by the engine."""

    overall: Counters = field(default_factory=Counters)
    per_class: dict[SizeClass, Counters] = field(
        default_factory=lambda: {cls: Counters() for cls in SizeClass}
    )

    def record_hit(self, size_class: SizeClass, warm_duration_ms: int) -> None:
        for c in (self.overall, self.per_class[size_class]):
            c.hits += 1
            c.execution_duration_ms += warm_duration_ms

    def record_miss(self, size_class: SizeClass, busy_duration_ms: int) -> None:
        for c in (self.overall, self.per_class[size_class]):
            c.misses += 1
            c.execution_duration_ms += busy_duration_ms

    def record_drop(self, size_class: SizeClass, oversized: bool = False) -> None:
        for c in (self.overall, self.per_class[size_class]):
            c.drops += 1
            if oversized:
                c.oversized_drops += 1

    def merge(self, other: "RunCounters") -> None:
        self.overall.merge(other.overall)
        for cls in SizeClass:
            self.per_class[cls].merge(other.per_class[cls])


def _pct(numerator: int, denominator: int) -> float:
    return 100.0 * numerator / denominator if denominator else 0.0


@dataclass(frozen=True)
class SliceReport:
    total_accesses: int
    hits: int
    misses: int
    drops: int
    oversized_drops: int
    serviceable_accesses: int
    execution_duration_ms: int
    cold_start_pct: float
    cold_start_pct_of_total: float
    drop_pct: float
    hit_rate_pct: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class SimReport:
    overall: SliceReport
    per_class: dict[SizeClass, SliceReport]

    def to_dict(self) -> dict:
        return {
            "overall": self.overall.to_dict(),
            "per_class": {cls.value: rep.to_dict() for cls, rep in self.per_class.items()},
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def _finalize_slice(c: Counters) -> SliceReport:
    for name in ("hits", "misses", "drops", "oversized_drops", "execution_duration_ms"):
        if getattr(c, name) < 0:
            raise InternalConsistencyError(f"negative counter {name}={getattr(c, name)}")
    return SliceReport(
        total_accesses=c.total_accesses,
        hits=c.hits,
        misses=c.misses,
        drops=c.drops,
        oversized_drops=c.oversized_drops,
        serviceable_accesses=c.serviceable_accesses,
        execution_duration_ms=c.execution_duration_ms,
        # Headline cold-start percentage uses serviceable accesses as the
        # denominator (dropped invocations never initialize a container);
        # the misses/total variant is also reported.
        cold_start_pct=_pct(c.misses, c.serviceable_accesses),
        cold_start_pct_of_total=_pct(c.misses, c.total_accesses),
        drop_pct=_pct(c.drops, c.total_accesses),
        hit_rate_pct=_pct(c.hits, c.total_accesses),
    )


def finalize(counters: RunCounters) -> SimReport:
    """Turn raw engine counters into a SimReport with derived percentages."""
    report = SimReport(
        overall=_finalize_slice(counters.overall),
        per_class={cls: _finalize_slice(c) for cls, c in counters.per_class.items()},
    )
    # Per-class slices must sum to the overall slice exactly.
    for name in ("hits", "misses", "drops"):
        total = sum(getattr(report.per_class[cls], name) for cls in SizeClass)
        if total != getattr(report.overall, name):
            raise InternalConsistencyError(
                f"per-class {name} sum {total} != overall {getattr(report.overall, name)}"
            )
    return report


_COMPARED_METRICS = ("cold_start_pct", "drop_pct", "hit_rate_pct")


def compare(reports: list[tuple[str, SimReport]], baseline_label: str = "baseline") -> list[dict]:
    """Compare labelled reports against a designated baseline.

    Returns one row per (variant, scope, metric) with the absolute values and
    the relative improvement (baseline - variant) / baseline, in percent.
    Scope is "overall" or a size-class name.
    """
    if len(reports) < 2:
        raise ConfigError("compare needs at least two labelled reports")
    labels = [label for label, _ in reports]
    if baseline_label not in labels:
        raise ConfigError(f"no report labelled {baseline_label!r} among {labels}")
    baseline = dict(reports)[baseline_label]

    def scope_slices(report: SimReport):
        yield "overall", report.overall
        for cls in SizeClass:
            yield cls.value, report.per_class[cls]

    rows = []
    for label, report in reports:
        if label == baseline_label:
            continue
        base_slices = dict(scope_slices(baseline))
        for scope, rep in scope_slices(report):
            base = base_slices[scope]
            for metric in _COMPARED_METRICS:
                b = getattr(base, metric)
                v = getattr(rep, metric)
                improvement = 100.0 * (b - v) / b if b else 0.0
                rows.append(
                    {
                        "variant": label,
                        "scope": scope,
                        "metric": metric,
                        "baseline": b,
                        "value": v,
                        "relative_improvement_pct": improvement,
                    }
                )
    return rows


SWEEP_CSV_COLUMNS = (
    "memory_gb,mode,split,policy_small,policy_large,"
    "cold_start_pct,drop_pct,hit_rate_pct,"
    "small_cold_start_pct,large_cold_start_pct,small_drop_pct,large_drop_pct"
)


def sweep_csv_row(
    memory_gb: float,
    mode: str,
    split: str,
    policy_small: str,
    policy_large: str,
    report: SimReport,
) -> str:
    small = report.per_class[SizeClass.SMALL]
    large = report.per_class[SizeClass.LARGE]
    fields = [
        f"{memory_gb:g}",
        mode,
        split,
        policy_small,
        policy_large,
        f"{report.overall.cold_start_pct:.6f}",
        f"{report.overall.drop_pct:.6f}",
        f"{report.overall.hit_rate_pct:.6f}",
        f"{small.cold_start_pct:.6f}",
        f"{large.cold_start_pct:.6f}",
        f"{small.drop_pct:.6f}",
        f"{large.drop_pct:.6f}",
    ]
    return ",".join(fields)
