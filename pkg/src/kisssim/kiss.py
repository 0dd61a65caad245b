"""Size-aware routing between two statically partitioned warm pools, plus
the unified-pool baseline it is compared against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from . import engine
from .errors import ConfigError
from .metrics import DEFAULT_THRESHOLD_MB, RunCounters, SimReport, SizeClass, finalize
from .policies import PolicyKind
from .trace import Invocation

DEFAULT_SPLIT = (0.8, 0.2)


def classify(invocation: Invocation, threshold_mb: float = DEFAULT_THRESHOLD_MB) -> SizeClass:
    """Small iff the invocation's footprint is at or below the threshold."""
    return SizeClass.of(invocation.memory_mb, threshold_mb)


@dataclass(frozen=True)
class KissConfig:
    total_memory_mb: float
    split: tuple[float, float] = DEFAULT_SPLIT
    threshold_mb: float = DEFAULT_THRESHOLD_MB
    small_policy: PolicyKind = PolicyKind.LRU
    large_policy: PolicyKind = PolicyKind.LRU

    def validate(self) -> None:
        small_fraction, large_fraction = self.split
        if self.total_memory_mb <= 0:
            raise ConfigError("total_memory_mb must be positive")
        if small_fraction <= 0 or large_fraction <= 0:
            raise ConfigError("both split fractions must be positive")
        if abs(small_fraction + large_fraction - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {self.split}")
        if self.threshold_mb <= 0:
            raise ConfigError("threshold_mb must be positive")

    @property
    def small_capacity_mb(self) -> float:
        return self.total_memory_mb * self.split[0]

    @property
    def large_capacity_mb(self) -> float:
        return self.total_memory_mb * self.split[1]


@dataclass(frozen=True)
class BaselineConfig:
    total_memory_mb: float
    policy: PolicyKind = PolicyKind.LRU
    threshold_mb: float = DEFAULT_THRESHOLD_MB

    def validate(self) -> None:
        if self.total_memory_mb <= 0:
            raise ConfigError("total_memory_mb must be positive")
        if self.threshold_mb <= 0:
            raise ConfigError("threshold_mb must be positive")


def route_and_run(
    events: Iterable[Invocation],
    config: KissConfig,
    log: engine.LogSink = None,
    check_invariants: bool = False,
) -> SimReport:
    """Run the partitioned simulation: two pools, no capacity exchange."""
    config.validate()
    threshold = config.threshold_mb
    small_pool = engine.make_pool(config.small_capacity_mb, config.small_policy, "small")
    large_pool = engine.make_pool(config.large_capacity_mb, config.large_policy, "large")
    counters = RunCounters()

    def is_small(inv: Invocation) -> bool:
        return SizeClass.of(inv.memory_mb, threshold) is SizeClass.SMALL

    engine.run_pools(
        events,
        [(small_pool, is_small), (large_pool, lambda inv: True)],
        counters,
        threshold_mb=threshold,
        log=log,
        check_invariants=check_invariants,
    )
    return finalize(counters)


def run_baseline(
    events: Iterable[Invocation],
    config: BaselineConfig,
    log: engine.LogSink = None,
    check_invariants: bool = False,
) -> SimReport:
    """Run the unified-pool baseline; classification is reporting-only."""
    config.validate()
    counters = engine.run(
        events,
        config.total_memory_mb,
        config.policy,
        threshold_mb=config.threshold_mb,
        log=log,
        check_invariants=check_invariants,
        pool_label="unified",
    )
    return finalize(counters)


def parse_split(text: str) -> tuple[float, float]:
    """Parse '80/20' or '0.8/0.2' into fractions that sum to one."""
    parts = text.replace(":", "/").split("/")
    if len(parts) != 2:
        raise ConfigError(f"split must look like '80/20', got {text!r}")
    try:
        a, b = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"non-numeric split {text!r}") from None
    if a + b <= 0:
        raise ConfigError(f"split fractions must be positive, got {text!r}")
    total = a + b
    return (a / total, b / total)


def format_split(split: tuple[float, float]) -> str:
    return f"{split[0] * 100:g}/{split[1] * 100:g}"
