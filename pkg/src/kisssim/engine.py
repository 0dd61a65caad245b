"""Deterministic discrete-event simulation of one memory-budgeted warm pool.

Arrivals either hit an idle container of their function, cold-start a new
container (evicting idle ones on the way if capacity is short), or drop when
busy containers leave no reclaimable room. Completions return containers to
the idle state, where they stay resident until evicted. Time is integer
milliseconds; at equal timestamps completions are processed before arrivals
so a just-finished container can serve an arrival in the same millisecond.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Optional

from .errors import InternalConsistencyError
from .metrics import DEFAULT_THRESHOLD_MB, RunCounters, SizeClass
from .policies import ContainerMeta, PolicyKind, ReplacementPolicy, make_policy
from .trace import Invocation

LogSink = Optional[Callable[[dict], None]]


class ContainerState(Enum):
    INITIALIZING = "initializing"
    RUNNING = "running"
    IDLE = "idle"


class EventKind(Enum):
    ARRIVAL = "arrival"
    COMPLETION = "completion"


@dataclass
class Container:
    container_id: int
    function_id: str
    memory_mb: float
    state: ContainerState
    busy_until_ms: int
    meta: ContainerMeta


@dataclass(frozen=True)
class SimEvent:
    time_ms: int
    kind: EventKind
    sequence: int
    invocation: Invocation | None = None
    container_id: int | None = None


@dataclass
class WarmPool:
    """One memory-budgeted container pool governed by a single policy."""

    capacity_mb: float
    policy: ReplacementPolicy
    label: str = "pool"
    containers: dict[int, Container] = field(default_factory=dict)
    used_mb: float = 0.0
    clock_ms: int = 0
    _idle_by_function: dict[str, list[int]] = field(default_factory=dict)
    _pending: list[tuple[int, int, int]] = field(default_factory=list)  # (time, seq, cid)
    _next_container_id: int = 0
    _next_seq: int = 0

    @property
    def inflation_clock(self) -> float:
        return getattr(self.policy, "clock", 0.0)

    def next_completion_time(self) -> int | None:
        return self._pending[0][0] if self._pending else None

    def pop_completion(self) -> SimEvent:
        time_ms, seq, cid = heapq.heappop(self._pending)
        return SimEvent(time_ms, EventKind.COMPLETION, seq, container_id=cid)

    def _schedule_completion(self, container: Container) -> None:
        heapq.heappush(self._pending, (container.busy_until_ms, self._next_seq, container.container_id))
        self._next_seq += 1

    def _free_mb(self) -> float:
        return self.capacity_mb - self.used_mb

    def _idle_metas(self) -> list[ContainerMeta]:
        return [
            self.containers[cid].meta
            for ids in self._idle_by_function.values()
            for cid in ids
        ]

    def _remove_idle(self, container: Container) -> None:
        ids = self._idle_by_function[container.function_id]
        ids.remove(container.container_id)
        if not ids:
            del self._idle_by_function[container.function_id]

    def _evict(self, container_id: int, now_ms: int, log: LogSink) -> None:
        container = self.containers[container_id]
        if container.state is not ContainerState.IDLE:
            raise InternalConsistencyError(
                f"evicting non-idle container {container_id} ({container.state})"
            )
        del self.containers[container_id]
        self._remove_idle(container)
        self.used_mb -= container.memory_mb
        self.policy.on_evict(container_id)
        if log:
            log(
                {
                    "time_ms": now_ms,
                    "kind": "eviction",
                    "function_id": container.function_id,
                    "outcome": "evict",
                    "container_id": container_id,
                    "memory_mb": container.memory_mb,
                    "pool": self.label,
                }
            )

    def handle_arrival(
        self, inv: Invocation, now_ms: int, counters: RunCounters, threshold_mb: float, log: LogSink
    ) -> str:
        size_class = SizeClass.of(inv.memory_mb, threshold_mb)
        idle_ids = self._idle_by_function.get(inv.function_id)
        if idle_ids:
            # Warm hit: take the most recently used idle container so the
            # LRU ordering of the remainder is preserved.
            cid = max(idle_ids, key=lambda c: (self.containers[c].meta.last_access_ms, c))
            container = self.containers[cid]
            self._remove_idle(container)
            container.state = ContainerState.RUNNING
            container.busy_until_ms = now_ms + inv.warm_duration_ms
            self.policy.on_hit(cid, now_ms)
            self._schedule_completion(container)
            counters.record_hit(size_class, inv.warm_duration_ms)
            outcome, container_id = "hit", cid
        elif inv.memory_mb > self.capacity_mb:
            # No amount of eviction can make room; flagged drop, no abort.
            counters.record_drop(size_class, oversized=True)
            outcome, container_id = "drop", None
        else:
            while self._free_mb() < inv.memory_mb and self._idle_by_function:
                victim = self.policy.select_victim(self._idle_metas())
                self._evict(victim, now_ms, log)
            if self._free_mb() >= inv.memory_mb:
                cid = self._next_container_id
                self._next_container_id += 1
                meta = ContainerMeta(cid, inv.function_id, inv.memory_mb, inv.cold_init_ms)
                busy = inv.cold_init_ms + inv.warm_duration_ms
                container = Container(
                    cid, inv.function_id, inv.memory_mb, ContainerState.INITIALIZING,
                    now_ms + busy, meta,
                )
                self.containers[cid] = container
                self.used_mb += inv.memory_mb
                self.policy.on_insert(meta, now_ms)
                self._schedule_completion(container)
                counters.record_miss(size_class, busy)
                outcome, container_id = "miss", cid
            else:
                counters.record_drop(size_class)
                outcome, container_id = "drop", None
        if log:
            log(
                {
                    "time_ms": now_ms,
                    "kind": "arrival",
                    "function_id": inv.function_id,
                    "outcome": outcome,
                    "container_id": container_id,
                    "memory_mb": inv.memory_mb,
                    "pool": self.label,
                }
            )
        return outcome

    def handle_completion(self, container_id: int, now_ms: int, log: LogSink) -> None:
        container = self.containers.get(container_id)
        if container is None:
            raise InternalConsistencyError(f"completion for unknown container {container_id}")
        if container.state is ContainerState.IDLE or container.busy_until_ms != now_ms:
            raise InternalConsistencyError(
                f"completion for container {container_id} in state {container.state} "
                f"busy_until={container.busy_until_ms} at t={now_ms}"
            )
        container.state = ContainerState.IDLE
        self._idle_by_function.setdefault(container.function_id, []).append(container_id)
        if log:
            log(
                {
                    "time_ms": now_ms,
                    "kind": "completion",
                    "function_id": container.function_id,
                    "outcome": "complete",
                    "container_id": container_id,
                    "memory_mb": container.memory_mb,
                    "pool": self.label,
                }
            )

    def check_invariants(self) -> None:
        total = sum(c.memory_mb for c in self.containers.values())
        if abs(total - self.used_mb) > 1e-6:
            raise InternalConsistencyError(f"memory accounting drift: {total} vs {self.used_mb}")
        if total > self.capacity_mb + 1e-6:
            raise InternalConsistencyError(
                f"resident memory {total} exceeds capacity {self.capacity_mb}"
            )
        idle_ids = {cid for ids in self._idle_by_function.values() for cid in ids}
        actual_idle = {
            cid for cid, c in self.containers.items() if c.state is ContainerState.IDLE
        }
        if idle_ids != actual_idle:
            raise InternalConsistencyError("idle index out of sync with container states")


def make_pool(capacity_mb: float, policy: PolicyKind | str | ReplacementPolicy, label: str = "pool") -> WarmPool:
    if not isinstance(policy, ReplacementPolicy):
        policy = make_policy(policy)
    return WarmPool(capacity_mb=capacity_mb, policy=policy, label=label)


def step(event: SimEvent, pool: WarmPool, counters: RunCounters,
         threshold_mb: float = DEFAULT_THRESHOLD_MB, log: LogSink = None) -> None:
    """Apply one event to the pool. Events must arrive in simulation order."""
    if event.time_ms < pool.clock_ms:
        raise InternalConsistencyError(
            f"event at t={event.time_ms} is before the pool clock {pool.clock_ms}"
        )
    pool.clock_ms = event.time_ms
    if event.kind is EventKind.ARRIVAL:
        pool.handle_arrival(event.invocation, event.time_ms, counters, threshold_mb, log)
    else:
        pool.handle_completion(event.container_id, event.time_ms, log)


def run(
    events: Iterable[Invocation],
    capacity_mb: float,
    policy: PolicyKind | str | ReplacementPolicy,
    threshold_mb: float = DEFAULT_THRESHOLD_MB,
    log: LogSink = None,
    check_invariants: bool = False,
    pool_label: str = "pool",
) -> RunCounters:
    """Simulate a sorted event stream against a single warm pool."""
    pool = make_pool(capacity_mb, policy, pool_label)
    counters = RunCounters()
    run_pools(events, [(pool, lambda inv: True)], counters, threshold_mb, log, check_invariants)
    return counters


def run_pools(
    events: Iterable[Invocation],
    routed_pools: list[tuple[WarmPool, Callable[[Invocation], bool]]],
    counters: RunCounters,
    threshold_mb: float = DEFAULT_THRESHOLD_MB,
    log: LogSink = None,
    check_invariants: bool = False,
) -> None:
    """Drive one or more independent pools from a single sorted arrival stream.

    Each arrival goes to the first pool whose router accepts it. Pools share
    nothing; merging their event loops just preserves global time order.
    """
    seq = 0
    prev_ts = None
    for inv in events:
        if prev_ts is not None and inv.timestamp_ms < prev_ts:
            raise InternalConsistencyError("arrival stream is not sorted by timestamp")
        prev_ts = inv.timestamp_ms
        # Drain completions up to and including the arrival timestamp first.
        while True:
            best_pool, best_t = None, None
            for pool, _ in routed_pools:
                t = pool.next_completion_time()
                if t is not None and t <= inv.timestamp_ms and (best_t is None or t < best_t):
                    best_pool, best_t = pool, t
            if best_pool is None:
                break
            step(best_pool.pop_completion(), best_pool, counters, threshold_mb, log)
            if check_invariants:
                best_pool.check_invariants()
        for pool, accepts in routed_pools:
            if accepts(inv):
                event = SimEvent(inv.timestamp_ms, EventKind.ARRIVAL, seq, invocation=inv)
                seq += 1
                step(event, pool, counters, threshold_mb, log)
                if check_invariants:
                    pool.check_invariants()
                break
        else:
            raise InternalConsistencyError(f"no pool accepted invocation of {inv.function_id}")
    while True:
        best_pool, best_t = None, None
        for pool, _ in routed_pools:
            t = pool.next_completion_time()
            if t is not None and (best_t is None or t < best_t):
                best_pool, best_t = pool, t
        if best_pool is None:
            break
        step(best_pool.pop_completion(), best_pool, counters, threshold_mb, log)
        if check_invariants:
            best_pool.check_invariants()


def run_pure_caching(
    events: Iterable[Invocation],
    capacity_mb: float,
    policy: PolicyKind | str | ReplacementPolicy,
    threshold_mb: float = DEFAULT_THRESHOLD_MB,
) -> RunCounters:
    """Size-aware cache simulation with instantaneous accesses.

    No container is ever busy, so there are no drops; an access that exceeds
    the whole capacity counts as a miss and bypasses the cache. Used to check
    classical caching properties such as LRU inclusion.
    """
    if not isinstance(policy, ReplacementPolicy):
        policy = make_policy(policy)
    counters = RunCounters()
    resident: dict[str, Container] = {}
    used = 0.0
    next_id = 0
    prev_ts = None
    for inv in events:
        if prev_ts is not None and inv.timestamp_ms < prev_ts:
            raise InternalConsistencyError("arrival stream is not sorted by timestamp")
        prev_ts = inv.timestamp_ms
        now = inv.timestamp_ms
        size_class = SizeClass.of(inv.memory_mb, threshold_mb)
        container = resident.get(inv.function_id)
        if container is not None:
            policy.on_hit(container.container_id, now)
            counters.record_hit(size_class, inv.warm_duration_ms)
            continue
        counters.record_miss(size_class, inv.cold_init_ms + inv.warm_duration_ms)
        if inv.memory_mb > capacity_mb:
            continue
        while capacity_mb - used < inv.memory_mb:
            victim_id = policy.select_victim([c.meta for c in resident.values()])
            victim = next(c for c in resident.values() if c.container_id == victim_id)
            del resident[victim.function_id]
            used -= victim.memory_mb
            policy.on_evict(victim_id)
        meta = ContainerMeta(next_id, inv.function_id, inv.memory_mb, inv.cold_init_ms)
        resident[inv.function_id] = Container(
            next_id, inv.function_id, inv.memory_mb, ContainerState.IDLE, now, meta
        )
        used += inv.memory_mb
        policy.on_insert(meta, now)
        next_id += 1
    return counters
