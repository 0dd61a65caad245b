"""Replacement policies that rank idle containers for eviction.

Three strategies are supported: least-recently-used, greedy-dual (an
inflating priority that weighs reuse frequency and initialization cost
against container size) and pure invocation frequency. Each warm pool owns
exactly one policy instance; state never crosses pools.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import ConfigError, PolicyContractError


class PolicyKind(Enum):
    LRU = "lru"
    GREEDY_DUAL = "gd"
    FREQUENCY = "freq"

    @staticmethod
    def parse(name: str) -> "PolicyKind":
        try:
            return PolicyKind(name.strip().lower())
        except ValueError:
            raise ConfigError(f"unknown policy {name!r}; expected one of lru, gd, freq") from None


@dataclass
class ContainerMeta:
    """Per-container bookkeeping consumed by the policies."""

    container_id: int
    function_id: str
    memory_mb: float
    cold_init_ms: int  # eviction cost for greedy-dual
    last_access_ms: int = 0
    access_count: int = 0
    gd_priority: float = 0.0


class ReplacementPolicy:
    """Base policy: tracks containers and maintains the shared meta fields."""

    kind: PolicyKind

    def __init__(self) -> None:
        self._tracked: dict[int, ContainerMeta] = {}

    def on_insert(self, meta: ContainerMeta, now_ms: int) -> None:
        if meta.container_id in self._tracked:
            raise PolicyContractError(f"container {meta.container_id} already tracked")
        meta.last_access_ms = now_ms
        meta.access_count = 1
        self._tracked[meta.container_id] = meta
        self._after_touch(meta)

    def on_hit(self, container_id: int, now_ms: int) -> None:
        meta = self._tracked.get(container_id)
        if meta is None:
            raise PolicyContractError(f"hit on untracked container {container_id}")
        meta.last_access_ms = now_ms
        meta.access_count += 1
        self._after_touch(meta)

    def on_evict(self, container_id: int) -> None:
        if self._tracked.pop(container_id, None) is None:
            raise PolicyContractError(f"evicting untracked container {container_id}")

    def select_victim(self, idle_candidates: list[ContainerMeta]) -> int:
        if not idle_candidates:
            raise PolicyContractError("select_victim called with no idle candidates")
        victim = min(idle_candidates, key=lambda m: (self._rank(m), m.container_id))
        self._on_victim(victim)
        return victim.container_id

    # Subclass hooks.
    def _after_touch(self, meta: ContainerMeta) -> None:
        pass

    def _rank(self, meta: ContainerMeta) -> float:
        raise NotImplementedError

    def _on_victim(self, meta: ContainerMeta) -> None:
        pass


class LruPolicy(ReplacementPolicy):
    kind = PolicyKind.LRU

    def _rank(self, meta: ContainerMeta) -> float:
        return meta.last_access_ms


class FrequencyPolicy(ReplacementPolicy):
    kind = PolicyKind.FREQUENCY

    def _rank(self, meta: ContainerMeta) -> float:
        return meta.access_count


class GreedyDualPolicy(ReplacementPolicy):
    """Greedy-dual-size-frequency: priority = L + count * init_cost / size.

    L is the pool's inflation clock. It is raised to the evicted priority and
    never lowered: busy containers are not eviction candidates, so a victim's
    priority can sit below a clock that later evictions already raised.
    """

    kind = PolicyKind.GREEDY_DUAL

    def __init__(self) -> None:
        super().__init__()
        self.clock = 0.0

    def _after_touch(self, meta: ContainerMeta) -> None:
        meta.gd_priority = (
            self.clock + meta.access_count * meta.cold_init_ms / meta.memory_mb
        )

    def _rank(self, meta: ContainerMeta) -> float:
        return meta.gd_priority

    def _on_victim(self, meta: ContainerMeta) -> None:
        self.clock = max(self.clock, meta.gd_priority)


def make_policy(kind: PolicyKind | str) -> ReplacementPolicy:
    if isinstance(kind, str):
        kind = PolicyKind.parse(kind)
    return {
        PolicyKind.LRU: LruPolicy,
        PolicyKind.GREEDY_DUAL: GreedyDualPolicy,
        PolicyKind.FREQUENCY: FrequencyPolicy,
    }[kind]()
