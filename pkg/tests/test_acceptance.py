"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line. Run with `pytest tests/test_acceptance.py -v -s`.
"""

import itertools
import math
import random
import time

import pytest

from kisssim import analyzer, engine, kiss, trace
from kisssim.metrics import SizeClass
from kisssim.policies import PolicyKind
from kisssim.trace import Invocation

GB = 1024.0


def verdict(criterion, ok, detail):
    line = f"[acceptance {criterion}] {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def sweep_reports(default_events):
    """Baseline/KiSS LRU reports for the memory points the criteria touch."""
    reports = {}
    for gb in (2, 3, 4, 5, 6, 7, 8, 9, 10, 16, 24):
        reports[("baseline", gb)] = kiss.run_baseline(
            default_events, kiss.BaselineConfig(gb * GB)
        )
        reports[("kiss", gb)] = kiss.route_and_run(
            default_events, kiss.KissConfig(gb * GB)
        )
    return reports


def random_small_trace(rng):
    functions = [
        (
            f"f{i}",
            rng.uniform(20, 500),
            rng.randrange(1, 3000),
            rng.randrange(0, 40_000),
        )
        for i in range(rng.randint(1, 10))
    ]
    events = []
    t = 0
    for _ in range(rng.randint(1, 200)):
        t += rng.randrange(0, 3000)
        fid, mem, warm, init = rng.choice(functions)
        events.append(Invocation(t, fid, mem, warm, init))
    return events


def test_criterion_1_conservation_suite():
    rng = random.Random(1001)
    policies = list(PolicyKind)
    checked = 0
    for _ in range(1000):
        events = random_small_trace(rng)
        capacity = rng.choice([128.0, 400.0, 1000.0, 2500.0])
        modes = [("baseline", p, p) for p in policies] + [
            ("kiss", ps, pl) for ps, pl in itertools.product(policies, repeat=2)
        ]
        for mode, ps, pl in modes:
            if mode == "baseline":
                report = kiss.run_baseline(events, kiss.BaselineConfig(capacity, ps))
            else:
                report = kiss.route_and_run(
                    events, kiss.KissConfig(capacity, small_policy=ps, large_policy=pl)
                )
            slices = [report.overall, *report.per_class.values()]
            for s in slices:
                assert s.hits + s.misses + s.drops == s.total_accesses
                assert s.serviceable_accesses == s.hits + s.misses
            for field in ("hits", "misses", "drops", "total_accesses"):
                assert getattr(report.overall, field) == sum(
                    getattr(report.per_class[cls], field) for cls in SizeClass
                )
            assert report.overall.total_accesses == len(events)
            checked += 1
    verdict(1, True, f"conservation exact across {checked} runs (1000 traces x 12 mode/policy combos)")


def run_hand_trace(events, capacity, policy="lru"):
    log = []
    counters = engine.run(events, capacity, policy, log=log.append, check_invariants=True)
    outcomes = [r["outcome"] for r in log if r["kind"] == "arrival"]
    evictions = [r["function_id"] for r in log if r["outcome"] == "evict"]
    o = counters.overall
    return outcomes, evictions, (o.hits, o.misses, o.drops), counters, log


def test_criterion_2_oracle_equivalence():
    checked = 0

    # 1. Sequential reuse of one warm container.
    outcomes, ev, totals, _, log = run_hand_trace(
        [
            Invocation(0, "f1", 100.0, 50, 200),
            Invocation(300, "f1", 100.0, 50, 200),
            Invocation(400, "f1", 100.0, 50, 200),
        ],
        1000.0,
    )
    assert outcomes == ["miss", "hit", "hit"] and ev == [] and totals == (2, 1, 0)
    assert [r["time_ms"] for r in log if r["kind"] == "completion"] == [250, 350, 450]
    checked += 1

    # 2. Completion at the same millisecond serves the arrival.
    outcomes, _, totals, _, _ = run_hand_trace(
        [Invocation(0, "f1", 100.0, 100, 100), Invocation(200, "f1", 100.0, 100, 100)],
        100.0,
    )
    assert outcomes == ["miss", "hit"] and totals == (1, 1, 0)
    checked += 1

    # 3. Busy pool drops, then eviction rescues a later arrival.
    outcomes, ev, totals, _, _ = run_hand_trace(
        [
            Invocation(0, "f1", 100.0, 1000, 0),
            Invocation(500, "f2", 50.0, 100, 10),
            Invocation(1500, "f2", 50.0, 100, 10),
        ],
        100.0,
    )
    assert outcomes == ["miss", "drop", "miss"] and ev == ["f1"] and totals == (0, 2, 1)
    checked += 1

    # 4. LRU evicts the two least recently used containers to fit a big one.
    outcomes, ev, totals, _, _ = run_hand_trace(
        [
            Invocation(0, "f1", 100.0, 10, 10),
            Invocation(100, "f2", 100.0, 10, 10),
            Invocation(200, "f3", 100.0, 10, 10),
            Invocation(300, "f4", 200.0, 10, 10),
            Invocation(400, "f3", 100.0, 10, 10),
        ],
        300.0,
    )
    assert outcomes == ["miss", "miss", "miss", "miss", "hit"]
    assert ev == ["f1", "f2"] and totals == (1, 4, 0)
    checked += 1

    # 5. Frequency policy evicts the least-used function.
    outcomes, ev, totals, _, _ = run_hand_trace(
        [
            Invocation(0, "f1", 100.0, 10, 10),
            Invocation(50, "f2", 100.0, 10, 10),
            Invocation(200, "f1", 100.0, 10, 10),
            Invocation(300, "f3", 100.0, 10, 10),
        ],
        200.0,
        policy="freq",
    )
    assert outcomes == ["miss", "miss", "hit", "miss"]
    assert ev == ["f2"] and totals == (1, 3, 0)
    checked += 1

    # 6. Greedy-dual evicts by priority and raises the inflation clock.
    pool = engine.make_pool(200.0, "gd")
    counters = engine.RunCounters()
    events = [
        Invocation(0, "f1", 100.0, 10, 400),
        Invocation(50, "f2", 100.0, 10, 1000),
        Invocation(1500, "f3", 200.0, 10, 100),
    ]
    log = []
    engine.run_pools(events, [(pool, lambda inv: True)], counters, log=log.append)
    outcomes = [r["outcome"] for r in log if r["kind"] == "arrival"]
    ev = [r["function_id"] for r in log if r["outcome"] == "evict"]
    assert outcomes == ["miss", "miss", "miss"]
    assert ev == ["f1", "f2"]  # priorities 4 then 10
    assert pool.inflation_clock == 10.0
    checked += 1

    # 7. Warm hits take the most recently used idle container.
    outcomes, ev, totals, _, log = run_hand_trace(
        [
            Invocation(0, "f1", 100.0, 10, 10),
            Invocation(5, "f1", 100.0, 10, 10),
            Invocation(100, "f1", 100.0, 10, 10),
            Invocation(200, "f2", 900.0, 10, 10),
        ],
        1000.0,
    )
    assert outcomes == ["miss", "miss", "hit", "miss"]
    hit_record = next(r for r in log if r["outcome"] == "hit")
    evict_record = next(r for r in log if r["outcome"] == "evict")
    assert hit_record["container_id"] == 1 and evict_record["container_id"] == 0
    assert totals == (1, 3, 0)
    checked += 1

    # 8. Oversized arrivals drop without disturbing residents.
    outcomes, ev, totals, counters, _ = run_hand_trace(
        [
            Invocation(0, "f0", 50.0, 10, 0),
            Invocation(100, "big", 150.0, 10, 10),
            Invocation(200, "f0", 50.0, 10, 0),
        ],
        100.0,
    )
    assert outcomes == ["miss", "drop", "hit"] and ev == []
    assert counters.overall.oversized_drops == 1
    checked += 1

    # 9. Partitioned routing keeps the two pools independent.
    events = [
        Invocation(0, "fs", 100.0, 50, 100),
        Invocation(10, "fl", 300.0, 50, 100),
        Invocation(500, "fs", 100.0, 50, 100),
        Invocation(600, "fl", 300.0, 50, 100),
    ]
    report = kiss.route_and_run(events, kiss.KissConfig(1000.0, split=(0.6, 0.4)))
    small, large = report.per_class[SizeClass.SMALL], report.per_class[SizeClass.LARGE]
    assert (small.hits, small.misses, large.hits, large.misses) == (1, 1, 1, 1)
    assert report.overall.drops == 0
    checked += 1

    # 10. Unified pool attributes counters per class without routing.
    events = [
        Invocation(0, "l1", 300.0, 1000, 0),
        Invocation(100, "s1", 50.0, 10, 10),
        Invocation(130, "s2", 60.0, 10, 10),
        Invocation(200, "l2", 350.0, 10, 10),
    ]
    report = kiss.run_baseline(events, kiss.BaselineConfig(400.0))
    small, large = report.per_class[SizeClass.SMALL], report.per_class[SizeClass.LARGE]
    assert (small.misses, small.drops) == (2, 0)
    assert (large.misses, large.drops) == (1, 1)
    assert report.overall.execution_duration_ms == 1040
    checked += 1

    verdict(2, checked == 10, f"{checked}/10 hand-traced runs match the event-queue oracle exactly")


def test_criterion_3_lru_stack_property():
    rng = random.Random(3003)
    violations = 0
    ladder = (120.0, 240.0, 480.0, 960.0, 1920.0, math.inf)
    for _ in range(100):
        sizes = {f"f{i}": rng.uniform(10, 120) for i in range(rng.randint(2, 25))}
        names = list(sizes)
        events = [
            Invocation(t, fid, sizes[fid], 1, 0)
            for t, fid in enumerate(rng.choice(names) for _ in range(rng.randint(50, 400)))
        ]
        previous = -1
        for capacity in ladder:
            hits = engine.run_pure_caching(events, capacity, "lru").overall.hits
            if hits < previous:
                violations += 1
            previous = hits
    verdict(3, violations == 0, f"hit counts non-decreasing over 100 traces x {len(ladder)}-step ladder")


def test_criterion_4_memory_estimation_suite():
    rng = random.Random(4004)
    worst = 0.0
    for _ in range(1000):
        k = rng.randint(1, 25)
        durations = [rng.uniform(0.5, 50_000) for _ in range(k)]
        app_memory = rng.uniform(1, 4000)
        total = sum(durations)
        estimate = sum(
            analyzer.estimate_function_memory(app_memory, d, total) for d in durations
        )
        worst = max(worst, abs(estimate - app_memory) / app_memory)
    identity_ok = all(
        analyzer.estimate_function_memory(m, d, d) == m
        for m, d in ((400.0, 400.0), (123.456, 0.7), (4000.0, 49999.5), (0.125, 3.0))
    )
    verdict(
        4,
        worst <= 1e-9 and identity_ok,
        f"per-app shares sum to app memory (worst rel err {worst:.2e}); identity exact",
    )


def test_criterion_5_cold_start_reduction(sweep_reports):
    base8 = sweep_reports[("baseline", 8)].overall.cold_start_pct
    kiss8 = sweep_reports[("kiss", 8)].overall.cold_start_pct
    reduction = 100.0 * (base8 - kiss8) / base8 if base8 else 0.0
    worst_gap = max(
        sweep_reports[("kiss", gb)].overall.cold_start_pct
        - sweep_reports[("baseline", gb)].overall.cold_start_pct
        for gb in (4, 5, 6, 7, 8, 9, 10)
    )
    ok = base8 > 0 and reduction >= 30.0 and worst_gap <= 2.0
    verdict(
        5,
        ok,
        f"cold starts at 8 GB {base8:.2f}% -> {kiss8:.2f}% ({reduction:.1f}% relative, "
        f"need >=30%); worst 4-10 GB gap {worst_gap:+.2f}pp (cap +2pp)",
    )


def test_criterion_6_drop_reduction(sweep_reports):
    base8 = sweep_reports[("baseline", 8)].overall.drop_pct
    kiss8 = sweep_reports[("kiss", 8)].overall.drop_pct
    at_8_ok = kiss8 <= 0.75 * base8
    worst_low = max(
        sweep_reports[("kiss", gb)].overall.drop_pct
        - sweep_reports[("baseline", gb)].overall.drop_pct
        for gb in (2, 3)
    )
    ok = at_8_ok and worst_low <= 5.0
    verdict(
        6,
        ok,
        f"drops at 8 GB {base8:.2f}% -> {kiss8:.2f}% (need >=25% relative reduction); "
        f"2-3 GB excess {worst_low:+.2f}pp (cap +5pp)",
    )


def test_criterion_7_fairness_per_class(sweep_reports):
    base = sweep_reports[("baseline", 8)].per_class
    part = sweep_reports[("kiss", 8)].per_class
    details = []
    ok = True
    for cls in SizeClass:
        b = base[cls].cold_start_pct
        k = part[cls].cold_start_pct
        details.append(f"{cls.value} {b:.2f}%->{k:.2f}%")
        ok = ok and k < b
    verdict(7, ok, "per-class cold starts both improve at 8 GB: " + ", ".join(details))


def test_criterion_8_policy_independence(default_events):
    matched = {}
    for ps, pl in itertools.product(PolicyKind, repeat=2):
        report = kiss.route_and_run(
            default_events, kiss.KissConfig(8 * GB, small_policy=ps, large_policy=pl)
        )
        o = report.overall
        assert o.hits + o.misses + o.drops == o.total_accesses == len(default_events)
        if ps is pl:
            matched[ps] = o.cold_start_pct
    details = []
    ok = True
    for policy in PolicyKind:
        base = kiss.run_baseline(
            default_events, kiss.BaselineConfig(8 * GB, policy)
        ).overall.cold_start_pct
        holds = matched[policy] < base
        ok = ok and holds
        details.append(f"{policy.value} {base:.2f}%->{matched[policy]:.2f}%{'' if holds else ' (!)'}")
    verdict(8, ok, "all 9 combos conserve; matched-pair ordering at 8 GB: " + ", ".join(details))


def test_criterion_9_scale_saturation(sweep_reports):
    details = []
    ok = True
    for gb in (16, 24):
        for mode in ("baseline", "kiss"):
            o = sweep_reports[(mode, gb)].overall
            details.append(f"{mode}@{gb}GB cold {o.cold_start_pct:.2f}% drops {o.drops}")
            ok = ok and o.cold_start_pct <= 2.0 and o.drops == 0
    verdict(9, ok, "; ".join(details))


def test_criterion_10_determinism(tmp_path, default_events):
    cfg = trace.default_edge_config(seed=42)
    regenerated = trace.synthesize_edge_trace(cfg)
    trace_same = regenerated == default_events

    files = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        trace.write_events(path, regenerated)
        files.append(path.read_bytes())
    bytes_same = files[0] == files[1]

    reports = [
        kiss.route_and_run(default_events, kiss.KissConfig(8 * GB)).to_json()
        for _ in range(2)
    ]
    report_same = reports[0] == reports[1]
    ok = trace_same and bytes_same and report_same
    verdict(
        10,
        ok,
        f"regenerated trace identical={trace_same}, file bytes identical={bytes_same}, "
        f"repeated report JSON identical={report_same}",
    )


def test_criterion_11_stress_smoke():
    events = trace.synthesize_edge_trace(trace.stress_config(seed=42))
    n = len(events)
    assert 4_000_000 <= n <= 5_000_000
    started = time.perf_counter()
    base = kiss.run_baseline(events, kiss.BaselineConfig(10 * GB))
    part = kiss.route_and_run(events, kiss.KissConfig(10 * GB))
    elapsed = time.perf_counter() - started
    conserved = all(
        r.overall.hits + r.overall.misses + r.overall.drops == n for r in (base, part)
    )
    ok = (
        elapsed <= 300.0
        and conserved
        and part.overall.hit_rate_pct > base.overall.hit_rate_pct
    )
    verdict(
        11,
        ok,
        f"{n} events on 10 GB in {elapsed:.0f}s (cap 300s); conservation={conserved}; "
        f"hit rate baseline {base.overall.hit_rate_pct:.3f}% < kiss {part.overall.hit_rate_pct:.3f}%",
    )
