"""Command-line frontend: workload analysis, trace synthesis, single
simulations, memory sweeps and the overload stress comparison.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal
consistency violation.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import analyzer, kiss, metrics, trace
from .errors import ConfigError, DataError, InternalConsistencyError
from .metrics import DEFAULT_THRESHOLD_MB, SizeClass
from .policies import PolicyKind

GB_MB = 1024.0


class _Parser(argparse.ArgumentParser):
    # Usage errors exit 1 (argparse defaults to 2, which we reserve for data).
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class ModeSpec:
    """One simulation configuration cell: mode, split and policies."""

    mode: str  # "baseline" | "kiss"
    split: tuple[float, float] | None
    small_policy: PolicyKind
    large_policy: PolicyKind

    @staticmethod
    def parse(text: str) -> "ModeSpec":
        parts = text.split(":")
        mode = parts[0].strip().lower()
        if mode == "baseline":
            if len(parts) > 2:
                raise ConfigError(f"baseline mode spec takes at most one policy: {text!r}")
            policy = PolicyKind.parse(parts[1]) if len(parts) == 2 else PolicyKind.LRU
            return ModeSpec("baseline", None, policy, policy)
        if mode == "kiss":
            split = kiss.parse_split(parts[1]) if len(parts) >= 2 and parts[1] else kiss.DEFAULT_SPLIT
            if len(parts) >= 3 and parts[2]:
                names = parts[2].split("/")
                if len(names) == 1:
                    small = large = PolicyKind.parse(names[0])
                elif len(names) == 2:
                    small, large = PolicyKind.parse(names[0]), PolicyKind.parse(names[1])
                else:
                    raise ConfigError(f"kiss policies must be 'p' or 'ps/pl': {text!r}")
            else:
                small = large = PolicyKind.LRU
            return ModeSpec("kiss", split, small, large)
        raise ConfigError(f"unknown mode {parts[0]!r}; expected baseline or kiss")

    @property
    def split_label(self) -> str:
        return kiss.format_split(self.split) if self.split else "unified"

    @property
    def label(self) -> str:
        if self.mode == "baseline":
            return f"baseline:{self.small_policy.value}"
        return f"kiss:{self.split_label}:{self.small_policy.value}/{self.large_policy.value}"

    @property
    def slug(self) -> str:
        return self.label.replace(":", "_").replace("/", "-")

    def run(self, events, total_memory_mb: float, threshold_mb: float,
            log=None) -> metrics.SimReport:
        if self.mode == "baseline":
            cfg = kiss.BaselineConfig(total_memory_mb, self.small_policy, threshold_mb)
            return kiss.run_baseline(events, cfg, log=log)
        cfg = kiss.KissConfig(total_memory_mb, self.split, threshold_mb,
                              self.small_policy, self.large_policy)
        return kiss.route_and_run(events, cfg, log=log)


def _mode_from_config_file(path) -> tuple[ModeSpec, float, float, int]:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if "total_memory_mb" not in raw:
        raise ConfigError("config must define total_memory_mb")
    total = float(raw["total_memory_mb"])
    mode = raw.get("mode", "baseline").lower()
    threshold = float(raw.get("threshold_mb", DEFAULT_THRESHOLD_MB))
    seed = int(raw.get("seed", 42))
    policy = dict(raw.get("policy", {}))
    # Flat INI-style keys are accepted alongside the nested form.
    for role in ("small", "large", "unified"):
        if f"policy.{role}" in raw:
            policy[role] = raw[f"policy.{role}"]
    if mode == "kiss":
        split_raw = raw.get("split", "80/20")
        split = kiss.parse_split(split_raw) if isinstance(split_raw, str) else (
            float(split_raw[0]), float(split_raw[1]))
        if abs(split[0] + split[1] - 1.0) > 1e-9:
            split = (split[0] / (split[0] + split[1]), split[1] / (split[0] + split[1]))
        spec = ModeSpec(
            "kiss",
            split,
            PolicyKind.parse(policy.get("small", "lru")),
            PolicyKind.parse(policy.get("large", "lru")),
        )
    elif mode == "baseline":
        unified = PolicyKind.parse(policy.get("unified", "lru"))
        spec = ModeSpec("baseline", None, unified, unified)
    else:
        raise ConfigError(f"unknown mode {mode!r} in config")
    return spec, total, threshold, seed


def _write_json(path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _percentile_csv(path, table: analyzer.PercentileTable) -> None:
    with open(path, "w") as fh:
        fh.write("percentile,value\n")
        for p, v in table.entries:
            fh.write(f"{p:g},{v!r}\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    apps, functions = trace.parse_raw_trace(args.invocations, args.durations, args.memory)
    profiles = analyzer.build_profiles(apps, functions, args.threshold_mb)
    events = trace.expand_counts_to_events(functions, apps, args.seed)

    app_table = analyzer.percentile_distribution([a.avg_app_memory_mb for a in apps])
    fn_table = analyzer.percentile_distribution([p.est_memory_mb for p in profiles])
    freq = analyzer.frequency_report(events, profiles, args.bucket_ms, args.threshold_mb)
    iat_cfg = analyzer.IATWindowConfig(args.window_ms, args.overlap_ms, args.zscore)
    iat = analyzer.iat_analysis(events, iat_cfg, args.threshold_mb)

    _percentile_csv(out / "app_memory_percentiles.csv", app_table)
    _percentile_csv(out / "function_memory_percentiles.csv", fn_table)
    with open(out / "frequency.csv", "w") as fh:
        fh.write("bucket_start_ms,small_count,large_count,ratio\n")
        for b in freq:
            fh.write(f"{b.bucket_start_ms},{b.small_count},{b.large_count},{b.ratio:.6f}\n")
    for cls in SizeClass:
        _percentile_csv(out / f"iat_{cls.value}_percentiles.csv", iat[cls])
    _write_json(
        out / "analysis.json",
        {
            "app_memory_percentiles": list(app_table.entries),
            "function_memory_percentiles": list(fn_table.entries),
            "frequency": [b._asdict() for b in freq],
            "iat_percentiles": {cls.value: list(iat[cls].entries) for cls in SizeClass},
            "profiles": [
                {
                    "function_id": p.function_id,
                    "est_memory_mb": p.est_memory_mb,
                    "avg_duration_ms": p.avg_duration_ms,
                    "total_invocations": p.total_invocations,
                    "size_class": p.size_class.value,
                }
                for p in profiles
            ],
        },
    )
    print(f"analyzed {len(functions)} functions across {len(apps)} apps -> {out}")
    return 0


def _load_synthesis_config(args) -> trace.SynthesisConfig:
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
        if args.seed is not None:
            raw["seed"] = args.seed
        return trace.SynthesisConfig.from_dict(raw)
    cfg = trace.default_edge_config(seed=args.seed if args.seed is not None else 42)
    cfg.validate()
    return cfg


def cmd_synthesize(args) -> int:
    cfg = _load_synthesis_config(args)
    events = trace.synthesize_edge_trace(cfg)
    out = Path(args.out) if args.out else Path("out") / f"edge_trace_seed{cfg.seed}.csv"
    n = trace.write_events(out, events)
    small = sum(1 for e in events if SizeClass.of(e.memory_mb, DEFAULT_THRESHOLD_MB) is SizeClass.SMALL)
    large = n - small
    ratio = small / large if large else float("inf")
    print(f"wrote {n} events to {out}")
    print(f"small invocations: {small}  large invocations: {large}  achieved ratio: {ratio:.3f}")
    return 0


def _open_event_log(path):
    if not path:
        return None, None
    handle = open(path, "w")

    def sink(record: dict) -> None:
        handle.write(json.dumps(record, sort_keys=True) + "\n")

    return sink, handle


def cmd_simulate(args) -> int:
    if args.config:
        spec, total_mb, threshold, seed = _mode_from_config_file(args.config)
    else:
        if args.memory_mb is None and args.memory_gb is None:
            raise ConfigError("specify --memory-mb or --memory-gb (or --config)")
        total_mb = args.memory_mb if args.memory_mb is not None else args.memory_gb * GB_MB
        threshold = args.threshold_mb
        seed = args.seed if args.seed is not None else 42
        if args.mode == "baseline":
            policy = PolicyKind.parse(args.policy)
            spec = ModeSpec("baseline", None, policy, policy)
        else:
            spec = ModeSpec(
                "kiss",
                kiss.parse_split(args.split),
                PolicyKind.parse(args.policy_small or args.policy),
                PolicyKind.parse(args.policy_large or args.policy),
            )
    events = trace.load_events(args.trace)
    sink, handle = _open_event_log(args.event_log)
    try:
        report = spec.run(events, total_mb, threshold, log=sink)
    finally:
        if handle:
            handle.close()
    payload = {
        "config": {
            "label": spec.label,
            "mode": spec.mode,
            "split": spec.split_label,
            "policy_small": spec.small_policy.value,
            "policy_large": spec.large_policy.value,
            "total_memory_mb": total_mb,
            "threshold_mb": threshold,
            "seed": seed,
            "trace": str(args.trace),
            "events": len(events),
        },
        "report": report.to_dict(),
    }
    if args.format == "csv":
        text = metrics.SWEEP_CSV_COLUMNS + "\n" + metrics.sweep_csv_row(
            total_mb / GB_MB, spec.mode, spec.split_label,
            spec.small_policy.value, spec.large_policy.value, report) + "\n"
    else:
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        print(f"wrote report to {path}")
    else:
        sys.stdout.write(text)
    return 0


def _parse_memory_points(text: str) -> list[float]:
    points: list[float] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" in chunk:
            bounds = chunk.split(":")
            if len(bounds) not in (2, 3):
                raise ConfigError(f"memory range must be lo:hi[:step], got {chunk!r}")
            lo, hi = float(bounds[0]), float(bounds[1])
            step_gb = float(bounds[2]) if len(bounds) == 3 else 1.0
            if step_gb <= 0 or hi < lo:
                raise ConfigError(f"bad memory range {chunk!r}")
            value = lo
            while value <= hi + 1e-9:
                points.append(round(value, 6))
                value += step_gb
        else:
            points.append(float(chunk))
    if not points:
        raise ConfigError("no memory points given")
    if any(p <= 0 for p in points):
        raise ConfigError("memory points must be positive")
    ordered = sorted(set(points))
    if len(ordered) != len(points):
        raise ConfigError("memory points must be strictly increasing")
    return ordered


@dataclass(frozen=True)
class SweepSpec:
    """One full sweep: memory ladder x mode cells over a single trace."""

    memory_points_gb: tuple[float, ...]
    modes: tuple[ModeSpec, ...]
    trace_path: str
    output_dir: str
    threshold_mb: float = DEFAULT_THRESHOLD_MB
    seed: int = 42
    jobs: int = 1

    def validate(self) -> None:
        if not self.modes:
            raise ConfigError("sweep needs at least one mode")
        if not self.memory_points_gb:
            raise ConfigError("sweep needs at least one memory point")
        if any(p <= 0 for p in self.memory_points_gb):
            raise ConfigError("memory points must be positive")
        if list(self.memory_points_gb) != sorted(set(self.memory_points_gb)):
            raise ConfigError("memory points must be strictly increasing")

    @property
    def cells(self) -> list[tuple[float, str, float]]:
        return [
            (mem, spec.label, self.threshold_mb)
            for mem in self.memory_points_gb
            for spec in self.modes
        ]


_SWEEP_EVENTS = None
_SWEEP_TRACE_PATH = None


def _sweep_worker_init(trace_path: str) -> None:
    global _SWEEP_EVENTS, _SWEEP_TRACE_PATH
    _SWEEP_TRACE_PATH = trace_path
    _SWEEP_EVENTS = trace.load_events(trace_path)


def _sweep_cell(cell) -> tuple[str, float, str, dict]:
    memory_gb, spec_text, threshold = cell
    spec = ModeSpec.parse(spec_text)
    report = spec.run(_SWEEP_EVENTS, memory_gb * GB_MB, threshold)
    row = metrics.sweep_csv_row(
        memory_gb, spec.mode, spec.split_label,
        spec.small_policy.value, spec.large_policy.value, report,
    )
    return row, memory_gb, spec_text, report.to_dict()


def cmd_sweep(args) -> int:
    spec = SweepSpec(
        memory_points_gb=tuple(_parse_memory_points(args.memory_gb)),
        modes=tuple(
            ModeSpec.parse(m) for m in (args.modes or ["baseline:lru", "kiss:80/20:lru/lru"])
        ),
        trace_path=str(args.trace),
        output_dir=str(args.out),
        threshold_mb=args.threshold_mb,
        seed=args.seed if args.seed is not None else 42,
        jobs=args.jobs or 1,
    )
    spec.validate()
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = spec.cells
    rows: list[str] = []
    failures: list[str] = []
    jobs = spec.jobs
    if jobs > 1 and len(cells) > 1:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=jobs, initializer=_sweep_worker_init, initargs=(spec.trace_path,)
        ) as pool:
            futures = {pool.submit(_sweep_cell, cell): cell for cell in cells}
            for future in concurrent.futures.as_completed(futures):
                cell = futures[future]
                try:
                    row, mem, label, report = future.result()
                except Exception as exc:  # keep the remaining cells running
                    failures.append(f"{cell[1]} @ {cell[0]:g} GB: {exc}")
                    continue
                rows.append(row)
                _write_json(out / f"{mem:g}gb_{ModeSpec.parse(label).slug}.json", report)
    else:
        _sweep_worker_init(spec.trace_path)
        for cell in cells:
            try:
                row, mem, label, report = _sweep_cell(cell)
            except Exception as exc:
                failures.append(f"{cell[1]} @ {cell[0]:g} GB: {exc}")
                continue
            rows.append(row)
            _write_json(out / f"{mem:g}gb_{ModeSpec.parse(label).slug}.json", report)

    rows.sort(key=lambda r: (float(r.split(",")[0]), r))
    sweep_path = out / "sweep.csv"
    with open(sweep_path, "w") as fh:
        fh.write(metrics.SWEEP_CSV_COLUMNS + "\n")
        for row in rows:
            fh.write(row + "\n")
    print(f"wrote {len(rows)} sweep rows to {sweep_path}")
    if failures:
        for failure in failures:
            print(f"cell failed: {failure}", file=sys.stderr)
        return 3
    return 0


def cmd_stress(args) -> int:
    total_mb = args.memory_gb * GB_MB
    results = {}
    timings = {}
    for label, spec_text in (("baseline", "baseline:lru"), ("kiss", "kiss:80/20:lru/lru")):
        spec = ModeSpec.parse(spec_text)
        events = trace.iter_events(args.trace)
        started = time.perf_counter()
        report = spec.run(events, total_mb, args.threshold_mb)
        timings[label] = time.perf_counter() - started
        results[label] = report

    payload = {"memory_gb": args.memory_gb, "trace": str(args.trace)}
    for label, report in results.items():
        payload[label] = {
            "serviced": report.overall.serviceable_accesses,
            "hit_rate_pct": report.overall.hit_rate_pct,
            "report": report.to_dict(),
        }
    if args.out:
        _write_json(Path(args.out) / "stress_report.json", payload)

    print(f"stress comparison at {args.memory_gb:g} GB")
    for label, report in results.items():
        o = report.overall
        print(
            f"  {label:<8} total={o.total_accesses}  serviced={o.serviceable_accesses}  "
            f"hits={o.hits}  hit_rate={o.hit_rate_pct:.3f}%  drops={o.drops}  "
            f"wall={timings[label]:.1f}s  ({o.total_accesses / max(timings[label], 1e-9):,.0f} ev/s)"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kisssim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_common(p):
        p.add_argument("--seed", type=int, default=None, help="seed for randomized steps")
        p.add_argument("--out", default=None, help="output file or directory")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--threshold-mb", type=float, default=DEFAULT_THRESHOLD_MB,
                       help="small/large classification threshold")

    p = sub.add_parser("analyze", help="workload analysis reports from raw trace files")
    add_common(p)
    p.add_argument("--invocations", required=True)
    p.add_argument("--durations", required=True)
    p.add_argument("--memory", required=True)
    p.add_argument("--bucket-ms", type=int, default=60_000)
    p.add_argument("--window-ms", type=int, default=3_600_000)
    p.add_argument("--overlap-ms", type=int, default=1_800_000)
    p.add_argument("--zscore", type=float, default=3.0)
    p.set_defaults(func=cmd_analyze, out="out/analysis")

    p = sub.add_parser("synthesize", help="generate an edge-scaled event trace")
    add_common(p)
    p.add_argument("--config", default=None, help="JSON file with synthesis settings")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("simulate", help="run one simulation over an event trace")
    add_common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--config", default=None, help="JSON simulation config")
    p.add_argument("--mode", choices=("baseline", "kiss"), default="baseline")
    p.add_argument("--memory-mb", type=float, default=None)
    p.add_argument("--memory-gb", type=float, default=None)
    p.add_argument("--split", default="80/20")
    p.add_argument("--policy", default="lru", help="unified-pool policy")
    p.add_argument("--policy-small", default=None)
    p.add_argument("--policy-large", default=None)
    p.add_argument("--event-log", default=None, help="write a JSON Lines event log here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a memory-size sweep across modes")
    add_common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--memory-gb", default="1:24", help="points like '1:24', '1:24:2' or '1,2,8'")
    p.add_argument("--modes", nargs="*", default=None,
                   help="mode specs like baseline:lru kiss:80/20:lru/lru")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_sweep, out="out/sweep")

    p = sub.add_parser("stress", help="overload comparison of baseline vs kiss")
    add_common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--memory-gb", type=float, default=10.0)
    p.set_defaults(func=cmd_stress)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except InternalConsistencyError as exc:
        print(f"internal consistency violation: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
