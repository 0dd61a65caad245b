"""Discrete-event toolkit for size-aware warm-pool memory management in
serverless edge environments: trace ingestion and synthesis, workload
analysis, a warm-pool simulator with pluggable replacement policies, and a
partitioned (KiSS) load balancer compared against a unified baseline.
"""

from .analyzer import (
    FunctionProfile,
    IATWindowConfig,
    PercentileTable,
    build_profiles,
    estimate_function_memory,
    frequency_report,
    iat_analysis,
    percentile_distribution,
)
from .engine import WarmPool, run, run_pools, run_pure_caching
from .errors import (
    ConfigError,
    DataError,
    DomainError,
    InternalConsistencyError,
    KissSimError,
    PolicyContractError,
    ReferentialIntegrityError,
    TraceParseError,
)
from .kiss import BaselineConfig, KissConfig, classify, route_and_run, run_baseline
from .metrics import RunCounters, SimReport, SizeClass, compare, finalize
from .policies import ContainerMeta, PolicyKind, make_policy
from .trace import (
    Invocation,
    RawAppRecord,
    RawFunctionRecord,
    SynthesisConfig,
    default_edge_config,
    expand_counts_to_events,
    iter_events,
    load_events,
    parse_raw_trace,
    stress_config,
    synthesize_edge_trace,
    write_events,
)

__version__ = "0.1.0"
