"""rtbench: a benchmark harness for real-time inference systems.

Drives a pluggable system under test through closed-loop (Single Stream)
and fixed-rate open-loop (Constant Stream) scenarios, reports tail latency
as exact order statistics, gates accuracy against an FP32 reference, runs
closed-division compliance tests, and validates submission bundles.
"""

from .clock import MonotonicClock, SimulatedClock
from .compliance import (
    ComplianceVerdict,
    run_compliance,
    test_accuracy_in_perf,
    test_caching,
    test_determinism,
)
from .endpoints import sut_from_endpoint
from .engine import (
    Completion,
    Query,
    RunLog,
    generate_schedule,
    run_accuracy,
    run_constant_stream,
    run_single_stream,
)
from .ipc import RemoteSut, StubServer, check_protocol_conformance, remote_sut
from .metrics import (
    BBox,
    GateResult,
    SegmentationMask,
    accuracy_gate,
    average_precision,
    iou,
    mean_ap,
    miou,
)
from .profiles import (
    BenchmarkProfile,
    RunSettings,
    SettingsError,
    builtin_profiles,
    default_settings,
    effective_rate_hz,
    load_settings,
    profile_by_name,
    validate,
)
from .reporter import (
    LogFormatError,
    SubmissionBundle,
    SubmissionReport,
    parse_log,
    read_bundle,
    recompute_summary,
    render_report,
    run_log_events,
    validate_submission,
    write_bundle,
    write_log,
)
from .samples import SampleStore
from .stats import (
    RunSummary,
    ValidityReport,
    check_validity,
    min_query_count,
    percentile,
    summarize,
)
from .sut import (
    SimulatedSut,
    SimulatedSutConfig,
    SutContract,
    SutDescriptor,
    SutError,
    TruncatingSut,
    descriptor_violations,
    run_sut_conformance,
    simulate_latency,
)

__version__ = "0.1.0"
