#!/usr/bin/env python3
"""From runs to a validated submission and the cross-submission table.

A submission bundle is a directory holding the performance log, the measured
accuracy, the system descriptor, and the compliance verdicts. The validator
recomputes the summary from the raw trace, applies the duration/count rules,
the accuracy gate, compliance, and category consistency; the score it
reports is the p999 latency.
"""

import dataclasses
import tempfile
from pathlib import Path

from rtbench import (
    SampleStore,
    SimulatedClock,
    SimulatedSut,
    SimulatedSutConfig,
    SutDescriptor,
    default_settings,
    profile_by_name,
    read_bundle,
    render_report,
    run_compliance,
    run_log_events,
    run_single_stream,
    summarize,
    validate_submission,
    write_bundle,
)
from rtbench.reporter import SubmissionBundle

profile = profile_by_name("ssd_resnet50")
settings = dataclasses.replace(
    default_settings(profile),
    min_query_count=200,
    min_duration_ns=0,
    store_size=8,
    sample_bytes=64,
)

clock = SimulatedClock()
store = SampleStore(settings.store_size, settings.sample_bytes, settings.seed)
sut = SimulatedSut(SimulatedSutConfig("fixed", (8_000_000,), echo_responses=True), store, clock)

log = run_single_stream(sut, settings, profile, clock=clock)
verdicts = run_compliance(sut, settings, profile, clock=clock)

descriptor = SutDescriptor("desk-sim", "development_system", False, True, True)

workdir = Path(tempfile.mkdtemp(prefix="rtbench-demo-"))
for name, measured in (("good", 0.7141), ("too-lossy", 0.6943)):
    bundle = SubmissionBundle(
        profile_name=profile.name,
        performance_events=tuple(run_log_events(log, summarize(log))),
        accuracy_metric="map",
        accuracy_measured=measured,
        descriptor=descriptor,
        verdicts=tuple(verdicts),
    )
    write_bundle(workdir / name, bundle)

reports = []
for name in ("good", "too-lossy"):
    report = validate_submission(read_bundle(workdir / name), profile)
    reports.append(report)
    print(f"{name}: {'VALID' if report.valid else 'invalid'}")
    for failure in report.failures():
        print(f"  {failure}")

print()
print(render_report(reports))
print(f"bundles left in {workdir} for inspection")
