import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import sim_env
from rtbench import run_accuracy, run_constant_stream, run_single_stream, summarize
from rtbench.compliance import ComplianceVerdict
from rtbench.profiles import RunSettings
from rtbench.recording import Completion, Query
from rtbench.reporter import (
    LogFormatError,
    LogHeader,
    SubmissionBundle,
    parse_log,
    read_bundle,
    recompute_summary,
    render_report,
    run_log_events,
    validate_submission,
    verdict_to_line,
    write_bundle,
    write_log,
)
from rtbench.stats import RunSummary
from rtbench.sut import SutDescriptor


def _finished_run(**kwargs):
    profile, settings, clock, sut, _ = sim_env(min_query_count=kwargs.pop("n", 20), **kwargs)
    log = run_single_stream(sut, settings, profile, clock=clock)
    summary = summarize(log)
    return log, summary


# -- serialization ------------------------------------------------------------


def test_issue_line_exact_shape():
    line = write_log([Query(0, (3,), None, 12)]).strip()
    assert line == "I,0,,12,3"


def test_roundtrip_identity_for_simulated_run():
    log, summary = _finished_run()
    events = run_log_events(log, summary)
    assert parse_log(write_log(events)) == events


def test_roundtrip_constant_stream_run():
    profile, settings, clock, sut, _ = sim_env(scenario="constant_stream", min_query_count=10)
    log = run_constant_stream(sut, settings, profile, clock=clock)
    events = run_log_events(log, summarize(log))
    assert parse_log(write_log(events)) == events


def test_parse_rejects_tampered_field_count():
    log, summary = _finished_run(n=3)
    lines = write_log(run_log_events(log, summary)).splitlines()
    lines[2] = lines[2] + ",999"  # completion line gains a field
    with pytest.raises(LogFormatError, match="line 3"):
        parse_log("\n".join(lines) + "\n")


def test_parse_rejects_unknown_tag():
    log, summary = _finished_run(n=2)
    text = write_log(run_log_events(log, summary)) + "Z,1,2\n"
    with pytest.raises(LogFormatError, match="unknown record tag"):
        parse_log(text)


def test_parse_rejects_version_mismatch():
    log, summary = _finished_run(n=2)
    text = write_log(run_log_events(log, summary))
    with pytest.raises(LogFormatError, match="version"):
        parse_log(text.replace("H,1,", "H,9,", 1))


def test_parse_requires_header_first():
    with pytest.raises(LogFormatError):
        parse_log("I,0,,12,3\n")


def test_header_endpoint_with_commas_roundtrips():
    settings = RunSettings(profile="ssd_resnet50", sut_endpoint="sim:uniform:1ms,2ms:seed=4")
    events = [LogHeader(1, "ssd_resnet50", settings)]
    assert parse_log(write_log(events)) == events


_evidence_values = st.one_of(
    st.booleans(),
    st.integers(min_value=-(2**62), max_value=2**62),
    st.floats(allow_nan=False, allow_infinity=False),
    st.text(max_size=40),
)


@given(
    name=st.text(alphabet="abcdefghijklmnopqrstuvwxyz_", min_size=1, max_size=20),
    passed=st.booleans(),
    evidence=st.dictionaries(
        st.text(alphabet="abcdefghijklmnopqrstuvwxyz_", min_size=1, max_size=12),
        _evidence_values,
        max_size=6,
    ),
)
def test_verdict_line_roundtrip(name, passed, evidence):
    verdict = ComplianceVerdict(name, passed, evidence)
    settings = RunSettings(profile="p")
    events = [LogHeader(1, "p", settings), verdict]
    assert parse_log(write_log(events)) == events


@given(
    n=st.integers(min_value=1, max_value=30),
    scheduled=st.booleans(),
    seed=st.integers(min_value=0, max_value=2**64 - 1),
)
def test_roundtrip_synthetic_event_streams(n, scheduled, seed):
    settings = RunSettings(profile="ssd_resnet50", seed=seed)
    events = [LogHeader(1, "ssd_resnet50", settings)]
    for i in range(n):
        events.append(Query(i, (i % 4, (i + 1) % 4), i * 100 if scheduled else None, i * 100 + 1))
        events.append(Completion(i, i * 100 + 50, (seed + i) % 2**64))
    assert parse_log(write_log(events)) == events


# -- re-analysis ----------------------------------------------------------------


def test_recompute_equals_embedded_bit_exact():
    for kwargs in (
        {},
        {"distribution": "uniform", "params": (1_000_000, 2_000_000), "store_size": 8},
        {"n": 100},
    ):
        log, summary = _finished_run(**kwargs)
        events = parse_log(write_log(run_log_events(log, summary)))
        assert recompute_summary(events) == summary


def test_recompute_constant_stream_uses_schedule_origin():
    # Hand-built 3-query trace: scheduled 0/100/200, completions 150/250/350.
    settings = RunSettings(profile="p", scenario="constant_stream", min_query_count=3)
    events = [LogHeader(1, "p", settings)]
    for i, (sched, comp) in enumerate([(0, 150), (100, 250), (200, 350)]):
        events.append(Query(i, (0,), sched, sched))
        events.append(Completion(i, comp, 0))
    summary = recompute_summary(events)
    assert summary.min_ns == summary.max_ns == 150  # completion - scheduled
    assert summary.overrun_count == 2  # 150 > 100 and 250 > 200
    assert summary.duration_ns == 350


def test_recompute_missing_completion_errors():
    log, summary = _finished_run(n=4)
    events = run_log_events(log, summary)
    stripped = [e for e in events if not (isinstance(e, Completion) and e.query_id == 2)]
    with pytest.raises(LogFormatError, match="incomplete"):
        recompute_summary(stripped)


def test_recompute_gap_in_query_ids_errors():
    settings = RunSettings(profile="p")
    events = [
        LogHeader(1, "p", settings),
        Query(0, (0,), None, 0),
        Completion(0, 5, 0),
        Query(2, (0,), None, 10),
        Completion(2, 15, 0),
    ]
    with pytest.raises(LogFormatError, match="gapless"):
        recompute_summary(events)


# -- bundles and validation -------------------------------------------------------


def _make_bundle(tmp_path, measured=0.7141, category="development_system", verdict_passed=True,
                 descriptor=None, n=30):
    log, summary = _finished_run(n=n)
    events = run_log_events(log, summary)
    descriptor = descriptor or SutDescriptor(
        "desk-sim", category, False, category != "engineering_sample", category != "engineering_sample"
    )
    verdicts = (
        ComplianceVerdict("determinism", verdict_passed, {"seed": 0}),
        ComplianceVerdict("caching", True, {"seed": 0, "ratio": 1.0}),
    )
    bundle = SubmissionBundle(
        profile_name="ssd_resnet50",
        performance_events=tuple(events),
        accuracy_metric="map",
        accuracy_measured=measured,
        descriptor=descriptor,
        verdicts=verdicts,
    )
    path = tmp_path / "bundle"
    write_bundle(path, bundle)
    return path, bundle


def test_bundle_roundtrip(tmp_path):
    path, bundle = _make_bundle(tmp_path)
    loaded = read_bundle(path)
    assert loaded.profile_name == bundle.profile_name
    assert loaded.performance_events == bundle.performance_events
    assert loaded.accuracy_measured == bundle.accuracy_measured
    assert loaded.descriptor == bundle.descriptor
    assert loaded.verdicts == bundle.verdicts


def test_bundle_missing_component(tmp_path):
    path, _ = _make_bundle(tmp_path)
    (path / "accuracy.txt").unlink()
    with pytest.raises(LogFormatError, match="missing component"):
        read_bundle(path)


def _profile_for_validation():
    from rtbench import profile_by_name

    return profile_by_name("ssd_resnet50")


def test_validate_submission_valid(tmp_path):
    path, _ = _make_bundle(tmp_path)
    report = validate_submission(read_bundle(path), _profile_for_validation())
    assert report.valid
    assert report.score_p999_ns == 10_000_000
    assert report.overrun_count is None


def test_validate_submission_accuracy_gate_fails(tmp_path):
    path, _ = _make_bundle(tmp_path, measured=0.6943)
    report = validate_submission(read_bundle(path), _profile_for_validation())
    assert not report.valid
    assert any("accuracy_gate" in f for f in report.failures())


def test_validate_submission_category_invariant(tmp_path):
    bad = SutDescriptor("naughty", "engineering_sample", False, False, True)
    path, _ = _make_bundle(tmp_path, descriptor=bad)
    report = validate_submission(read_bundle(path), _profile_for_validation())
    assert not report.valid
    assert any("category" in f for f in report.failures())


def test_validate_submission_compliance_failure(tmp_path):
    path, _ = _make_bundle(tmp_path, verdict_passed=False)
    report = validate_submission(read_bundle(path), _profile_for_validation())
    assert not report.valid
    assert any("compliance_determinism" in f for f in report.failures())


def test_validate_submission_requires_reference():
    from rtbench import profile_by_name

    bevformer = profile_by_name("bevformer_tiny")
    bundle = SubmissionBundle("bevformer_tiny", (), "map", 0.5, SutDescriptor("x", "development_system", False, True, True), ())
    with pytest.raises(ValueError, match="reference_metric"):
        validate_submission(bundle, bevformer)


def test_validate_submission_monotone_under_single_flip(tmp_path):
    # flipping any one passing component to failing never yields a valid report
    base_path, _ = _make_bundle(tmp_path)
    base = validate_submission(read_bundle(base_path), _profile_for_validation())
    assert base.valid

    flips = []
    p, _ = _make_bundle(tmp_path / "f1", measured=0.60)
    flips.append(p)
    p, _ = _make_bundle(tmp_path / "f2", verdict_passed=False)
    flips.append(p)
    p, _ = _make_bundle(
        tmp_path / "f3", descriptor=SutDescriptor("x", "engineering_sample", True, False, False)
    )
    flips.append(p)
    for path in flips:
        report = validate_submission(read_bundle(path), _profile_for_validation())
        assert not report.valid


def test_validate_submission_seed_lineage(tmp_path):
    path, bundle = _make_bundle(tmp_path)
    tampered = dataclasses.replace(
        bundle, verdicts=(ComplianceVerdict("determinism", True, {"seed": 999}),)
    )
    write_bundle(path, tampered)
    report = validate_submission(read_bundle(path), _profile_for_validation())
    assert not report.valid
    assert any("seed_lineage" in f for f in report.failures())


def test_validate_submission_in_accuracy_mode_is_invalid(tmp_path):
    profile, settings, clock, sut, _ = sim_env(mode="accuracy", store_size=4)
    settings = dataclasses.replace(settings, mode="accuracy")
    log = run_accuracy(sut, settings, profile, clock=clock)
    events = run_log_events(log, summarize(log))
    bundle = SubmissionBundle(
        profile_name="ssd_resnet50",
        performance_events=tuple(events),
        accuracy_metric="map",
        accuracy_measured=0.7141,
        descriptor=SutDescriptor("x", "development_system", False, True, True),
        verdicts=(ComplianceVerdict("determinism", True, {"seed": 0}),),
    )
    report = validate_submission(bundle, _profile_for_validation())
    assert not report.valid
    assert any("performance_mode" in f for f in report.failures())


# -- rendering ---------------------------------------------------------------------


def _report(profile_name, scenario, valid, p999, category="development_system", overruns=None):
    from rtbench.reporter import CheckResult, SubmissionReport

    return SubmissionReport(
        profile_name=profile_name,
        scenario=scenario,
        category=category,
        checks=(CheckResult("all", valid, "ok"),),
        score_p999_ns=p999,
        overrun_count=overruns,
        valid=valid,
    )


def test_render_report_counts_rows():
    text = render_report(
        [
            _report("bevformer_tiny", "single_stream", True, 50),
            _report("bevformer_tiny", "single_stream", True, 40),
            _report("bevformer_tiny", "constant_stream", True, 80, overruns=0),
        ]
    )
    lines = text.splitlines()
    constant = next(l for l in lines if "constant_stream" in l)
    single = next(l for l in lines if "single_stream" in l)
    assert constant.split()[2] == "1"
    assert single.split()[2] == "2"
    assert single.split()[3] == "40"  # best p999


def test_render_report_dash_for_invalid_only():
    text = render_report([_report("ssd_resnet50", "single_stream", False, 10)])
    row = text.splitlines()[1].split()
    assert row[2] == "0" and row[3] == "-" and row[5] == "-"


def test_render_report_deterministic():
    reports = [
        _report("ssd_resnet50", "single_stream", True, 10),
        _report("deeplabv3plus", "single_stream", True, 20),
    ]
    assert render_report(reports) == render_report(reports)


def test_render_report_requires_input():
    with pytest.raises(ValueError):
        render_report([])


def test_verdict_line_shape():
    line = verdict_to_line(ComplianceVerdict("caching", True, {"ratio": 1.0}))
    assert line.startswith("V,caching,1,ratio=f:")
