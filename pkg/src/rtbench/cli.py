"""Operator entry point.

Every subcommand is a thin composition of library operations: run scenarios,
execute the compliance suite, validate submission bundles, render the
cross-submission report. Exit codes: 0 on success and valid verdicts, 1 on
invalid submissions or failed runs, 2 on usage and configuration errors.
Data goes to stdout or --out; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import compliance as compliance_mod
from . import reporter
from .clock import MonotonicClock, SimulatedClock
from .endpoints import sut_from_endpoint
from .engine import run_accuracy, run_constant_stream, run_single_stream
from .ipc import RemoteSut
from .profiles import (
    SUBMISSION_MIN_DURATION_NS,
    SettingsError,
    builtin_profiles,
    default_settings,
    load_settings,
    profile_by_name,
    validate,
)
from .samples import SampleStore
from .stats import summarize
from .sut import SutError


def _emit(text: str, out_path) -> None:
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rtbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list-profiles", help="print the built-in benchmark profiles")

    run = sub.add_parser("run", help="drive one scenario run against a SUT")
    run.add_argument("--profile", required=True)
    run.add_argument("--settings", help="settings file (flat key = value lines)")
    run.add_argument("--scenario", choices=("single_stream", "constant_stream"))
    run.add_argument("--mode", choices=("performance", "accuracy"))
    run.add_argument("--sut", help="SUT endpoint, e.g. sim:fixed:10ms or tcp:127.0.0.1:9000")
    run.add_argument("--seed", type=int)
    run.add_argument("--queries", type=int, help="minimum completed query count")
    run.add_argument("--duration-s", type=float, help="minimum run duration in seconds")
    run.add_argument("--store-size", type=int)
    run.add_argument("--sample-bytes", type=int)
    run.add_argument("--rate", type=float, help="constant stream rate override in Hz")
    run.add_argument("--submission", action="store_true", help="use the submission-length duration preset")
    run.add_argument("--clock", choices=("real", "simulated"), default="real")
    run.add_argument("--out", help="write the run log here instead of stdout")

    comp = sub.add_parser("compliance", help="run compliance tests against a SUT")
    for flag, kwargs in (
        ("--profile", {"required": True}),
        ("--settings", {}),
        ("--sut", {}),
        ("--seed", {"type": int}),
        ("--queries", {"type": int}),
        ("--store-size", {"type": int}),
        ("--sample-bytes", {"type": int}),
        ("--clock", {"choices": ("real", "simulated"), "default": "real"}),
        ("--out", {}),
    ):
        comp.add_argument(flag, **kwargs)
    comp.add_argument("--tests", help="comma-separated subset of: determinism,caching,accuracy_in_perf")
    comp.add_argument("--ratio-threshold", type=float, default=compliance_mod.DEFAULT_RATIO_THRESHOLD)
    comp.add_argument("--sample-fraction", type=float, default=compliance_mod.DEFAULT_SAMPLE_FRACTION)

    val = sub.add_parser("validate", help="validate submission bundles")
    val.add_argument("--bundle", action="append", required=True, help="bundle directory (repeatable)")
    val.add_argument("--profile", help="override the profile named in the bundle")
    val.add_argument("--reference", type=float, help="override the profile's FP32 reference metric")

    rep = sub.add_parser("report", help="validate bundles and render the submission table")
    rep.add_argument("--bundle", action="append", required=True)
    rep.add_argument("--profile")
    rep.add_argument("--reference", type=float)
    rep.add_argument("--out")

    return parser


def _settings_from_args(args, profile):
    if args.settings:
        settings = load_settings(args.settings, profile=profile)
    else:
        settings = default_settings(profile)
    overrides = {}
    if getattr(args, "scenario", None):
        overrides["scenario"] = args.scenario
    if getattr(args, "mode", None):
        overrides["mode"] = args.mode
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.queries is not None:
        overrides["min_query_count"] = args.queries
    if getattr(args, "duration_s", None) is not None:
        overrides["min_duration_ns"] = int(args.duration_s * 1e9)
    if args.store_size is not None:
        overrides["store_size"] = args.store_size
    if args.sample_bytes is not None:
        overrides["sample_bytes"] = args.sample_bytes
    if getattr(args, "rate", None) is not None:
        overrides["rate_override_hz"] = args.rate
    if args.sut:
        overrides["sut_endpoint"] = args.sut
    if getattr(args, "submission", False):
        overrides["min_duration_ns"] = SUBMISSION_MIN_DURATION_NS
    return dataclasses.replace(settings, **overrides) if overrides else settings


def _prepare_sut(args, profile):
    settings = _settings_from_args(args, profile)
    violations = validate(profile, settings)
    if violations:
        raise SettingsError("; ".join(violations))
    if not settings.sut_endpoint:
        raise SettingsError("no SUT endpoint: pass --sut or set sut_endpoint in the settings file")
    clock = SimulatedClock() if args.clock == "simulated" else MonotonicClock()
    store = SampleStore(settings.store_size, settings.sample_bytes, settings.seed)
    sut = sut_from_endpoint(settings.sut_endpoint, store, clock)
    return settings, clock, sut


def _cmd_list_profiles(_args) -> int:
    rows = [("name", "inputs/query", "resolution", "tail", "constraint", "rate_hz", "sae_level")]
    for p in builtin_profiles():
        rows.append(
            (
                p.name,
                str(p.inputs_per_query),
                f"{p.input_width_px}x{p.input_height_px}",
                repr(p.tail_percentile),
                repr(p.accuracy_constraint),
                repr(p.constant_stream_hz) if p.constant_stream_hz is not None else "-",
                p.sae_level_note,
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    for row in rows:
        sys.stdout.write("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() + "\n")
    return 0


def _cmd_run(args) -> int:
    profile = profile_by_name(args.profile)
    settings, clock, sut = _prepare_sut(args, profile)
    try:
        if settings.mode == "accuracy":
            log = run_accuracy(sut, settings, profile, clock=clock)
        elif settings.scenario == "constant_stream":
            log = run_constant_stream(sut, settings, profile, clock=clock)
        else:
            log = run_single_stream(sut, settings, profile, clock=clock)
    finally:
        if isinstance(sut, RemoteSut):
            sut.close()

    if log.failure is not None:
        _emit(reporter.write_log(reporter.run_log_events(log)), args.out)
        print(f"run failed: {log.failure}", file=sys.stderr)
        return 1

    summary = summarize(log)
    _emit(reporter.write_log(reporter.run_log_events(log, summary)), args.out)
    print(
        f"{profile.name} {settings.scenario} {settings.mode}: {summary.count} queries, "
        f"p999 {summary.p999_ns} ns, {summary.overrun_count} overruns",
        file=sys.stderr,
    )
    return 0


def _cmd_compliance(args) -> int:
    profile = profile_by_name(args.profile)
    args.scenario = None
    args.mode = "performance"
    settings, clock, sut = _prepare_sut(args, profile)
    tests = args.tests.split(",") if args.tests else None
    verdicts = []
    try:
        for name in tests if tests is not None else list(compliance_mod.ALL_TESTS):
            if name == "caching":
                verdicts.append(
                    compliance_mod.test_caching(
                        sut, settings, profile, ratio_threshold=args.ratio_threshold, clock=clock
                    )
                )
            elif name == "accuracy_in_perf":
                verdicts.append(
                    compliance_mod.test_accuracy_in_perf(
                        sut, settings, profile, sample_fraction=args.sample_fraction, clock=clock
                    )
                )
            elif name == "determinism":
                verdicts.append(compliance_mod.test_determinism(sut, settings, profile, clock=clock))
            else:
                raise SettingsError(f"unknown compliance test '{name}'")
    finally:
        if isinstance(sut, RemoteSut):
            sut.close()

    _emit("".join(reporter.verdict_to_line(v) + "\n" for v in verdicts), args.out)
    for verdict in verdicts:
        print(f"{verdict.test_name}: {'pass' if verdict.passed else 'FAIL'}", file=sys.stderr)
    return 0 if all(v.passed for v in verdicts) else 1


def _load_reports(args):
    reports = []
    for directory in args.bundle:
        bundle = reporter.read_bundle(directory)
        profile = profile_by_name(args.profile or bundle.profile_name)
        if args.reference is not None:
            profile = dataclasses.replace(profile, reference_metric=args.reference)
        reports.append((directory, reporter.validate_submission(bundle, profile)))
    return reports


def _cmd_validate(args) -> int:
    reports = _load_reports(args)
    all_valid = True
    for directory, report in reports:
        verdict = "valid" if report.valid else "INVALID"
        sys.stdout.write(f"{directory}: {verdict}\n")
        for failure in report.failures():
            sys.stdout.write(f"  {failure}\n")
        all_valid &= report.valid
    return 0 if all_valid else 1


def _cmd_report(args) -> int:
    reports = [report for _, report in _load_reports(args)]
    _emit(reporter.render_report(reports), args.out)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    handlers = {
        "list-profiles": _cmd_list_profiles,
        "run": _cmd_run,
        "compliance": _cmd_compliance,
        "validate": _cmd_validate,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except (SettingsError, reporter.LogFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SutError as exc:
        print(f"SUT failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
