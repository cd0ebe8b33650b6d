"""Run-log format, log re-analysis, submission validation, and reporting.

The run log is line-delimited text so it can be diffed, grepped, and parsed
from any language. Field order is normative:

    H,<version>,<profile>,<scenario>,<mode>,<seed>,<min_duration_ns>,
      <min_query_count>,<store_size>,<sample_bytes>,<rate_override_hz|empty>,
      <sut_endpoint, may itself contain commas; always the last field>
    I,<query_id>,<scheduled_ns|empty>,<issue_ns>,<index0>[,<index1>...]
    C,<query_id>,<completion_ns>,<response_digest as 16 lowercase hex digits>
    S,<count>,<min>,<mean>,<max>,<p50>,<p90>,<p99>,<p999>,<overruns>,
      <duration_ns>,<completed_per_second>
    V,<test_name>,<passed 0|1>,<evidence as key=typed-value;... sorted by key>

The header comes first, one I and one C line per query, and S last among
computed records. Integers are decimal, digests lowercase hex, floats use
repr so they round-trip exactly. Unknown record tags, wrong field counts,
and unknown versions are parse errors that name the offending line.

A submission bundle is a directory:

    performance.log   the performance-mode run log
    accuracy.txt      'metric = <name>' and 'measured = <value>'
    sut.txt           descriptor fields, one 'key = value' per line
    compliance.log    one V record per compliance verdict
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from urllib.parse import quote, unquote

from .compliance import ComplianceVerdict
from .engine import RunLog
from .metrics import accuracy_gate
from .profiles import BenchmarkProfile, RunSettings
from .recording import Completion, Query
from .stats import RunSummary, check_validity, count_overruns, summarize
from .sut import SutDescriptor, descriptor_violations

LOG_VERSION = 1


class LogFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LogHeader:
    version: int
    profile_name: str
    settings: RunSettings


@dataclass(frozen=True)
class SubmissionBundle:
    profile_name: str
    performance_events: tuple
    accuracy_metric: str
    accuracy_measured: float
    descriptor: SutDescriptor
    verdicts: tuple


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    message: str


@dataclass(frozen=True)
class SubmissionReport:
    profile_name: str
    scenario: str
    category: str
    checks: tuple
    score_p999_ns: int | None
    overrun_count: int | None
    valid: bool

    def failures(self) -> list[str]:
        return [f"{c.name}: {c.message}" for c in self.checks if not c.passed]


# -- serialization ------------------------------------------------------------


def _format_evidence(evidence: dict) -> str:
    parts = []
    for key in sorted(evidence):
        if not key or any(c in key for c in "=;,\n"):
            raise LogFormatError(f"evidence key '{key}' is not serializable")
        value = evidence[key]
        if isinstance(value, bool):
            parts.append(f"{key}=b:{int(value)}")
        elif isinstance(value, int):
            parts.append(f"{key}=i:{value}")
        elif isinstance(value, float):
            parts.append(f"{key}=f:{value!r}")
        elif isinstance(value, str):
            parts.append(f"{key}=s:{quote(value, safe='')}")
        else:
            raise LogFormatError(f"evidence value for '{key}' has unsupported type {type(value).__name__}")
    return ";".join(parts)


def _parse_evidence(text: str) -> dict:
    evidence: dict = {}
    if not text:
        return evidence
    for part in text.split(";"):
        if "=" not in part:
            raise LogFormatError(f"bad evidence entry '{part}'")
        key, typed = part.split("=", 1)
        if len(typed) < 2 or typed[1] != ":":
            raise LogFormatError(f"bad evidence value '{typed}'")
        tag, raw = typed[0], typed[2:]
        if tag == "b":
            evidence[key] = raw == "1"
        elif tag == "i":
            evidence[key] = int(raw)
        elif tag == "f":
            evidence[key] = float(raw)
        elif tag == "s":
            evidence[key] = unquote(raw)
        else:
            raise LogFormatError(f"unknown evidence type tag '{tag}'")
    return evidence


def verdict_to_line(verdict: ComplianceVerdict) -> str:
    return f"V,{verdict.test_name},{int(verdict.passed)},{_format_evidence(verdict.evidence)}"


def _event_to_line(event) -> str:
    if isinstance(event, LogHeader):
        s = event.settings
        rate = "" if s.rate_override_hz is None else repr(s.rate_override_hz)
        endpoint = s.sut_endpoint or ""
        return (
            f"H,{event.version},{event.profile_name},{s.scenario},{s.mode},{s.seed},"
            f"{s.min_duration_ns},{s.min_query_count},{s.store_size},{s.sample_bytes},"
            f"{rate},{endpoint}"
        )
    if isinstance(event, Query):
        scheduled = "" if event.scheduled_ns is None else str(event.scheduled_ns)
        indices = ",".join(str(i) for i in event.sample_indices)
        return f"I,{event.query_id},{scheduled},{event.issue_ns},{indices}"
    if isinstance(event, Completion):
        return f"C,{event.query_id},{event.completion_ns},{event.response_digest:016x}"
    if isinstance(event, RunSummary):
        return (
            f"S,{event.count},{event.min_ns},{event.mean_ns},{event.max_ns},"
            f"{event.p50_ns},{event.p90_ns},{event.p99_ns},{event.p999_ns},"
            f"{event.overrun_count},{event.duration_ns},{event.completed_per_second!r}"
        )
    if isinstance(event, ComplianceVerdict):
        return verdict_to_line(event)
    raise LogFormatError(f"cannot serialize event of type {type(event).__name__}")


def write_log(events) -> str:
    """Serialize events, emission order preserved; ends with a newline."""
    return "".join(_event_to_line(event) + "\n" for event in events)


def _parse_header(fields: list[str], lineno: int) -> LogHeader:
    if len(fields) < 12:
        raise LogFormatError(f"line {lineno}: header takes 12 fields; got {len(fields)}")
    version = int(fields[1])
    if version != LOG_VERSION:
        raise LogFormatError(f"line {lineno}: unsupported log version {version}")
    rate = None if fields[10] == "" else float(fields[10])
    endpoint = ",".join(fields[11:])  # endpoint is the last field and may contain commas
    settings = RunSettings(
        scenario=fields[3],
        mode=fields[4],
        seed=int(fields[5]),
        min_duration_ns=int(fields[6]),
        min_query_count=int(fields[7]),
        store_size=int(fields[8]),
        sample_bytes=int(fields[9]),
        rate_override_hz=rate,
        profile=fields[2],
        sut_endpoint=endpoint or None,
    )
    return LogHeader(version=version, profile_name=fields[2], settings=settings)


def parse_log(text: str) -> list:
    """Parse a run log back into its event objects; header must come first."""
    events: list = []
    lines = [line for line in text.splitlines()]
    if not lines:
        raise LogFormatError("empty log")
    for lineno, line in enumerate(lines, start=1):
        if not line:
            raise LogFormatError(f"line {lineno}: blank line inside log")
        fields = line.split(",")
        tag = fields[0]
        try:
            if tag == "H":
                if lineno != 1:
                    raise LogFormatError(f"line {lineno}: header must be the first record")
                events.append(_parse_header(fields, lineno))
            elif tag == "I":
                if len(fields) < 5:
                    raise LogFormatError(f"line {lineno}: issue records take >= 5 fields; got {len(fields)}")
                scheduled = None if fields[2] == "" else int(fields[2])
                events.append(
                    Query(
                        query_id=int(fields[1]),
                        sample_indices=tuple(int(v) for v in fields[4:]),
                        scheduled_ns=scheduled,
                        issue_ns=int(fields[3]),
                    )
                )
            elif tag == "C":
                if len(fields) != 4:
                    raise LogFormatError(f"line {lineno}: complete records take 4 fields; got {len(fields)}")
                events.append(
                    Completion(
                        query_id=int(fields[1]),
                        completion_ns=int(fields[2]),
                        response_digest=int(fields[3], 16),
                    )
                )
            elif tag == "S":
                if len(fields) != 12:
                    raise LogFormatError(f"line {lineno}: summary records take 12 fields; got {len(fields)}")
                events.append(
                    RunSummary(
                        count=int(fields[1]),
                        min_ns=int(fields[2]),
                        mean_ns=int(fields[3]),
                        max_ns=int(fields[4]),
                        p50_ns=int(fields[5]),
                        p90_ns=int(fields[6]),
                        p99_ns=int(fields[7]),
                        p999_ns=int(fields[8]),
                        overrun_count=int(fields[9]),
                        duration_ns=int(fields[10]),
                        completed_per_second=float(fields[11]),
                    )
                )
            elif tag == "V":
                if len(fields) < 4:
                    raise LogFormatError(f"line {lineno}: verdict records take 4 fields; got {len(fields)}")
                events.append(
                    ComplianceVerdict(
                        test_name=fields[1],
                        passed=fields[2] == "1",
                        evidence=_parse_evidence(",".join(fields[3:])),
                    )
                )
            else:
                raise LogFormatError(f"line {lineno}: unknown record tag '{tag}'")
        except LogFormatError:
            raise
        except ValueError as exc:
            raise LogFormatError(f"line {lineno}: {exc}") from None
    if not isinstance(events[0], LogHeader):
        raise LogFormatError("line 1: log must start with a header record")
    return events


def run_log_events(log: RunLog, summary: RunSummary | None = None, verdicts=()) -> list:
    """Assemble the canonical event stream for a finished run."""
    events: list = [LogHeader(LOG_VERSION, log.profile_name, log.settings)]
    for query, completion in log.trace:
        events.append(query)
        events.append(completion)
    for verdict in verdicts:
        events.append(verdict)
    if summary is not None:
        events.append(summary)
    return events


# -- re-analysis --------------------------------------------------------------


def reconstruct_run(events) -> RunLog:
    """Rebuild a RunLog from parsed events, checking completeness."""
    header = events[0] if events and isinstance(events[0], LogHeader) else None
    if header is None:
        raise LogFormatError("log must start with a header record")
    issues: dict[int, Query] = {}
    completions: dict[int, Completion] = {}
    for event in events[1:]:
        if isinstance(event, Query):
            if event.query_id in issues:
                raise LogFormatError(f"duplicate issue record for query {event.query_id}")
            issues[event.query_id] = event
        elif isinstance(event, Completion):
            if event.query_id in completions:
                raise LogFormatError(f"duplicate complete record for query {event.query_id}")
            completions[event.query_id] = event
    if not issues:
        raise LogFormatError("log holds no issue records")
    expected = set(range(len(issues)))
    if set(issues) != expected:
        raise LogFormatError("issue records do not form a gapless query id sequence from 0")
    missing = expected - set(completions)
    if missing:
        raise LogFormatError(f"log is incomplete: no completion for queries {sorted(missing)[:5]}")
    extra = set(completions) - expected
    if extra:
        raise LogFormatError(f"completions for unknown queries {sorted(extra)[:5]}")
    trace = [(issues[i], completions[i]) for i in range(len(issues))]
    log = RunLog(
        profile_name=header.profile_name,
        settings=header.settings,
        trace=trace,
        wall_end_ns=max(c.completion_ns for c in completions.values()),
    )
    log.overrun_count = count_overruns(trace)
    return log


def recompute_summary(events) -> RunSummary:
    """Recompute the summary from the trace; equals the engine's bit-exactly."""
    return summarize(reconstruct_run(events))


def embedded_summary(events) -> RunSummary | None:
    found = [e for e in events if isinstance(e, RunSummary)]
    return found[-1] if found else None


# -- submission bundles --------------------------------------------------------

_BOOL = {"true": True, "false": False}


def _read_kv(path: Path) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise LogFormatError(f"{path}: line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        pairs[key] = value
    return pairs


def write_bundle(directory, bundle: SubmissionBundle) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "performance.log").write_text(write_log(bundle.performance_events))
    (directory / "accuracy.txt").write_text(
        f"metric = {bundle.accuracy_metric}\nmeasured = {bundle.accuracy_measured!r}\n"
    )
    d = bundle.descriptor
    (directory / "sut.txt").write_text(
        f"name = {d.name}\n"
        f"category = {d.category}\n"
        f"functional_safety = {str(d.functional_safety).lower()}\n"
        f"publicly_available = {str(d.publicly_available).lower()}\n"
        f"auditable_closed = {str(d.auditable_closed).lower()}\n"
    )
    (directory / "compliance.log").write_text(
        "".join(verdict_to_line(v) + "\n" for v in bundle.verdicts)
    )


def read_bundle(directory) -> SubmissionBundle:
    directory = Path(directory)
    for required in ("performance.log", "accuracy.txt", "sut.txt", "compliance.log"):
        if not (directory / required).is_file():
            raise LogFormatError(f"bundle is missing component {required}")
    events = parse_log((directory / "performance.log").read_text())

    accuracy = _read_kv(directory / "accuracy.txt")
    if "metric" not in accuracy or "measured" not in accuracy:
        raise LogFormatError("accuracy.txt must define 'metric' and 'measured'")

    sut_kv = _read_kv(directory / "sut.txt")
    try:
        descriptor = SutDescriptor(
            name=sut_kv["name"],
            category=sut_kv["category"],
            functional_safety=_BOOL[sut_kv["functional_safety"]],
            publicly_available=_BOOL[sut_kv["publicly_available"]],
            auditable_closed=_BOOL[sut_kv["auditable_closed"]],
        )
    except KeyError as exc:
        raise LogFormatError(f"sut.txt is missing or mangles field {exc}") from None

    verdicts = []
    for lineno, line in enumerate((directory / "compliance.log").read_text().splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split(",")
        if fields[0] != "V" or len(fields) < 4:
            raise LogFormatError(f"compliance.log: line {lineno}: expected a verdict record")
        verdicts.append(
            ComplianceVerdict(
                test_name=fields[1],
                passed=fields[2] == "1",
                evidence=_parse_evidence(",".join(fields[3:])),
            )
        )

    header = events[0]
    return SubmissionBundle(
        profile_name=header.profile_name,
        performance_events=tuple(events),
        accuracy_metric=accuracy["metric"],
        accuracy_measured=float(accuracy["measured"]),
        descriptor=descriptor,
        verdicts=tuple(verdicts),
    )


def validate_submission(bundle: SubmissionBundle, profile: BenchmarkProfile) -> SubmissionReport:
    """Apply every submission rule; the overall verdict is the AND of all checks.

    The reported score is the p999 latency; there is no latency pass/fail
    threshold, latency is gated only through duration/count validity,
    the accuracy gate, compliance, and category consistency.
    """
    if profile.reference_metric is None:
        raise ValueError(f"profile '{profile.name}' has no reference_metric to gate against")
    checks: list[CheckResult] = []
    events = list(bundle.performance_events)
    header = events[0]
    settings = header.settings

    checks.append(
        CheckResult(
            "profile_consistent",
            header.profile_name == profile.name == bundle.profile_name,
            f"log profile '{header.profile_name}' vs expected '{profile.name}'",
        )
    )
    checks.append(
        CheckResult(
            "performance_mode",
            settings.mode == "performance",
            f"performance log was recorded in mode '{settings.mode}'",
        )
    )

    score: int | None = None
    overruns: int | None = None
    try:
        recomputed = recompute_summary(events)
        stated = embedded_summary(events)
        checks.append(
            CheckResult(
                "log_reanalysis",
                stated == recomputed,
                "embedded summary matches recomputation"
                if stated == recomputed
                else "embedded summary disagrees with recomputation from the trace",
            )
        )
        validity = check_validity(recomputed, settings)
        checks.append(
            CheckResult(
                "duration",
                validity.duration_ok,
                f"duration {recomputed.duration_ns} ns vs required {settings.min_duration_ns} ns",
            )
        )
        checks.append(
            CheckResult(
                "query_count",
                validity.query_count_ok,
                f"{recomputed.count} completed queries vs required {settings.min_query_count}",
            )
        )
        score = recomputed.p999_ns
        overruns = recomputed.overrun_count if settings.scenario == "constant_stream" else None
    except LogFormatError as exc:
        checks.append(CheckResult("log_reanalysis", False, str(exc)))
        checks.append(CheckResult("duration", False, "log unusable"))
        checks.append(CheckResult("query_count", False, "log unusable"))

    gate = accuracy_gate(bundle.accuracy_measured, profile.reference_metric, profile.accuracy_constraint)
    checks.append(
        CheckResult(
            "accuracy_gate",
            gate.passed,
            f"{bundle.accuracy_metric} measured {gate.measured} vs threshold "
            f"{gate.threshold} ({gate.constraint} x reference {gate.reference})",
        )
    )

    if bundle.verdicts:
        for verdict in bundle.verdicts:
            checks.append(
                CheckResult(
                    f"compliance_{verdict.test_name}",
                    verdict.passed,
                    "passed" if verdict.passed else f"failed with evidence {verdict.evidence}",
                )
            )
    else:
        checks.append(CheckResult("compliance", False, "bundle carries no compliance verdicts"))

    violations = descriptor_violations(bundle.descriptor)
    checks.append(CheckResult("category", not violations, "; ".join(violations) or "ok"))

    seeds = {v.evidence["seed"] for v in bundle.verdicts if "seed" in v.evidence}
    seed_ok = seeds <= {settings.seed}
    checks.append(
        CheckResult(
            "seed_lineage",
            seed_ok,
            "ok" if seed_ok else f"verdict seeds {sorted(seeds)} != run seed {settings.seed}",
        )
    )

    return SubmissionReport(
        profile_name=bundle.profile_name,
        scenario=settings.scenario,
        category=bundle.descriptor.category,
        checks=tuple(checks),
        score_p999_ns=score,
        overrun_count=overruns,
        valid=all(c.passed for c in checks),
    )


# -- rendering ----------------------------------------------------------------


def render_report(reports) -> str:
    """Render submission reports as a fixed-order text table.

    One row per (profile, scenario) pair: the number of valid submissions,
    the best p999 among them, overruns of the best entry (constant stream
    only), and the categories that submitted. Deterministic for identical
    inputs.
    """
    if not reports:
        raise ValueError("render_report needs at least one report")
    rows: dict[tuple[str, str], list] = {}
    for report in reports:
        rows.setdefault((report.profile_name, report.scenario), []).append(report)

    header = ("profile", "scenario", "valid", "best_p999_ns", "overruns", "categories")
    table = [header]
    for (profile_name, scenario), group in sorted(rows.items()):
        valid = [r for r in group if r.valid and r.score_p999_ns is not None]
        if valid:
            best = min(valid, key=lambda r: r.score_p999_ns)
            best_cell = str(best.score_p999_ns)
            overrun_cell = str(best.overrun_count) if best.overrun_count is not None else "-"
            categories = "+".join(sorted({r.category for r in valid}))
        else:
            best_cell, overrun_cell, categories = "-", "-", "-"
        table.append((profile_name, scenario, str(len(valid)), best_cell, overrun_cell, categories or "-"))

    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = []
    for row in table:
        lines.append("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"
