"""Built-in benchmark profiles and run settings.

A profile fixes the per-workload constants: how many input images one query
carries, their resolution, the tail percentile reported as the score, the
accuracy floor as a fraction of the FP32 reference metric, and the fixed
frame rate used by the Constant Stream scenario. Settings hold everything
that varies per run.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from . import stats

SCENARIOS = ("single_stream", "constant_stream")
MODES = ("performance", "accuracy")

DEFAULT_MIN_DURATION_NS = 60_000_000_000
SUBMISSION_MIN_DURATION_NS = 600_000_000_000
DEFAULT_STORE_SIZE = 8

_U64_MAX = (1 << 64) - 1


class SettingsError(ValueError):
    """Raised for unreadable, unknown, or out-of-range settings input."""


@dataclass(frozen=True)
class BenchmarkProfile:
    name: str
    inputs_per_query: int
    input_width_px: int
    input_height_px: int
    tail_percentile: float
    accuracy_constraint: float
    constant_stream_hz: float | None
    sae_level_note: str
    # FP32 reference value of the workload's accuracy metric, when known.
    reference_metric: float | None = None


@dataclass(frozen=True)
class RunSettings:
    scenario: str = "single_stream"
    mode: str = "performance"
    seed: int = 0
    min_duration_ns: int = DEFAULT_MIN_DURATION_NS
    min_query_count: int = 26514
    store_size: int = DEFAULT_STORE_SIZE
    sample_bytes: int = 1
    rate_override_hz: float | None = None
    profile: str | None = None
    sut_endpoint: str | None = None


_BUILTINS = (
    BenchmarkProfile(
        name="bevformer_tiny",
        inputs_per_query=6,
        input_width_px=800,
        input_height_px=450,
        tail_percentile=0.999,
        accuracy_constraint=0.99,
        constant_stream_hz=12.0,
        sae_level_note=">= 3",
    ),
    BenchmarkProfile(
        name="deeplabv3plus",
        inputs_per_query=1,
        input_width_px=3840,
        input_height_px=2160,
        tail_percentile=0.999,
        accuracy_constraint=0.999,
        constant_stream_hz=15.0,
        sae_level_note="<= 3",
    ),
    BenchmarkProfile(
        name="ssd_resnet50",
        inputs_per_query=1,
        input_width_px=3840,
        input_height_px=2160,
        tail_percentile=0.999,
        accuracy_constraint=0.999,
        constant_stream_hz=15.0,
        sae_level_note="< 3",
        reference_metric=0.7141,
    ),
)


def builtin_profiles() -> list[BenchmarkProfile]:
    """All built-in profiles, ordered by name. Pure constant data."""
    return list(_BUILTINS)


def profile_by_name(name: str) -> BenchmarkProfile:
    """Look up a built-in profile by exact name or unambiguous prefix."""
    for p in _BUILTINS:
        if p.name == name:
            return p
    matches = [p for p in _BUILTINS if p.name.startswith(name)] if name else []
    if len(matches) == 1:
        return matches[0]
    known = ", ".join(p.name for p in _BUILTINS)
    if len(matches) > 1:
        raise SettingsError(f"profile '{name}' is ambiguous (known: {known})")
    raise SettingsError(f"unknown profile '{name}' (known: {known})")


def effective_rate_hz(settings: RunSettings, profile: BenchmarkProfile) -> float | None:
    """Constant Stream rate: per-run override wins over the profile rate."""
    if settings.rate_override_hz is not None:
        return settings.rate_override_hz
    return profile.constant_stream_hz


def default_settings(profile: BenchmarkProfile, **overrides) -> RunSettings:
    """Settings with all profile-derived defaults applied.

    min_query_count defaults to the planner value for the profile's tail
    percentile at the default confidence; sample_bytes defaults to
    width * height * 3 so synthetic samples occupy as much memory as raw
    frames at the profile resolution.
    """
    base = RunSettings(
        min_query_count=stats.min_query_count(profile.tail_percentile),
        sample_bytes=profile.input_width_px * profile.input_height_px * 3,
        profile=profile.name,
    )
    return dataclasses.replace(base, **overrides) if overrides else base


_INT_KEYS = ("seed", "min_duration_ns", "min_query_count", "store_size", "sample_bytes")
_KNOWN_KEYS = _INT_KEYS + ("scenario", "mode", "rate_override_hz", "profile", "sut_endpoint")


def _parse_int(key: str, text: str, lineno: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise SettingsError(f"line {lineno}: key '{key}' expects an integer; got '{text}'") from None


def load_settings(path, profile: BenchmarkProfile | str | None = None) -> RunSettings:
    """Parse a flat key = value settings file into a fully populated RunSettings.

    One pair per line, '#' starts a comment, unknown keys are hard errors.
    The profile used for profile-derived defaults is, in order of precedence:
    the file's 'profile' key, the profile argument, then ssd_resnet50.
    """
    path = Path(path)
    if not path.is_file():
        raise SettingsError(f"settings file not found: {path}")

    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise SettingsError(f"line {lineno}: expected 'key = value'; got '{stripped}'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise SettingsError(f"line {lineno}: unknown key '{key}'")
        if key in raw:
            raise SettingsError(f"line {lineno}: duplicate key '{key}'")
        raw[key] = (value, lineno)

    if "profile" in raw:
        prof = profile_by_name(raw["profile"][0])
    elif isinstance(profile, str):
        prof = profile_by_name(profile)
    elif profile is not None:
        prof = profile
    else:
        prof = profile_by_name("ssd_resnet50")

    fields: dict = {"profile": prof.name}
    for key in _INT_KEYS:
        if key in raw:
            fields[key] = _parse_int(key, *raw[key])
    if "scenario" in raw:
        fields["scenario"] = raw["scenario"][0]
    if "mode" in raw:
        fields["mode"] = raw["mode"][0]
    if "rate_override_hz" in raw:
        value, lineno = raw["rate_override_hz"]
        try:
            fields["rate_override_hz"] = float(value)
        except ValueError:
            raise SettingsError(
                f"line {lineno}: key 'rate_override_hz' expects a number; got '{value}'"
            ) from None
    if "sut_endpoint" in raw:
        fields["sut_endpoint"] = raw["sut_endpoint"][0]

    settings = dataclasses.replace(default_settings(prof), **fields)

    violations = validate(prof, settings)
    if violations:
        raise SettingsError("; ".join(violations))
    return settings


def validate(profile: BenchmarkProfile, settings: RunSettings) -> list[str]:
    """Return the list of invariant violations; empty means runnable."""
    violations = []
    if not 0.0 < profile.tail_percentile < 1.0:
        violations.append(f"tail_percentile must be in (0, 1); got {profile.tail_percentile}")
    if not 0.0 < profile.accuracy_constraint <= 1.0:
        violations.append(f"accuracy_constraint must be in (0, 1]; got {profile.accuracy_constraint}")
    if profile.inputs_per_query < 1:
        violations.append(f"inputs_per_query must be >= 1; got {profile.inputs_per_query}")
    if profile.constant_stream_hz is not None and not profile.constant_stream_hz > 0:
        violations.append(f"constant_stream_hz must be > 0; got {profile.constant_stream_hz}")
    if profile.reference_metric is not None and profile.reference_metric < 0:
        violations.append(f"reference_metric must be non-negative; got {profile.reference_metric}")

    if settings.scenario not in SCENARIOS:
        violations.append(f"scenario must be one of {SCENARIOS}; got '{settings.scenario}'")
    if settings.mode not in MODES:
        violations.append(f"mode must be one of {MODES}; got '{settings.mode}'")
    if not 0 <= settings.seed <= _U64_MAX:
        violations.append(f"seed must fit in 64 bits unsigned; got {settings.seed}")
    if settings.min_duration_ns < 0:
        violations.append(f"min_duration_ns must be >= 0; got {settings.min_duration_ns}")
    if settings.min_query_count < 1:
        violations.append(f"min_query_count must be >= 1; got {settings.min_query_count}")
    if settings.store_size < 1:
        violations.append(f"store_size must be >= 1; got {settings.store_size}")
    if settings.sample_bytes < 1:
        violations.append(f"sample_bytes must be >= 1; got {settings.sample_bytes}")
    if settings.rate_override_hz is not None and not settings.rate_override_hz > 0:
        violations.append(f"rate_override_hz must be > 0; got {settings.rate_override_hz}")
    if settings.scenario == "constant_stream" and effective_rate_hz(settings, profile) is None:
        violations.append(
            "constant_stream_hz: constant_stream needs a rate from the profile or rate_override_hz"
        )
    return violations
