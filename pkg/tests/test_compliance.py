import math

import pytest

from conftest import sim_env
from rtbench.compliance import (
    run_compliance,
    test_accuracy_in_perf,
    test_caching,
    test_determinism,
)

# pytest would otherwise try to collect the imported operations as tests
test_accuracy_in_perf.__test__ = False
test_caching.__test__ = False
test_determinism.__test__ = False


def test_determinism_same_seed_passes():
    profile, settings, clock, sut, _ = sim_env(min_query_count=50, store_size=8)
    verdict = test_determinism(sut, settings, profile, clock=clock)
    assert verdict.passed
    assert verdict.evidence["schedules_equal"]
    assert verdict.evidence["run_sequences_equal"]


def test_determinism_different_seeds_diverge():
    # sanity arm: two seeds almost surely give different index sequences
    from rtbench.engine import generate_schedule

    a = generate_schedule(1, 64, 200, 1)
    b = generate_schedule(2, 64, 200, 1)
    assert a != b


def test_determinism_store_of_one_passes_any_seed():
    profile, settings, clock, sut, _ = sim_env(min_query_count=20, store_size=1, seed=123)
    verdict = test_determinism(sut, settings, profile, clock=clock)
    assert verdict.passed


def test_determinism_verdict_recomputable_from_evidence():
    profile, settings, clock, sut, _ = sim_env(min_query_count=30, store_size=8)
    v = test_determinism(sut, settings, profile, clock=clock)
    e = v.evidence
    assert v.passed == (
        e["schedules_equal"] and e["run_sequences_equal"] and e["query_ids_gapless"] and e["runs_completed"]
    )


def test_caching_honest_fixed_ratio_one():
    profile, settings, clock, sut, _ = sim_env(min_query_count=200, store_size=8)
    verdict = test_caching(sut, settings, profile, clock=clock)
    assert verdict.passed
    assert verdict.evidence["ratio"] == 1.0


def test_caching_cheater_fails():
    profile, settings, clock, sut, _ = sim_env(
        min_query_count=200, store_size=32, cache_speedup=0.5, cache_window=8
    )
    verdict = test_caching(sut, settings, profile, clock=clock)
    assert not verdict.passed
    assert verdict.evidence["ratio"] < 0.9
    assert math.isclose(verdict.evidence["ratio"], 0.5, rel_tol=0.05)


def test_caching_honest_lognormal_ratio_near_one():
    profile, settings, clock, sut, _ = sim_env(
        distribution="lognormal",
        params=(math.log(5e6), 0.25),
        min_query_count=10_000,
        store_size=64,
    )
    verdict = test_caching(sut, settings, profile, clock=clock)
    assert verdict.passed
    assert 0.95 <= verdict.evidence["ratio"] <= 1.05


def test_caching_requires_enough_queries():
    profile, settings, clock, sut, _ = sim_env(min_query_count=99)
    with pytest.raises(ValueError, match="100"):
        test_caching(sut, settings, profile, clock=clock)


def test_caching_verdict_recomputable():
    profile, settings, clock, sut, _ = sim_env(min_query_count=150, store_size=8)
    v = test_caching(sut, settings, profile, clock=clock)
    e = v.evidence
    assert v.passed == (e["ratio"] >= e["ratio_threshold"])


def test_accuracy_in_perf_echo_passes():
    profile, settings, clock, sut, _ = sim_env(min_query_count=100, store_size=8, echo=True)
    verdict = test_accuracy_in_perf(sut, settings, profile, clock=clock)
    assert verdict.passed
    assert verdict.evidence["subset_size"] >= 1
    assert verdict.evidence["mismatch_count"] == 0


def test_accuracy_in_perf_truncating_stub_fails():
    from rtbench.sut import TruncatingSut

    profile, settings, clock, sut, _ = sim_env(
        min_query_count=100, store_size=8, echo=True, sut_cls=TruncatingSut
    )
    verdict = test_accuracy_in_perf(sut, settings, profile, clock=clock)
    assert not verdict.passed
    assert verdict.evidence["mismatch_count"] == verdict.evidence["subset_size"]


def test_accuracy_in_perf_full_fraction_checks_every_query():
    profile, settings, clock, sut, _ = sim_env(min_query_count=60, store_size=8, echo=True)
    verdict = test_accuracy_in_perf(sut, settings, profile, sample_fraction=1.0, clock=clock)
    assert verdict.passed
    assert verdict.evidence["subset_size"] == 60


def test_accuracy_in_perf_rejects_bad_fraction():
    profile, settings, clock, sut, _ = sim_env(min_query_count=10)
    with pytest.raises(ValueError):
        test_accuracy_in_perf(sut, settings, profile, sample_fraction=0.0, clock=clock)


def test_accuracy_in_perf_empty_subset_errors():
    profile, settings, clock, sut, _ = sim_env(min_query_count=1, seed=0)
    with pytest.raises(ValueError, match="subset is empty"):
        test_accuracy_in_perf(sut, settings, profile, sample_fraction=1e-9, clock=clock)


def test_run_compliance_selection_and_unknown():
    profile, settings, clock, sut, _ = sim_env(min_query_count=120, store_size=8, echo=True)
    verdicts = run_compliance(sut, settings, profile, tests=["determinism", "caching"], clock=clock)
    assert [v.test_name for v in verdicts] == ["determinism", "caching"]
    with pytest.raises(ValueError, match="unknown compliance test"):
        run_compliance(sut, settings, profile, tests=["santa"], clock=clock)
