import dataclasses

import pytest

from conftest import sim_env
from rtbench import (
    MonotonicClock,
    SampleStore,
    SimulatedSut,
    SimulatedSutConfig,
    run_accuracy,
    run_constant_stream,
    run_single_stream,
    summarize,
)
from rtbench.engine import generate_schedule
from rtbench.recording import digest64


# -- schedule generation --------------------------------------------------------


def test_schedule_store_of_one_is_all_zeros():
    assert generate_schedule(12345, 1, 3, 2) == [[0, 0], [0, 0], [0, 0]]


def test_schedule_first_raw_draw_matches_stream_vector():
    # store_size chosen so the modulo is a no-op on the known first output
    value = 0xE220A8397B1DCDAF
    schedule = generate_schedule(0, 2**64 - 1, 1, 1)
    assert schedule[0][0] == value % (2**64 - 1) == value


def test_schedule_deterministic_and_seed_sensitive():
    a = generate_schedule(7, 100, 50, 3)
    b = generate_schedule(7, 100, 50, 3)
    c = generate_schedule(8, 100, 50, 3)
    assert a == b
    assert a != c


def test_schedule_indices_in_range():
    for indices in generate_schedule(3, 17, 200, 4):
        assert len(indices) == 4
        assert all(0 <= i < 17 for i in indices)


def test_schedule_rejects_bad_arguments():
    with pytest.raises(ValueError):
        generate_schedule(0, 0, 1, 1)
    with pytest.raises(ValueError):
        generate_schedule(0, 1, 1, 0)


def test_schedule_is_prefix_stable():
    assert generate_schedule(5, 10, 20, 2)[:10] == generate_schedule(5, 10, 10, 2)


# -- single stream ----------------------------------------------------------------


def test_single_stream_issue_times_follow_completions():
    profile, settings, clock, sut, _ = sim_env(params=(10_000_000,), min_query_count=3)
    log = run_single_stream(sut, settings, profile, clock=clock)
    assert [q.issue_ns for q, _ in log.trace] == [0, 10_000_000, 20_000_000]
    assert [c.completion_ns for _, c in log.trace] == [10_000_000, 20_000_000, 30_000_000]


def test_single_stream_stops_at_query_count():
    profile, settings, clock, sut, _ = sim_env(min_query_count=5)
    log = run_single_stream(sut, settings, profile, clock=clock)
    assert len(log.trace) == 5


def test_single_stream_honors_min_duration():
    profile, settings, clock, sut, _ = sim_env(
        params=(10_000_000,), min_query_count=1, min_duration_ns=95_000_000
    )
    log = run_single_stream(sut, settings, profile, clock=clock)
    assert len(log.trace) == 10  # 10 x 10 ms to reach 95 ms


def test_single_stream_closed_loop_invariant():
    profile, settings, clock, sut, _ = sim_env(
        distribution="uniform", params=(1_000_000, 5_000_000), min_query_count=100, store_size=8
    )
    log = run_single_stream(sut, settings, profile, clock=clock)
    for (_, completion), (nxt, _) in zip(log.trace, log.trace[1:]):
        assert nxt.issue_ns >= completion.completion_ns


def test_single_stream_fixed_p999():
    profile, settings, clock, sut, _ = sim_env(params=(10_000_000,), min_query_count=50)
    log = run_single_stream(sut, settings, profile, clock=clock)
    assert summarize(log).p999_ns == 10_000_000


def test_query_ids_gapless_and_increasing():
    profile, settings, clock, sut, _ = sim_env(min_query_count=25, store_size=8)
    log = run_single_stream(sut, settings, profile, clock=clock)
    assert [q.query_id for q, _ in log.trace] == list(range(25))


def test_sample_indices_length_and_range():
    profile, settings, clock, sut, _ = sim_env(
        profile_name="bevformer_tiny", min_query_count=10, store_size=5
    )
    log = run_single_stream(sut, settings, profile, clock=clock)
    for q, _ in log.trace:
        assert len(q.sample_indices) == 6
        assert all(0 <= i < 5 for i in q.sample_indices)


def test_single_stream_real_clock_smoke():
    clock = MonotonicClock()
    store = SampleStore(4, 64, seed=0)
    sut = SimulatedSut(SimulatedSutConfig("fixed", (1_000_000,)), store, clock)
    profile, settings, _, _, _ = sim_env(min_query_count=5)
    log = run_single_stream(sut, settings, profile, clock=clock)
    assert log.failure is None
    summary = summarize(log)
    assert summary.count == 5
    assert summary.min_ns >= 1_000_000


# -- constant stream --------------------------------------------------------------


def test_constant_stream_scheduled_times_15hz():
    profile, settings, clock, sut, _ = sim_env(
        scenario="constant_stream", params=(1_000_000,), min_query_count=4
    )
    log = run_constant_stream(sut, settings, profile, clock=clock)
    assert [q.scheduled_ns for q, _ in log.trace] == [0, 66_666_667, 133_333_333, 200_000_000]


def test_constant_stream_period_12hz():
    profile, settings, clock, sut, _ = sim_env(
        profile_name="bevformer_tiny",
        scenario="constant_stream",
        params=(1_000_000,),
        min_query_count=2,
        store_size=8,
    )
    log = run_constant_stream(sut, settings, profile, clock=clock)
    assert log.trace[1][0].scheduled_ns == 83_333_333


def test_constant_stream_overruns_slow_sut():
    profile, settings, clock, sut, _ = sim_env(
        scenario="constant_stream", params=(200_000_000,), min_query_count=10
    )
    log = run_constant_stream(sut, settings, profile, clock=clock)
    assert log.overrun_count == 9
    assert log.failure is None
    assert len(log.trace) == 10


def test_constant_stream_open_loop_issues_on_schedule():
    # 200 ms SUT at 15 Hz: issuance must not wait for completions.
    profile, settings, clock, sut, _ = sim_env(
        scenario="constant_stream", params=(200_000_000,), min_query_count=10
    )
    log = run_constant_stream(sut, settings, profile, clock=clock)
    for q, _ in log.trace:
        assert q.issue_ns == q.scheduled_ns


def test_constant_stream_never_issues_early():
    profile, settings, clock, sut, _ = sim_env(
        scenario="constant_stream",
        distribution="uniform",
        params=(1_000_000, 80_000_000),
        min_query_count=50,
        store_size=8,
    )
    log = run_constant_stream(sut, settings, profile, clock=clock)
    for q, _ in log.trace:
        assert q.issue_ns >= q.scheduled_ns


def test_constant_stream_rate_override():
    profile, settings, clock, sut, _ = sim_env(
        scenario="constant_stream", params=(1_000,), min_query_count=3, rate_override_hz=100.0
    )
    log = run_constant_stream(sut, settings, profile, clock=clock)
    assert [q.scheduled_ns for q, _ in log.trace] == [0, 10_000_000, 20_000_000]


def test_constant_stream_duration_target():
    # 0.5 s at 15 Hz -> ceil(7.5) = 8 queries
    profile, settings, clock, sut, _ = sim_env(
        scenario="constant_stream",
        params=(1_000_000,),
        min_query_count=1,
        min_duration_ns=500_000_000,
    )
    log = run_constant_stream(sut, settings, profile, clock=clock)
    assert len(log.trace) == 8


def test_constant_stream_latency_measured_from_schedule():
    profile, settings, clock, sut, _ = sim_env(
        scenario="constant_stream", params=(3_000_000,), min_query_count=5
    )
    log = run_constant_stream(sut, settings, profile, clock=clock)
    summary = summarize(log)
    assert summary.min_ns == summary.max_ns == 3_000_000


# -- accuracy mode -----------------------------------------------------------------


def _accuracy_env(**kwargs):
    profile, settings, clock, sut, store = sim_env(mode="accuracy", **kwargs)
    return profile, dataclasses.replace(settings, mode="accuracy"), clock, sut, store


def test_accuracy_covers_store():
    profile, settings, clock, sut, _ = _accuracy_env(store_size=4)
    log = run_accuracy(sut, settings, profile, clock=clock)
    covered = set().union(*(q.sample_indices for q, _ in log.trace))
    assert covered == {0, 1, 2, 3}
    assert len(log.trace) == 4


def test_accuracy_covers_store_multi_input_query():
    profile, settings, clock, sut, _ = _accuracy_env(profile_name="bevformer_tiny", store_size=4)
    log = run_accuracy(sut, settings, profile, clock=clock)
    assert len(log.trace) >= 1
    covered = set().union(*(q.sample_indices for q, _ in log.trace))
    assert covered == {0, 1, 2, 3}


def test_accuracy_echo_digests_match_store():
    profile, settings, clock, sut, store = _accuracy_env(store_size=4, echo=True)
    log = run_accuracy(sut, settings, profile, clock=clock)
    for q, c in log.trace:
        expected = b"".join(store.sample(i) for i in q.sample_indices)
        assert c.response_bytes == expected
        assert c.response_digest == digest64(expected)


def test_accuracy_requires_accuracy_mode():
    profile, settings, clock, sut, _ = sim_env()
    with pytest.raises(ValueError):
        run_accuracy(sut, settings, profile, clock=clock)


def test_accuracy_retains_bytes_performance_does_not():
    profile, settings, clock, sut, _ = _accuracy_env(store_size=4)
    log = run_accuracy(sut, settings, profile, clock=clock)
    assert all(c.response_bytes is not None for _, c in log.trace)

    profile2, settings2, clock2, sut2, _ = sim_env(min_query_count=3)
    log2 = run_single_stream(sut2, settings2, profile2, clock=clock2)
    assert all(c.response_bytes is None for _, c in log2.trace)


# -- failure handling ---------------------------------------------------------------


def test_run_failure_preserves_prefix():
    from rtbench.sut import SutError as Err

    class Boom(SimulatedSut):
        def issue(self, query):
            if query.query_id == 3:
                raise Err("synthetic fault")
            super().issue(query)

    profile, settings, clock, _, store = sim_env(min_query_count=10)
    sut = Boom(SimulatedSutConfig("fixed", (1_000_000,)), store, clock)
    log = run_single_stream(sut, settings, profile, clock=clock)
    assert log.failure == "synthetic fault"
    assert [q.query_id for q, _ in log.trace] == [0, 1, 2]
