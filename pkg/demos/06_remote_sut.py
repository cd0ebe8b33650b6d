#!/usr/bin/env python3
"""Driving a system under test in another process.

The harness talks to remote systems over a small length-prefixed binary
protocol on a stream socket; transport time counts against the system, the
same way a sensor-to-decision pipeline is measured end to end. Here the peer
is the in-process loopback stub; the standalone `pysut` package serves the
same protocol from its own process (`python -m pysut --dist fixed --params 10ms`).
"""

import dataclasses

from rtbench import (
    SampleStore,
    SimulatedSutConfig,
    StubServer,
    check_protocol_conformance,
    default_settings,
    profile_by_name,
    remote_sut,
    run_single_stream,
    summarize,
)

profile = profile_by_name("ssd_resnet50")
settings = dataclasses.replace(
    default_settings(profile),
    min_query_count=10,
    min_duration_ns=0,
    store_size=4,
    sample_bytes=64,
)

config = SimulatedSutConfig("fixed", (10_000_000,), echo_responses=True)
with StubServer(config) as server:
    print("stub listening at", server.address)

    # byte-level conformance first: handshake, load acks, pipelining, flush
    failures = check_protocol_conformance(server.address)
    print("protocol conformance failures:", failures or "none")

    store = SampleStore(settings.store_size, settings.sample_bytes, settings.seed)
    sut = remote_sut(server.address, store)
    try:
        log = run_single_stream(sut, settings, profile)
    finally:
        sut.close()

    summary = summarize(log)
    print(f"run over the wire: {summary.count} queries, p50 {summary.p50_ns / 1e6:.2f} ms")
    print("p50 >= the stub's 10 ms latency because socket time is charged to the SUT")
