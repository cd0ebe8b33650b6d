"""Compact endpoint grammar for addressing systems under test.

    sim:<distribution>:<params>[:key=value,...]     in-process simulated SUT
    tcp:<host>:<port>                               remote SUT over the wire

Distribution params: fixed takes one duration; uniform takes lo,hi
durations; lognormal takes mu,sigma of the underlying normal in
ln-nanoseconds; bimodal takes lo,hi durations and the probability of hi.
Durations accept ns/us/ms/s suffixes. Options: seed=<int>, echo=<0|1>,
cache=<speedup fraction>, window=<query count>.
"""

from __future__ import annotations

from .ipc import RemoteSut
from .samples import SampleStore
from .sut import SimulatedSutConfig, SimulatedSut, SutContract, parse_duration_ns


def parse_sim_endpoint(endpoint: str) -> SimulatedSutConfig:
    parts = endpoint.split(":")
    if len(parts) < 3 or parts[0] != "sim":
        raise ValueError(f"expected sim:<dist>:<params>[:options]; got '{endpoint}'")
    distribution = parts[1]
    raw_params = parts[2].split(",") if parts[2] else []

    if distribution == "fixed":
        params = tuple(float(parse_duration_ns(p)) for p in raw_params)
    elif distribution == "uniform":
        params = tuple(float(parse_duration_ns(p)) for p in raw_params)
    elif distribution == "lognormal":
        params = tuple(float(p) for p in raw_params)
    elif distribution == "bimodal":
        if len(raw_params) != 3:
            raise ValueError(f"bimodal takes lo,hi,weight; got '{parts[2]}'")
        params = (
            float(parse_duration_ns(raw_params[0])),
            float(parse_duration_ns(raw_params[1])),
            float(raw_params[2]),
        )
    else:
        raise ValueError(f"unknown simulated distribution '{distribution}'")

    options = {"seed": 0, "echo": False, "cache": 1.0, "window": 0}
    for chunk in parts[3:]:
        for item in chunk.split(","):
            if not item:
                continue
            if "=" not in item:
                raise ValueError(f"endpoint option '{item}' is not key=value")
            key, value = item.split("=", 1)
            if key == "seed":
                options["seed"] = int(value)
            elif key == "echo":
                options["echo"] = value not in ("0", "false", "")
            elif key == "cache":
                options["cache"] = float(value)
            elif key == "window":
                options["window"] = int(value)
            else:
                raise ValueError(f"unknown endpoint option '{key}'")

    config = SimulatedSutConfig(
        distribution=distribution,
        params=params,
        cache_speedup=options["cache"],
        cache_window=options["window"],
        seed=options["seed"],
        echo_responses=options["echo"],
    )
    bad = config.violations()
    if bad:
        raise ValueError("; ".join(bad))
    return config


def sut_from_endpoint(endpoint: str, store: SampleStore, clock) -> SutContract:
    """Construct the SUT named by an endpoint string."""
    if endpoint.startswith("sim:"):
        return SimulatedSut(parse_sim_endpoint(endpoint), store, clock)
    if endpoint.startswith("tcp:"):
        return RemoteSut(endpoint[len("tcp:") :], store, clock=clock)
    raise ValueError(f"unknown endpoint scheme in '{endpoint}' (expected sim: or tcp:)")
