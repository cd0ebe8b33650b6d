"""Command-line entry point mirroring StubConfig.

Durations in --params accept ns/us/ms/s suffixes; lognormal params are the
mu,sigma of the underlying normal in ln-nanoseconds (raw floats).
"""

from __future__ import annotations

import argparse
import sys

from .server import DISTRIBUTIONS, StubConfig, serve

_UNITS = {"ns": 1, "us": 1_000, "ms": 1_000_000, "s": 1_000_000_000}


def _duration_ns(text: str) -> float:
    text = text.strip()
    for unit, scale in sorted(_UNITS.items(), key=lambda kv: -len(kv[0])):
        if text.endswith(unit):
            return float(text[: -len(unit)]) * scale
    return float(text)


def _parse_params(distribution: str, text: str) -> tuple[float, ...]:
    raw = [p for p in text.split(",") if p]
    if distribution == "lognormal":
        return tuple(float(p) for p in raw)
    if distribution == "bimodal":
        if len(raw) != 3:
            raise ValueError(f"bimodal takes lo,hi,weight; got '{text}'")
        return (_duration_ns(raw[0]), _duration_ns(raw[1]), float(raw[2]))
    return tuple(_duration_ns(p) for p in raw)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pysut", description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=0, help="0 binds an ephemeral port")
    parser.add_argument("--dist", choices=DISTRIBUTIONS, default="fixed")
    parser.add_argument("--params", default="10ms", help="comma-separated distribution params")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--echo", action="store_true", help="respond with the raw sample bytes")
    parser.add_argument("--workers", type=int, default=8)
    args = parser.parse_args(argv)

    try:
        config = StubConfig(
            distribution=args.dist,
            params=_parse_params(args.dist, args.params),
            seed=args.seed,
            echo_responses=args.echo,
            host=args.host,
            port=args.port,
            workers=args.workers,
        )
        return serve(config)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
