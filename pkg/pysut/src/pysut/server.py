"""The stub server: one session per process run, completions off-thread.

The reader loop owns the socket's receive side; completions are produced by
a small worker pool so pipelined queries overlap and COMPLETE order follows
latency, not issue order. Socket writes are serialized by a lock. A FLUSH is
answered only once every outstanding completion has been written, and a BYE
is acked and ends the session. Protocol violations close the connection
after printing a diagnostic.
"""

from __future__ import annotations

import math
import socket
import struct
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import protocol

_MASK64 = (1 << 64) - 1

DISTRIBUTIONS = ("fixed", "uniform", "lognormal", "bimodal")


class _SplitMix64:
    """Same deterministic stream the harness uses for its own doubles."""

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_unit(self) -> float:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        z ^= z >> 31
        return (z >> 11) * 2.0**-53


@dataclass(frozen=True)
class StubConfig:
    """Latency distribution, response mode, and listen address."""

    distribution: str = "fixed"
    params: tuple[float, ...] = (10_000_000.0,)
    seed: int = 0
    echo_responses: bool = False
    host: str = "127.0.0.1"
    port: int = 0
    workers: int = 8

    def violations(self) -> list[str]:
        bad = []
        if self.distribution not in DISTRIBUTIONS:
            bad.append(f"distribution must be one of {DISTRIBUTIONS}; got '{self.distribution}'")
            return bad
        arity = {"fixed": 1, "uniform": 2, "lognormal": 2, "bimodal": 3}[self.distribution]
        if len(self.params) != arity:
            bad.append(f"{self.distribution} takes {arity} params; got {len(self.params)}")
        elif self.distribution == "uniform" and not self.params[0] <= self.params[1]:
            bad.append(f"uniform requires lo <= hi; got {self.params}")
        elif self.distribution == "bimodal" and not 0.0 < self.params[2] < 1.0:
            bad.append(f"bimodal weight must be in (0, 1); got {self.params[2]}")
        return bad


def draw_latency_ns(config: StubConfig, rng: _SplitMix64) -> int:
    if config.distribution == "fixed":
        return max(0, int(round(config.params[0])))
    if config.distribution == "uniform":
        lo, hi = config.params
        return max(0, int(round(lo + rng.next_unit() * (hi - lo))))
    if config.distribution == "lognormal":
        mu, sigma = config.params
        u1 = 1.0 - rng.next_unit()
        u2 = rng.next_unit()
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return max(0, int(round(math.exp(mu + sigma * z))))
    lo, hi, weight = config.params
    return max(0, int(round(hi if rng.next_unit() < weight else lo)))


class _Session:
    def __init__(self, conn: socket.socket, config: StubConfig, handler=None) -> None:
        self.conn = conn
        self.config = config
        self.handler = handler
        self.samples: dict[int, bytes] = {}
        self.rng = _SplitMix64(config.seed)
        self.pool = ThreadPoolExecutor(max_workers=config.workers, thread_name_prefix="pysut")
        self.write_lock = threading.Lock()
        self.pending = 0
        self.pending_cond = threading.Condition()

    def send(self, data: bytes) -> None:
        with self.write_lock:
            self.conn.sendall(data)

    def complete_later(self, query_id: int, indices: tuple[int, ...]) -> None:
        if self.handler is not None:
            def work() -> None:
                blob = self.handler(indices, self.samples)
                self.send(protocol.complete_frame(query_id, blob))
        else:
            latency_ns = draw_latency_ns(self.config, self.rng)
            if self.config.echo_responses:
                blob = b"".join(self.samples[i] for i in indices)
            else:
                blob = struct.pack(f"<{len(indices)}I", *indices)

            def work() -> None:
                time.sleep(latency_ns / 1e9)
                self.send(protocol.complete_frame(query_id, blob))

        with self.pending_cond:
            self.pending += 1

        def tracked() -> None:
            try:
                work()
            finally:
                with self.pending_cond:
                    self.pending -= 1
                    self.pending_cond.notify_all()

        self.pool.submit(tracked)

    def wait_drained(self) -> None:
        with self.pending_cond:
            while self.pending > 0:
                self.pending_cond.wait()

    def run(self) -> None:
        kind, payload = protocol.read_frame(self.conn)
        if kind != protocol.HELLO:
            raise protocol.WireError(f"expected HELLO first; got type 0x{kind:02x}")
        version = protocol.parse_hello(payload)
        if version != protocol.VERSION:
            raise protocol.WireError(f"unsupported protocol version {version}")
        self.send(protocol.hello_frame())

        while True:
            kind, payload = protocol.read_frame(self.conn)
            if kind == protocol.CONFIG:
                continue  # informational; the stub's behavior is fixed by its flags
            if kind == protocol.LOAD:
                index, data = protocol.parse_load(payload)
                self.samples[index] = data
                self.send(protocol.loaded_frame(index))
            elif kind == protocol.ISSUE:
                query_id, indices = protocol.parse_issue(payload)
                missing = [i for i in indices if i not in self.samples]
                if missing:
                    raise protocol.WireError(
                        f"ISSUE {query_id} references unloaded sample {missing[0]}"
                    )
                self.complete_later(query_id, indices)
            elif kind == protocol.FLUSH:
                self.wait_drained()
                self.send(protocol.frame(protocol.FLUSH))
            elif kind == protocol.BYE:
                self.wait_drained()
                self.send(protocol.frame(protocol.BYE))
                return
            else:
                raise protocol.WireError(f"unexpected frame type 0x{kind:02x}")

    def close(self) -> None:
        self.pool.shutdown(wait=False)
        try:
            self.conn.close()
        except OSError:
            pass


def serve(config: StubConfig, handler=None, ready=None) -> int:
    """Listen, serve exactly one session, and return 0 on a clean BYE.

    handler, when given, replaces the latency simulation: it is called as
    handler(sample_indices, samples) in a worker thread and its return bytes
    become the response blob; wall time spent inside it is the measured
    latency. ready (a callable) is invoked with the bound (host, port) once
    the socket is listening.
    """
    bad = config.violations()
    if bad:
        raise ValueError("; ".join(bad))
    listener = socket.create_server((config.host, config.port))
    host, port = listener.getsockname()[:2]
    print(f"listening on {host}:{port}", flush=True)
    if ready is not None:
        ready((host, port))
    try:
        conn, peer = listener.accept()
    finally:
        listener.close()

    session = _Session(conn, config, handler=handler)
    try:
        session.run()
        return 0
    except protocol.WireError as exc:
        print(f"protocol violation from {peer[0]}:{peer[1]}: {exc}", file=sys.stderr, flush=True)
        return 1
    finally:
        session.close()
