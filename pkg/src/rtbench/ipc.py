"""Wire protocol for driving out-of-process systems under test.

Framing (all integers little-endian, bit-exact):

    frame   := u32 length, u8 type, payload     length = 1 + len(payload)
    HELLO   = 0x01  payload: magic "RTBA", u16 version
    CONFIG  = 0x02  payload: utf-8 "key = value" lines
    LOAD    = 0x03  payload: u32 sample_index, u32 nbytes, bytes
    LOADED  = 0x04  payload: u32 sample_index
    ISSUE   = 0x05  payload: u64 query_id, u32 n, n x u32 sample indices
    COMPLETE= 0x06  payload: u64 query_id, u32 blob length, blob
    FLUSH   = 0x07  payload: empty
    BYE     = 0x08  payload: empty

Frames are capped at 64 MiB so a buggy or hostile peer cannot exhaust
memory; samples are therefore loaded one LOAD frame each, acked by LOADED.
The session is: client sends HELLO, server answers HELLO, client sends
CONFIG, then LOAD/LOADED per sample, then pipelined ISSUEs answered by
COMPLETEs in any order, FLUSH acked by FLUSH once nothing is outstanding,
and BYE acked by BYE before the connection closes.

Transport time counts against the system under test: issue timestamps are
taken immediately before the ISSUE frame is written and completion
timestamps when the COMPLETE frame has been fully read, the same way a
sensor-to-decision pipeline would be measured end to end.
"""

from __future__ import annotations

import socket
import struct
import threading
import time
from dataclasses import dataclass

from .clock import MonotonicClock
from .prng import SplitMix64
from .recording import Query
from .samples import SampleStore
from .sut import SimulatedSutConfig, SutContract, SutError, _TimerWorker, simulate_latency

MAGIC = b"RTBA"
PROTOCOL_VERSION = 1
MAX_FRAME_BYTES = 64 * 1024 * 1024

HELLO, CONFIG, LOAD, LOADED, ISSUE, COMPLETE, FLUSH, BYE = range(0x01, 0x09)

_HANDSHAKE_TIMEOUT_S = 10.0
_LOADED_TIMEOUT_S = 60.0
_FLUSH_TIMEOUT_S = 120.0


class ProtocolError(RuntimeError):
    pass


@dataclass(frozen=True)
class Hello:
    version: int = PROTOCOL_VERSION


@dataclass(frozen=True)
class Config:
    text: str


@dataclass(frozen=True)
class Load:
    sample_index: int
    data: bytes


@dataclass(frozen=True)
class Loaded:
    sample_index: int


@dataclass(frozen=True)
class Issue:
    query_id: int
    sample_indices: tuple[int, ...]


@dataclass(frozen=True)
class Complete:
    query_id: int
    blob: bytes


@dataclass(frozen=True)
class Flush:
    pass


@dataclass(frozen=True)
class Bye:
    pass


def encode_message(msg) -> bytes:
    """Encode a message into one full frame."""
    if isinstance(msg, Hello):
        payload = MAGIC + struct.pack("<H", msg.version)
        kind = HELLO
    elif isinstance(msg, Config):
        payload = msg.text.encode("utf-8")
        kind = CONFIG
    elif isinstance(msg, Load):
        payload = struct.pack("<II", msg.sample_index, len(msg.data)) + msg.data
        kind = LOAD
    elif isinstance(msg, Loaded):
        payload = struct.pack("<I", msg.sample_index)
        kind = LOADED
    elif isinstance(msg, Issue):
        n = len(msg.sample_indices)
        payload = struct.pack(f"<QI{n}I", msg.query_id, n, *msg.sample_indices)
        kind = ISSUE
    elif isinstance(msg, Complete):
        payload = struct.pack("<QI", msg.query_id, len(msg.blob)) + msg.blob
        kind = COMPLETE
    elif isinstance(msg, Flush):
        payload, kind = b"", FLUSH
    elif isinstance(msg, Bye):
        payload, kind = b"", BYE
    else:
        raise TypeError(f"not a protocol message: {msg!r}")
    length = 1 + len(payload)
    if length > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {length} bytes exceeds the {MAX_FRAME_BYTES} byte cap")
    return struct.pack("<I", length) + bytes([kind]) + payload


def decode_payload(kind: int, payload: bytes):
    """Decode one frame body into its message; raises ProtocolError."""
    try:
        if kind == HELLO:
            if len(payload) != 6:
                raise ProtocolError(f"HELLO payload must be 6 bytes; got {len(payload)}")
            if payload[:4] != MAGIC:
                raise ProtocolError(f"bad HELLO magic {payload[:4]!r}")
            return Hello(struct.unpack("<H", payload[4:6])[0])
        if kind == CONFIG:
            return Config(payload.decode("utf-8"))
        if kind == LOAD:
            index, nbytes = struct.unpack_from("<II", payload)
            data = payload[8:]
            if len(data) != nbytes:
                raise ProtocolError(f"LOAD declares {nbytes} bytes but carries {len(data)}")
            return Load(index, data)
        if kind == LOADED:
            (index,) = struct.unpack("<I", payload)
            return Loaded(index)
        if kind == ISSUE:
            query_id, n = struct.unpack_from("<QI", payload)
            expected = 12 + 4 * n
            if len(payload) != expected:
                raise ProtocolError(f"ISSUE payload must be {expected} bytes; got {len(payload)}")
            indices = struct.unpack_from(f"<{n}I", payload, 12)
            return Issue(query_id, tuple(indices))
        if kind == COMPLETE:
            query_id, nbytes = struct.unpack_from("<QI", payload)
            blob = payload[12:]
            if len(blob) != nbytes:
                raise ProtocolError(f"COMPLETE declares {nbytes} bytes but carries {len(blob)}")
            return Complete(query_id, blob)
        if kind == FLUSH:
            if payload:
                raise ProtocolError("FLUSH carries no payload")
            return Flush()
        if kind == BYE:
            if payload:
                raise ProtocolError("BYE carries no payload")
            return Bye()
    except struct.error as exc:
        raise ProtocolError(f"malformed payload for type 0x{kind:02x}: {exc}") from None
    raise ProtocolError(f"unknown message type 0x{kind:02x}")


class FrameDecoder:
    """Incremental decoder; correct for any chunking of the byte stream."""

    def __init__(self) -> None:
        self._buffer = bytearray()

    def feed(self, data: bytes) -> list:
        """Consume data and return every complete message now available."""
        self._buffer.extend(data)
        messages = []
        while True:
            if len(self._buffer) < 4:
                break
            (length,) = struct.unpack_from("<I", self._buffer)
            if length < 1:
                raise ProtocolError(f"frame length {length} is below the 1-byte minimum")
            if length > MAX_FRAME_BYTES:
                raise ProtocolError(f"frame length {length} exceeds the {MAX_FRAME_BYTES} byte cap")
            if len(self._buffer) < 4 + length:
                break
            kind = self._buffer[4]
            payload = bytes(self._buffer[5 : 4 + length])
            del self._buffer[: 4 + length]
            messages.append(decode_payload(kind, payload))
        return messages

    @property
    def pending_bytes(self) -> int:
        return len(self._buffer)


def encode_frame(msg) -> bytes:
    """Alias of encode_message; one message is one frame."""
    return encode_message(msg)


def decode_frame(data: bytes):
    """Decode exactly one message from a buffer holding one whole frame."""
    decoder = FrameDecoder()
    messages = decoder.feed(data)
    if not messages:
        raise ProtocolError("buffer does not hold a complete frame")
    if decoder.pending_bytes:
        raise ProtocolError(f"{decoder.pending_bytes} trailing bytes after frame")
    return messages[0]


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = bytearray()
    while len(chunks) < n:
        piece = sock.recv(n - len(chunks))
        if not piece:
            raise ProtocolError("connection closed mid-frame")
        chunks.extend(piece)
    return bytes(chunks)


def read_message(sock: socket.socket):
    """Blocking read of one whole frame from a socket."""
    header = _recv_exact(sock, 4)
    (length,) = struct.unpack("<I", header)
    if length < 1 or length > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame length {length} outside [1, {MAX_FRAME_BYTES}]")
    body = _recv_exact(sock, length)
    return decode_payload(body[0], body[1:])


def parse_address(endpoint: str) -> tuple[str, int]:
    host, _, port = endpoint.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"expected host:port; got '{endpoint}'")
    return host, int(port)


class RemoteSut(SutContract):
    """Harness-side client driving a SUT over a stream socket.

    One connection per run lifecycle; the writer (load/issue/flush) runs on
    the engine's issuing thread while a reader thread delivers COMPLETEs to
    the recorder, so pipelined queries overlap. Connection loss surfaces as
    a SutError and marks the run invalid.
    """

    def __init__(self, address, store: SampleStore, clock=None, config_extra: str = "") -> None:
        super().__init__()
        if clock is not None and clock.simulated:
            raise ValueError("remote SUTs require a real clock")
        self.clock = clock if clock is not None else MonotonicClock()
        self.store = store
        self._address = parse_address(address) if isinstance(address, str) else tuple(address)
        self._config_extra = config_extra
        self._sock: socket.socket | None = None
        self._reader: threading.Thread | None = None
        self._loaded: set[int] = set()
        self._failure: str | None = None
        self._loaded_acks: set[int] = set()
        self._flush_acked = False
        self._bye_acked = False
        self._closing = False
        self._state = threading.Condition()

    # -- connection -------------------------------------------------------

    def _connect(self) -> None:
        if self._sock is not None:
            return
        sock = socket.create_connection(self._address, timeout=_HANDSHAKE_TIMEOUT_S)
        sock.sendall(encode_message(Hello()))
        reply = read_message(sock)
        if not isinstance(reply, Hello):
            sock.close()
            raise ProtocolError(f"expected HELLO reply; got {type(reply).__name__}")
        if reply.version != PROTOCOL_VERSION:
            sock.close()
            raise ProtocolError(
                f"version mismatch: peer speaks {reply.version}, harness speaks {PROTOCOL_VERSION}"
            )
        sock.settimeout(None)
        self._sock = sock
        self._reader = threading.Thread(target=self._read_loop, name="remote-sut-reader", daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        decoder = FrameDecoder()
        try:
            while True:
                data = self._sock.recv(65536)
                if not data:
                    if decoder.pending_bytes:
                        raise ProtocolError("connection closed mid-frame")
                    break
                for msg in decoder.feed(data):
                    self._dispatch(msg)
        except (OSError, ProtocolError) as exc:
            if not self._closing:
                self._fail(f"connection lost: {exc}")
            return
        with self._state:
            if not self._bye_acked and not self._closing:
                self._failure = self._failure or "connection closed by peer"
            self._state.notify_all()
        if self._recorder is not None and self._failure:
            self._recorder.fail(self._failure)

    def _dispatch(self, msg) -> None:
        if isinstance(msg, Complete):
            completion_ns = self.clock.now_ns()
            if self._recorder is None:
                self._fail("COMPLETE received with no recorder attached")
                return
            self._recorder.record(msg.query_id, msg.blob, completion_ns)
        elif isinstance(msg, Loaded):
            with self._state:
                self._loaded_acks.add(msg.sample_index)
                self._state.notify_all()
        elif isinstance(msg, Flush):
            with self._state:
                self._flush_acked = True
                self._state.notify_all()
        elif isinstance(msg, Bye):
            with self._state:
                self._bye_acked = True
                self._state.notify_all()
        else:
            self._fail(f"unexpected {type(msg).__name__} frame from peer")

    def _fail(self, message: str) -> None:
        with self._state:
            if self._failure is None:
                self._failure = message
            self._state.notify_all()
        if self._recorder is not None:
            self._recorder.fail(message)

    def _check_failure(self) -> None:
        if self._failure is not None:
            raise SutError(self._failure)

    def _send(self, msg) -> None:
        self._check_failure()
        try:
            self._sock.sendall(encode_message(msg))
        except OSError as exc:
            self._fail(f"send failed: {exc}")
            raise SutError(self._failure) from None

    def _wait_state(self, done, timeout_s: float, what: str) -> None:
        with self._state:
            deadline = self.clock.now_ns() + int(timeout_s * 1e9)
            while not done():
                if self._failure is not None:
                    raise SutError(self._failure)
                remaining = (deadline - self.clock.now_ns()) / 1e9
                if remaining <= 0:
                    raise SutError(f"timed out waiting for {what}")
                self._state.wait(timeout=remaining)

    # -- contract ---------------------------------------------------------

    def begin_run(self, mode: str) -> None:
        self._connect()
        text = (
            f"mode = {mode}\n"
            f"store_size = {self.store.store_size}\n"
            f"sample_bytes = {self.store.sample_bytes}\n"
        ) + self._config_extra
        self._send(Config(text))

    def load_samples(self, indices) -> None:
        self._connect()
        indices = list(indices)
        for index in indices:
            if not 0 <= index < self.store.store_size:
                raise SutError(f"cannot load sample {index}: store has {self.store.store_size}")
        for index in indices:
            with self._state:
                self._loaded_acks.discard(index)
            self._send(Load(index, self.store.sample(index)))
            self._wait_state(
                lambda: index in self._loaded_acks, _LOADED_TIMEOUT_S, f"LOADED ack for sample {index}"
            )
        self._loaded = set(indices)

    def unload(self) -> None:
        self._loaded = set()

    def issue(self, query: Query) -> None:
        if not self._loaded:
            raise SutError("issue before load_samples")
        for index in query.sample_indices:
            if index not in self._loaded:
                raise SutError(f"query {query.query_id} references unloaded sample {index}")
        self._send(Issue(query.query_id, tuple(query.sample_indices)))

    def flush(self) -> None:
        with self._state:
            self._flush_acked = False
        self._send(Flush())
        self._wait_state(lambda: self._flush_acked, _FLUSH_TIMEOUT_S, "FLUSH ack")

    def close(self) -> None:
        if self._sock is None:
            return
        try:
            self._send(Bye())
            self._wait_state(lambda: self._bye_acked, _HANDSHAKE_TIMEOUT_S, "BYE ack")
        except SutError:
            pass
        finally:
            self._closing = True
            try:
                self._sock.close()
            except OSError:
                pass
            if self._reader is not None:
                self._reader.join(timeout=5)
            self._sock = None

    def __enter__(self):
        self._connect()
        return self

    def __exit__(self, *exc_info):
        self.close()


def remote_sut(endpoint: str, store: SampleStore, clock=None) -> RemoteSut:
    """Connect to endpoint ('host:port') and return the SUT client."""
    sut = RemoteSut(endpoint, store, clock=clock)
    sut._connect()
    return sut


class StubServer:
    """In-process loopback SUT speaking the wire protocol.

    Serves one client at a time with latencies drawn from a simulated-SUT
    config; completions come from a timer thread so ISSUEs pipeline. Used by
    the protocol tests and by anyone who wants a local tcp: endpoint without
    an external process.
    """

    def __init__(self, config: SimulatedSutConfig, host: str = "127.0.0.1", port: int = 0) -> None:
        bad = config.violations()
        if bad:
            raise ValueError("; ".join(bad))
        self.config = config
        self._listener = socket.create_server((host, port))
        self.address = "%s:%d" % self._listener.getsockname()[:2]
        self._stopping = False
        self._conns: set[socket.socket] = set()
        self._conns_lock = threading.Lock()
        self._thread = threading.Thread(target=self._accept_loop, name="stub-server", daemon=True)

    def start(self) -> "StubServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stopping = True
        try:
            self._listener.close()
        except OSError:
            pass
        with self._conns_lock:
            for conn in list(self._conns):
                try:
                    conn.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass
        self._thread.join(timeout=5)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc_info):
        self.stop()

    def _accept_loop(self) -> None:
        session = 0
        while not self._stopping:
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(
                target=self._serve_one, args=(conn, session), name="stub-session", daemon=True
            ).start()
            session += 1

    def _serve_one(self, conn: socket.socket, session: int) -> None:
        with self._conns_lock:
            self._conns.add(conn)
        try:
            _serve_session(conn, self.config, session_seed=session)
        except (ProtocolError, OSError):
            pass
        finally:
            with self._conns_lock:
                self._conns.discard(conn)
            conn.close()


def _serve_session(conn: socket.socket, config: SimulatedSutConfig, session_seed: int = 0) -> None:
    """Serve one protocol session on an accepted connection."""
    rng = SplitMix64(config.seed ^ session_seed)
    samples: dict[int, bytes] = {}
    write_lock = threading.Lock()
    worker = _TimerWorker()

    def send(msg) -> None:
        with write_lock:
            conn.sendall(encode_message(msg))

    hello = read_message(conn)
    if not isinstance(hello, Hello):
        raise ProtocolError(f"expected HELLO; got {type(hello).__name__}")
    if hello.version != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol version {hello.version}")
    send(Hello())

    try:
        while True:
            msg = read_message(conn)
            if isinstance(msg, Config):
                continue
            if isinstance(msg, Load):
                samples[msg.sample_index] = msg.data
                send(Loaded(msg.sample_index))
            elif isinstance(msg, Issue):
                for index in msg.sample_indices:
                    if index not in samples:
                        raise ProtocolError(f"ISSUE references unloaded sample {index}")
                latency_ns = simulate_latency(config, rng)
                if config.echo_responses:
                    blob = b"".join(samples[i] for i in msg.sample_indices)
                else:
                    blob = struct.pack(f"<{len(msg.sample_indices)}I", *msg.sample_indices)
                query_id = msg.query_id
                worker.submit(
                    time.monotonic_ns() + latency_ns, lambda q=query_id, b=blob: send(Complete(q, b))
                )
            elif isinstance(msg, Flush):
                worker.wait_idle(_FLUSH_TIMEOUT_S)
                send(Flush())
            elif isinstance(msg, Bye):
                send(Bye())
                return
            else:
                raise ProtocolError(f"unexpected {type(msg).__name__} frame from client")
    finally:
        worker.stop()


def check_protocol_conformance(endpoint: str, sample_bytes: int = 64) -> list[str]:
    """Drive a serving endpoint through the whole session at the byte level.

    Returns human-readable failures; empty means the peer conforms. The same
    checks run against the in-process loopback stub and external stubs.
    """
    failures: list[str] = []
    host, port = parse_address(endpoint)
    sock = socket.create_connection((host, port), timeout=_HANDSHAKE_TIMEOUT_S)
    sock.settimeout(30.0)
    try:
        sock.sendall(encode_message(Hello()))
        reply = read_message(sock)
        if not isinstance(reply, Hello):
            return [f"handshake: expected HELLO reply, got {type(reply).__name__}"]
        if reply.version != PROTOCOL_VERSION:
            failures.append(f"handshake: peer version {reply.version} != {PROTOCOL_VERSION}")

        sock.sendall(encode_message(Config("mode = performance\n")))

        payloads = {i: bytes([i]) * sample_bytes for i in range(3)}
        for index, data in payloads.items():
            sock.sendall(encode_message(Load(index, data)))
            ack = read_message(sock)
            if not isinstance(ack, Loaded) or ack.sample_index != index:
                failures.append(f"load: expected LOADED {index}, got {ack!r}")

        # Pipelined issues; completions may arrive in any order.
        n = 6
        for query_id in range(n):
            sock.sendall(encode_message(Issue(query_id, (query_id % 3,))))
        sock.sendall(encode_message(Flush()))
        seen: set[int] = set()
        while True:
            msg = read_message(sock)
            if isinstance(msg, Complete):
                if msg.query_id in seen:
                    failures.append(f"issue: duplicate COMPLETE for query {msg.query_id}")
                seen.add(msg.query_id)
            elif isinstance(msg, Flush):
                break
            else:
                failures.append(f"issue: unexpected {type(msg).__name__} before FLUSH ack")
                break
        if seen != set(range(n)):
            failures.append(f"flush: completions {sorted(seen)} != issued {list(range(n))}")

        sock.sendall(encode_message(Bye()))
        bye = read_message(sock)
        if not isinstance(bye, Bye):
            failures.append(f"bye: expected BYE ack, got {type(bye).__name__}")
    except (ProtocolError, OSError) as exc:
        failures.append(f"session aborted: {exc}")
    finally:
        sock.close()
    return failures
