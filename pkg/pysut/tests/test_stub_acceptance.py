"""Cross-language conformance: the stub must satisfy the harness end to end.

The stub runs as a separate process and is reached only through its wire
protocol and command line; the harness side is driven through its public
interfaces (CLI and log format).
"""

import contextlib
import socket
import struct
import subprocess
import sys
import time

import pytest


@contextlib.contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE FAIL - {name}")
        raise
    print(f"ACCEPTANCE PASS - {name}")


@contextlib.contextmanager
def stub_process(*extra_args):
    proc = subprocess.Popen(
        [sys.executable, "-m", "pysut", "--port", "0", *extra_args],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
    )
    try:
        line = proc.stdout.readline().strip()
        assert line.startswith("listening on "), f"unexpected banner: {line!r}"
        address = line.removeprefix("listening on ")
        yield proc, address
    finally:
        if proc.poll() is None:
            proc.kill()
        proc.wait(timeout=10)


def _connect(address):
    host, port = address.rsplit(":", 1)
    deadline = time.monotonic() + 10
    while True:
        try:
            return socket.create_connection((host, int(port)), timeout=10)
        except OSError:
            if time.monotonic() > deadline:
                raise
            time.sleep(0.05)


def _recv_exact(sock, n):
    buf = bytearray()
    while len(buf) < n:
        piece = sock.recv(n - len(buf))
        assert piece, "connection closed early"
        buf.extend(piece)
    return bytes(buf)


def _recv_frame_bytes(sock):
    header = _recv_exact(sock, 4)
    (length,) = struct.unpack("<I", header)
    return header + _recv_exact(sock, length)


def test_byte_level_transcript_matches_hand_encoded_vectors():
    with criterion("stub transcript matches the hand-encoded framing vectors"):
        with stub_process() as (_, address):
            sock = _connect(address)
            try:
                # HELLO -> exact HELLO reply
                sock.sendall(bytes.fromhex("07000000" + "01" + "52544241" + "0100"))
                assert _recv_frame_bytes(sock) == bytes.fromhex(
                    "07000000" + "01" + "52544241" + "0100"
                )

                # CONFIG is accepted silently
                config_text = b"mode = performance\n"
                sock.sendall(
                    struct.pack("<I", 1 + len(config_text)) + b"\x02" + config_text
                )

                # LOAD sample 0 (4 bytes) -> exact LOADED ack
                sock.sendall(
                    bytes.fromhex("0d000000" + "03" + "00000000" + "04000000") + b"\xaa\xbb\xcc\xdd"
                )
                assert _recv_frame_bytes(sock) == bytes.fromhex("05000000" + "04" + "00000000")

                # ISSUE(query_id=1, [0]) -- the canonical framing vector
                sock.sendall(
                    bytes.fromhex(
                        "11000000" + "05" + "0100000000000000" + "01000000" + "00000000"
                    )
                )
                # COMPLETE(query_id=1, blob = u32 index 0)
                assert _recv_frame_bytes(sock) == bytes.fromhex(
                    "11000000" + "06" + "0100000000000000" + "04000000" + "00000000"
                )

                # FLUSH and BYE acks are bare frames
                sock.sendall(bytes.fromhex("01000000" + "07"))
                assert _recv_frame_bytes(sock) == bytes.fromhex("01000000" + "07")
                sock.sendall(bytes.fromhex("01000000" + "08"))
                assert _recv_frame_bytes(sock) == bytes.fromhex("01000000" + "08")
            finally:
                sock.close()


def test_harness_single_stream_run_against_stub(tmp_path):
    with criterion("harness single-stream run against the stub yields a valid log, p50 >= stub latency"):
        from rtbench.reporter import parse_log, recompute_summary

        with stub_process("--dist", "fixed", "--params", "10ms", "--echo") as (proc, address):
            out_path = tmp_path / "run.log"
            result = subprocess.run(
                [
                    sys.executable,
                    "-m",
                    "rtbench",
                    "run",
                    "--profile",
                    "ssd_resnet50",
                    "--sut",
                    f"tcp:{address}",
                    "--queries",
                    "20",
                    "--duration-s",
                    "0",
                    "--store-size",
                    "4",
                    "--sample-bytes",
                    "64",
                    "--out",
                    str(out_path),
                ],
                capture_output=True,
                text=True,
                timeout=120,
            )
            assert result.returncode == 0, result.stderr
            events = parse_log(out_path.read_text())
            summary = recompute_summary(events)
            assert summary.count == 20
            assert summary.p50_ns >= 10_000_000
            assert proc.wait(timeout=10) == 0  # clean exit after BYE


def test_stub_passes_primary_protocol_conformance_suite():
    with criterion("stub passes the harness's protocol conformance suite"):
        from rtbench.ipc import check_protocol_conformance

        with stub_process("--dist", "fixed", "--params", "1ms") as (_, address):
            assert check_protocol_conformance(address) == []


def test_pipelined_completions_can_reorder():
    from rtbench.ipc import Complete, Flush, Issue, Load, encode_message, read_message, Hello

    with stub_process("--dist", "uniform", "--params", "1ms,50ms", "--seed", "7") as (_, address):
        sock = _connect(address)
        try:
            sock.sendall(encode_message(Hello()))
            read_message(sock)
            for i in range(3):
                sock.sendall(encode_message(Load(i, bytes([i]) * 8)))
                read_message(sock)
            n = 10
            for query_id in range(n):
                sock.sendall(encode_message(Issue(query_id, (query_id % 3,))))
            sock.sendall(encode_message(Flush()))
            seen = []
            while True:
                msg = read_message(sock)
                if isinstance(msg, Flush):
                    break
                assert isinstance(msg, Complete)
                seen.append(msg.query_id)
            assert sorted(seen) == list(range(n))
        finally:
            sock.close()


def test_protocol_violation_closes_with_diagnostic():
    with stub_process() as (proc, address):
        sock = _connect(address)
        try:
            sock.sendall(bytes.fromhex("07000000" + "01" + "58585858" + "0100"))  # magic XXXX
            assert sock.recv(1024) == b""  # closed on us
        finally:
            sock.close()
        assert proc.wait(timeout=10) == 1
        assert "protocol violation" in proc.stderr.read()


def test_unloaded_sample_index_is_violation():
    from rtbench.ipc import Hello, Issue, Load, encode_message, read_message

    with stub_process() as (proc, address):
        sock = _connect(address)
        try:
            sock.sendall(encode_message(Hello()))
            read_message(sock)
            sock.sendall(encode_message(Load(0, b"x" * 8)))
            read_message(sock)
            sock.sendall(encode_message(Issue(0, (5,))))
            assert sock.recv(1024) == b""
        finally:
            sock.close()
        assert proc.wait(timeout=10) == 1


def test_handler_adapter_replaces_latency_simulation():
    # in-process use of the adapter hook: supply an inference callable
    import threading

    from pysut.server import StubConfig, serve

    results = {}
    ready = threading.Event()

    def run_server():
        def handler(indices, samples):
            return b"".join(samples[i][::-1] for i in indices)

        config = StubConfig(distribution="fixed", params=(0.0,), port=0)
        results["code"] = serve(config, handler=handler, ready=lambda hp: (results.update(addr=hp), ready.set()))

    thread = threading.Thread(target=run_server, daemon=True)
    thread.start()
    assert ready.wait(timeout=10)

    from rtbench.ipc import Bye, Complete, Hello, Issue, Load, encode_message, read_message

    host, port = results["addr"]
    sock = socket.create_connection((host, port), timeout=10)
    try:
        sock.sendall(encode_message(Hello()))
        read_message(sock)
        sock.sendall(encode_message(Load(0, b"abcd")))
        read_message(sock)
        sock.sendall(encode_message(Issue(9, (0,))))
        msg = read_message(sock)
        assert isinstance(msg, Complete) and msg.blob == b"dcba"
        sock.sendall(encode_message(Bye()))
        read_message(sock)
    finally:
        sock.close()
    thread.join(timeout=10)
    assert results["code"] == 0
