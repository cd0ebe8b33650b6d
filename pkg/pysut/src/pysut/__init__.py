"""Reference out-of-process system under test for the rtbench harness.

Speaks the length-prefixed binary protocol over a stream socket: a
configurable-latency stub for harness verification, plus an adapter hook
where a real inference callable can be plugged in. Lives in its own process
on purpose; the only contract with the harness is the wire format.
"""

from .server import StubConfig, serve

__version__ = "0.1.0"
