"""Append-only message logs: a u32 length prefix before each wire-format
envelope, same codec as the UDP transport."""
from __future__ import annotations

import struct
import time
from pathlib import Path

from ..bus import Envelope, FrameError, MessageBus, decode_envelope, encode_envelope

_LEN = struct.Struct("<I")


class BagError(ValueError):
    pass


class Recorder:
    """Subscribes to the listed topics and appends every envelope seen;
    call drain() inside the owning loop and close() at the end."""

    def __init__(self, bus: MessageBus, topics, path):
        self.path = Path(path)
        self._subs = [bus.subscribe(t, queue_depth=4096) for t in topics]
        self._bus = bus
        self._file = open(self.path, "wb")
        self.count = 0

    def drain(self) -> int:
        n = 0
        for sub in self._subs:
            for env in sub.pop_all():
                frame = encode_envelope(env)
                self._file.write(_LEN.pack(len(frame)))
                self._file.write(frame)
                n += 1
        self.count += n
        return n

    def close(self) -> None:
        self.drain()
        for sub in self._subs:
            self._bus.unsubscribe(sub)
        self._file.close()


def record(bus: MessageBus, topics, path) -> Recorder:
    return Recorder(bus, topics, path)


def iterate_bag(path):
    """Yield envelopes in file order; raises BagError on a torn or
    undecodable record."""
    p = Path(path)
    data = p.read_bytes()
    off = 0
    idx = 0
    while off < len(data):
        if off + _LEN.size > len(data):
            raise BagError(f"{p}: torn length prefix at record {idx}")
        (length,) = _LEN.unpack_from(data, off)
        off += _LEN.size
        if off + length > len(data):
            raise BagError(f"{p}: torn frame at record {idx}")
        try:
            yield decode_envelope(data[off:off + length])
        except FrameError as exc:
            raise BagError(f"{p}: record {idx}: {exc}") from None
        off += length
        idx += 1


def replay(bus: MessageBus, path, speed: float = 1.0, sleep=time.sleep) -> int:
    """Republish a bag in order, preserving relative timestamps scaled by
    1/speed (speed <= 0 replays as fast as possible). Returns the count."""
    last_ts = None
    n = 0
    for env in iterate_bag(path):
        if last_ts is not None and speed > 0 and env.timestamp_ns > last_ts:
            sleep((env.timestamp_ns - last_ts) / 1e9 / speed)
        last_ts = env.timestamp_ns
        bus.publish(env.topic, env.payload, now=env.timestamp_ns)
        n += 1
    return n
