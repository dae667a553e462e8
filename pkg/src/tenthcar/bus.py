"""Topic-based publish/subscribe middleware.

In-process delivery goes through per-subscriber bounded queues that drop
the oldest entry when full; an optional UDP transport forwards every
published envelope to a set of peers, one datagram per envelope, and
injects received datagrams into the local subscriptions. Sequence
numbers give duplicate suppression and loss visibility without any
retransmission.

Wire frame (little-endian): magic ``XTMB`` | version u8 = 1 |
topic_len u8 | topic bytes | seq u64 | timestamp_ns u64 |
payload_len u32 | payload bytes.
"""
from __future__ import annotations

import socket
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass

MAGIC = b"XTMB"
WIRE_VERSION = 1
MAX_UDP_PAYLOAD = 60 * 1024
DEDUP_WINDOW = 64

_HEAD = struct.Struct("<4sBB")
_BODY = struct.Struct("<QQI")
_U64_MAX = 2**64 - 1


class BusError(Exception):
    pass


class TopicError(BusError):
    """Topic is empty, too long, contains NUL, or is not UTF-8."""


class PayloadTooLargeError(BusError):
    """Payload exceeds the UDP datagram budget."""


class FrameError(BusError):
    """Base for wire-frame decode failures."""


class BadMagicError(FrameError):
    pass


class BadVersionError(FrameError):
    pass


class TruncatedFrameError(FrameError):
    pass


class TopicNotUtf8Error(FrameError):
    pass


def _check_topic(topic: str) -> bytes:
    if not isinstance(topic, str) or not topic:
        raise TopicError("topic must be a nonempty string")
    if "\x00" in topic:
        raise TopicError("topic must not contain NUL")
    raw = topic.encode("utf-8")
    if len(raw) > 255:
        raise TopicError("topic longer than 255 bytes")
    return raw


@dataclass(frozen=True)
class Envelope:
    """One timestamped, sequence-numbered message on a topic."""

    topic: str
    seq: int
    timestamp_ns: int
    payload: bytes

    def __post_init__(self):
        _check_topic(self.topic)
        if not 0 <= self.seq <= _U64_MAX:
            raise ValueError("seq out of u64 range")
        if not 0 <= self.timestamp_ns <= _U64_MAX:
            raise ValueError("timestamp_ns out of u64 range")
        if not isinstance(self.payload, (bytes, bytearray)):
            raise TypeError("payload must be bytes")
        if isinstance(self.payload, bytearray):
            object.__setattr__(self, "payload", bytes(self.payload))


def encode_envelope(env: Envelope) -> bytes:
    raw_topic = _check_topic(env.topic)
    return b"".join(
        (
            _HEAD.pack(MAGIC, WIRE_VERSION, len(raw_topic)),
            raw_topic,
            _BODY.pack(env.seq, env.timestamp_ns, len(env.payload)),
            env.payload,
        )
    )


def decode_envelope(frame: bytes) -> Envelope:
    if len(frame) < _HEAD.size:
        raise TruncatedFrameError(f"frame shorter than fixed header: {len(frame)}")
    magic, version, topic_len = _HEAD.unpack_from(frame, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != WIRE_VERSION:
        raise BadVersionError(f"unsupported version {version}")
    body_off = _HEAD.size + topic_len
    if len(frame) < body_off + _BODY.size:
        raise TruncatedFrameError("frame ends inside header")
    try:
        topic = frame[_HEAD.size:body_off].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise TopicNotUtf8Error(str(exc)) from None
    seq, timestamp_ns, payload_len = _BODY.unpack_from(frame, body_off)
    end = body_off + _BODY.size + payload_len
    if len(frame) < end:
        raise TruncatedFrameError("frame ends inside payload")
    if len(frame) > end:
        raise FrameError(f"{len(frame) - end} trailing bytes after payload")
    payload = frame[body_off + _BODY.size:end]
    try:
        return Envelope(topic, seq, timestamp_ns, payload)
    except (TopicError, ValueError) as exc:
        raise FrameError(str(exc)) from None


class Subscription:
    """Bounded per-subscriber queue; oldest envelope dropped when full."""

    def __init__(self, topic: str, queue_depth: int, lock: threading.Lock):
        if queue_depth < 1:
            raise ValueError("queue_depth must be >= 1")
        _check_topic(topic)
        self.topic = topic
        self.queue_depth = queue_depth
        self._lock = lock
        self._queue: deque[Envelope] = deque()
        self.pushed = 0
        self.dropped = 0
        self.closed = False

    def _push(self, env: Envelope) -> None:
        # caller holds the bus lock
        if len(self._queue) >= self.queue_depth:
            self._queue.popleft()
            self.dropped += 1
        self._queue.append(env)
        self.pushed += 1

    def pop(self) -> Envelope | None:
        with self._lock:
            return self._queue.popleft() if self._queue else None

    def pop_all(self) -> list[Envelope]:
        with self._lock:
            out = list(self._queue)
            self._queue.clear()
            return out

    def __len__(self) -> int:
        with self._lock:
            return len(self._queue)


@dataclass(frozen=True)
class TransportConfig:
    mode: str = "in-process"
    bind_address: tuple[str, int] = ("127.0.0.1", 0)
    peer_addresses: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if self.mode not in ("in-process", "udp"):
            raise ValueError(f"unknown transport mode {self.mode!r}")
        if self.mode == "udp" and not self.peer_addresses:
            raise ValueError("udp mode requires at least one peer")
        object.__setattr__(
            self, "peer_addresses", tuple(tuple(p) for p in self.peer_addresses)
        )


class MessageBus:
    """Process-local hub: assigns per-topic sequence numbers, fans out to
    subscriptions and to any attached transports. Safe to publish from
    any thread."""

    def __init__(self, clock=time.time_ns):
        self._lock = threading.Lock()
        self._subs: dict[str, list[Subscription]] = {}
        self._next_seq: dict[str, int] = {}
        self._transports: list[UdpTransport] = []
        self._clock = clock
        self.published = 0

    def subscribe(self, topic: str, queue_depth: int = 16) -> Subscription:
        sub = Subscription(topic, queue_depth, self._lock)
        with self._lock:
            self._subs.setdefault(topic, []).append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            subs = self._subs.get(sub.topic, [])
            if sub in subs:
                subs.remove(sub)
            sub.closed = True

    def attach(self, transport: "UdpTransport") -> None:
        with self._lock:
            self._transports.append(transport)

    def publish(self, topic: str, payload: bytes, now: int | None = None) -> int:
        _check_topic(topic)
        if not isinstance(payload, (bytes, bytearray)):
            raise TypeError("payload must be bytes")
        with self._lock:
            transports = list(self._transports)
            if transports and len(payload) > MAX_UDP_PAYLOAD:
                raise PayloadTooLargeError(
                    f"{len(payload)} bytes exceeds {MAX_UDP_PAYLOAD}"
                )
            seq = self._next_seq.get(topic, 0)
            self._next_seq[topic] = seq + 1
            ts = self._clock() if now is None else int(now)
            env = Envelope(topic, seq, ts, bytes(payload))
            for sub in self._subs.get(topic, ()):
                sub._push(env)
            self.published += 1
        for tr in transports:
            tr.send(env)
        return seq

    def inject(self, env: Envelope) -> int:
        """Deliver an externally received envelope to local subscribers
        without re-sending it to transports; returns delivery count."""
        with self._lock:
            subs = self._subs.get(env.topic, ())
            for sub in subs:
                sub._push(env)
            return len(subs)

    def topic_published(self, topic: str) -> int:
        with self._lock:
            return self._next_seq.get(topic, 0)

    def topics(self) -> list[str]:
        with self._lock:
            return sorted(self._next_seq)


class _PeerTopicState:
    __slots__ = ("window", "members", "max_seq")

    def __init__(self):
        self.window: deque[int] = deque(maxlen=DEDUP_WINDOW)
        self.members: set[int] = set()
        self.max_seq: int | None = None

    def admit(self, seq: int) -> tuple[bool, int]:
        """Returns (accept, newly_detected_gap)."""
        if seq in self.members:
            return False, 0
        if len(self.window) == DEDUP_WINDOW:
            self.members.discard(self.window[0])
        self.window.append(seq)
        self.members.add(seq)
        gap = 0
        if self.max_seq is None:
            self.max_seq = seq
            gap = seq  # everything before the first seen seq was missed
        elif seq > self.max_seq:
            gap = seq - self.max_seq - 1
            self.max_seq = seq
        else:
            gap = -1  # late arrival fills a counted gap
        return True, gap


class UdpTransport:
    """One envelope per datagram to every peer; the receive side decodes,
    dedups on (peer, topic, seq) and counts sequence gaps as losses."""

    def __init__(self, bus: MessageBus, config: TransportConfig):
        if config.mode != "udp":
            raise ValueError("UdpTransport requires mode='udp'")
        self.bus = bus
        self.config = config
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 1 << 20)
        self.sock.bind(tuple(config.bind_address))
        self.local_address = self.sock.getsockname()
        self._states: dict[tuple, _PeerTopicState] = {}
        self._lock = threading.Lock()
        self._thread: threading.Thread | None = None
        self._running = False
        self.sent = 0
        self.received = 0
        self.duplicates = 0
        self.lost = 0
        self.decode_errors = 0

    def send(self, env: Envelope) -> None:
        if len(env.payload) > MAX_UDP_PAYLOAD:
            raise PayloadTooLargeError(
                f"{len(env.payload)} bytes exceeds {MAX_UDP_PAYLOAD}"
            )
        frame = encode_envelope(env)
        for peer in self.config.peer_addresses:
            self.sock.sendto(frame, peer)
        with self._lock:
            self.sent += 1

    def poll(self, timeout: float = 0.0) -> int:
        """Drain pending datagrams; returns how many were delivered."""
        self.sock.settimeout(timeout if timeout > 0 else 0.0)
        delivered = 0
        while True:
            try:
                frame, peer = self.sock.recvfrom(65535)
            except (BlockingIOError, socket.timeout, TimeoutError):
                return delivered
            except OSError:
                return delivered  # socket closed
            if self._handle(frame, peer):
                delivered += 1
            self.sock.settimeout(0.0)  # only the first recv waits

    def _handle(self, frame: bytes, peer) -> bool:
        try:
            env = decode_envelope(frame)
        except FrameError:
            with self._lock:
                self.decode_errors += 1
            return False
        with self._lock:
            state = self._states.setdefault((peer, env.topic), _PeerTopicState())
            accept, gap = state.admit(env.seq)
            if not accept:
                self.duplicates += 1
                return False
            self.received += 1
            self.lost = max(0, self.lost + gap)
        self.bus.inject(env)
        return True

    def start(self) -> "UdpTransport":
        if self._thread is not None:
            return self
        self._running = True
        self._thread = threading.Thread(target=self._rx_loop, daemon=True)
        self._thread.start()
        return self

    def _rx_loop(self):
        while self._running:
            try:
                self.poll(timeout=0.05)
            except OSError:
                break

    def close(self) -> None:
        self._running = False
        try:
            self.sock.close()
        except OSError:
            pass
        if self._thread is not None:
            self._thread.join(timeout=1.0)
            self._thread = None

    def loss_counters(self) -> dict:
        with self._lock:
            return {
                "sent": self.sent,
                "received": self.received,
                "duplicates": self.duplicates,
                "lost": self.lost,
                "decode_errors": self.decode_errors,
            }


def udp_pump(bus: MessageBus, config: TransportConfig) -> UdpTransport:
    """Bind, attach to the bus and start the receive loop."""
    transport = UdpTransport(bus, config)
    bus.attach(transport)
    return transport.start()
