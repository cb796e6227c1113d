"""Reliable envelope delivery over the unreliable datagram substrate.

Each node runs one Endpoint: a single logical message loop owning all of
its transport state (the original design goal of one datagram descriptor
per process). Reliability is a windowed ARQ:

  * sender keeps up to `window` (16) unacked envelopes in flight per
    destination, retransmitting each on an ack timeout that starts at
    250 ms and doubles per attempt, up to 8 attempts, after which the
    delivery fails;
  * sequence numbers count 1, 2, 3, ... per (source, destination) link,
    so the receiver can dedupe by (source, sequence) and release envelopes
    to the application in exact send order;
  * three consecutive failed deliveries to a destination rotate the
    sender onto that destination's next alternate data port.

A hole left by an abandoned delivery would stall the receiver's in-order
release forever, so a receiver channel that has been blocked for longer
than the sender's whole retry span skips the missing sequence and moves on.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

from ..clock import SimClock, Timer
from .envelope import Envelope, EnvelopeError, Kind, decode_envelope, encode_envelope, node_hash
from .link import SimNet

ACK_TIMEOUT_MS = 250
MAX_ATTEMPTS = 8
SEND_WINDOW = 16
FAILOVER_AFTER = 3
HOLE_WAIT_MS = 130_000  # > 250 * (2**8 - 1), the full retry span


class Unroutable(Exception):
    pass


class DeliveryFailed(Exception):
    pass


@dataclass(frozen=True)
class NodeAddress:
    probe_port: int
    data_port: int
    alternate_data_ports: tuple[int, int]

    def __post_init__(self):
        ports = (self.probe_port, self.data_port, *self.alternate_data_ports)
        for p in ports:
            if p < 1024 or p > 65535:
                raise ValueError(f"port {p} outside the nonstandard range 1024..65535")
        if len(set(self.alternate_data_ports) | {self.data_port}) != 3:
            raise ValueError("alternate data ports must be distinct from the primary")

    @property
    def data_ports(self) -> tuple[int, int, int]:
        return (self.data_port, *self.alternate_data_ports)


class Registry:
    """The naming service: node id -> address, plus hash resolution."""

    def __init__(self):
        self._nodes: dict[str, NodeAddress] = {}
        self._by_hash: dict[int, str] = {}

    def add(self, node_id: str, address: NodeAddress) -> None:
        self._nodes[node_id] = address
        self._by_hash[node_hash(node_id)] = node_id

    def lookup(self, node_id: str) -> NodeAddress | None:
        return self._nodes.get(node_id)

    def resolve_hash(self, h: int) -> str | None:
        return self._by_hash.get(h)

    def node_ids(self) -> list[str]:
        return sorted(self._nodes)


class Delivery:
    """Tracks one reliable send until it is acked or abandoned."""

    __slots__ = ("envelope", "status", "attempts", "error", "completed_at_ms",
                 "_callbacks", "_timer")

    def __init__(self, envelope: Envelope):
        self.envelope = envelope
        self.status = "pending"
        self.attempts = 0
        self.error: str | None = None
        self.completed_at_ms: int | None = None
        self._callbacks: list[Callable[["Delivery"], None]] = []
        self._timer: Timer | None = None

    @property
    def done(self) -> bool:
        return self.status != "pending"

    def on_result(self, fn: Callable[["Delivery"], None]) -> None:
        if self.done:
            fn(self)
        else:
            self._callbacks.append(fn)

    def _resolve(self, status: str, now_ms: int, error: str | None = None) -> None:
        self.status = status
        self.error = error
        self.completed_at_ms = now_ms
        if self._timer is not None:
            self._timer.cancel()
            self._timer = None
        for fn in self._callbacks:
            fn(self)
        self._callbacks.clear()


@dataclass
class _SendChannel:
    dest: str
    next_seq: int = 1
    in_flight: dict = field(default_factory=dict)  # seq -> Delivery
    queue: list = field(default_factory=list)
    consecutive_failures: int = 0
    port_index: int = 0


@dataclass
class _RecvChannel:
    next_expected: int = 1
    pending: dict = field(default_factory=dict)  # seq -> Envelope
    blocked_since_ms: int | None = None


class Endpoint:
    def __init__(self, node_id: str, net: SimNet, clock: SimClock, registry: Registry, *,
                 ack_timeout_ms: int = ACK_TIMEOUT_MS, max_attempts: int = MAX_ATTEMPTS,
                 window: int = SEND_WINDOW, hole_wait_ms: int = HOLE_WAIT_MS):
        self.node_id = node_id
        self.net = net
        self.clock = clock
        self.registry = registry
        self.ack_timeout_ms = ack_timeout_ms
        self.max_attempts = max_attempts
        self.window = window
        self.hole_wait_ms = hole_wait_ms
        self._send: dict[str, _SendChannel] = {}
        self._recv: dict[str, _RecvChannel] = {}
        self.on_envelope: Callable[[Envelope], None] | None = None
        self.bytes_out = Counter()
        self.bytes_in = Counter()
        self.count_out = Counter()
        self.count_in = Counter()
        # post-dedupe application deliveries; the bandwidth ledger reads these
        self.bytes_delivered = Counter()
        self.count_delivered = Counter()
        self.failed_deliveries = 0
        self._attached = False

    # -- lifecycle -----------------------------------------------------------

    def attach(self) -> None:
        """Bind receive handlers on this node's data ports."""
        addr = self.registry.lookup(self.node_id)
        if addr is None:
            raise Unroutable(f"{self.node_id} is not in the registry")
        for port in addr.data_ports:
            self.net.attach(self.node_id, port, self._on_datagram)
        self._attached = True

    def detach(self) -> None:
        addr = self.registry.lookup(self.node_id)
        if addr is not None:
            for port in addr.data_ports:
                self.net.detach(self.node_id, port)
        self._attached = False

    # -- sending -------------------------------------------------------------

    def send(self, kind: Kind, destination: str, payload: bytes = b"") -> Delivery:
        if self.registry.lookup(destination) is None:
            raise Unroutable(f"unknown destination {destination!r}")
        ch = self._send.setdefault(destination, _SendChannel(destination))
        env = Envelope(kind=kind, source=self.node_id, destination=destination,
                       sequence=ch.next_seq, payload=payload)
        ch.next_seq += 1
        delivery = Delivery(env)
        ch.queue.append(delivery)
        self._pump(ch)
        return delivery

    def _pump(self, ch: _SendChannel) -> None:
        while ch.queue and len(ch.in_flight) < self.window:
            delivery = ch.queue.pop(0)
            ch.in_flight[delivery.envelope.sequence] = delivery
            self._transmit(ch, delivery)

    def _transmit(self, ch: _SendChannel, delivery: Delivery) -> None:
        delivery.attempts += 1
        port = self._port_for(ch)
        wire = encode_envelope(delivery.envelope)
        kind = delivery.envelope.kind
        self.bytes_out[kind] += len(wire)
        self.count_out[kind] += 1
        self.net.send(self.node_id, ch.dest, port, wire)
        timeout = self.ack_timeout_ms * (2 ** (delivery.attempts - 1))
        delivery._timer = self.clock.schedule(
            timeout, lambda: self._on_ack_timeout(ch, delivery))

    def _port_for(self, ch: _SendChannel) -> int:
        addr = self.registry.lookup(ch.dest)
        ports = addr.data_ports
        return ports[ch.port_index % len(ports)]

    def _on_ack_timeout(self, ch: _SendChannel, delivery: Delivery) -> None:
        if delivery.done:
            return
        if delivery.attempts >= self.max_attempts:
            ch.in_flight.pop(delivery.envelope.sequence, None)
            delivery._resolve("failed", self.clock.now_ms, "DeliveryFailed")
            self.failed_deliveries += 1
            ch.consecutive_failures += 1
            if ch.consecutive_failures >= FAILOVER_AFTER:
                ch.port_index += 1
                ch.consecutive_failures = 0
            self._pump(ch)
            return
        self._transmit(ch, delivery)

    # -- receiving -----------------------------------------------------------

    def _on_datagram(self, src_node: str, port: int, datagram: bytes) -> None:
        try:
            env = decode_envelope(datagram, self.registry.resolve_hash)
        except EnvelopeError:
            return  # corrupt datagrams are dropped like any other loss
        if env.destination != self.node_id:
            return
        self.bytes_in[env.kind] += len(datagram)
        self.count_in[env.kind] += 1
        if env.kind == Kind.ACK:
            self._on_ack(env)
            return
        self._ack(env)
        self._accept(env)

    def _ack(self, env: Envelope) -> None:
        addr = self.registry.lookup(env.source)
        if addr is None:
            return
        ack = Envelope(kind=Kind.ACK, source=self.node_id, destination=env.source,
                       sequence=env.sequence)
        wire = encode_envelope(ack)
        self.bytes_out[Kind.ACK] += len(wire)
        self.count_out[Kind.ACK] += 1
        self.net.send(self.node_id, env.source, addr.data_port, wire)

    def _on_ack(self, ack: Envelope) -> None:
        ch = self._send.get(ack.source)
        if ch is None:
            return
        delivery = ch.in_flight.pop(ack.sequence, None)
        if delivery is None or delivery.done:
            return
        delivery._resolve("delivered", self.clock.now_ms)
        ch.consecutive_failures = 0
        self._pump(ch)

    def _accept(self, env: Envelope) -> None:
        ch = self._recv.setdefault(env.source, _RecvChannel())
        if env.sequence < ch.next_expected or env.sequence in ch.pending:
            return  # duplicate; the ack above already went out again
        ch.pending[env.sequence] = env
        self._release(env.source, ch)

    def _release(self, source: str, ch: _RecvChannel) -> None:
        while ch.next_expected in ch.pending:
            env = ch.pending.pop(ch.next_expected)
            ch.next_expected += 1
            self.bytes_delivered[env.kind] += env.wire_size
            self.count_delivered[env.kind] += 1
            if self.on_envelope is not None:
                self.on_envelope(env)
        if ch.pending:
            if ch.blocked_since_ms is None:
                ch.blocked_since_ms = self.clock.now_ms
                self.clock.schedule(self.hole_wait_ms,
                                    lambda: self._check_hole(source, ch))
        else:
            ch.blocked_since_ms = None

    def _check_hole(self, source: str, ch: _RecvChannel) -> None:
        if ch.blocked_since_ms is None or not ch.pending:
            return
        if self.clock.now_ms - ch.blocked_since_ms >= self.hole_wait_ms:
            # the sender abandoned a sequence; skip it to unblock the link
            ch.next_expected = min(ch.pending)
            ch.blocked_since_ms = None
            self._release(source, ch)


def run_until_done(clock: SimClock, deliveries: list[Delivery],
                   limit_ms: int = 600_000) -> None:
    """Advance the clock until every delivery resolves (test helper)."""
    deadline = clock.now_ms + limit_ms
    while clock.now_ms < deadline and any(not d.done for d in deliveries):
        clock.run_for(50)
