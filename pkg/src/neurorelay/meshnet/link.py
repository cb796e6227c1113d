"""In-process datagram substrate with a seeded loss/latency/duplication model.

SimNet stands in for real UDP sockets during tests and scripted scenarios:
datagrams between node endpoints pass through a LinkModel that can drop,
delay, duplicate, and reorder them, all driven by the simulated clock and a
single seeded RNG so every run is reproducible. Taps observe every datagram
that is handed to the network, which is how the deidentification and
bandwidth checks capture traffic.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable

from ..clock import SimClock


@dataclass(frozen=True)
class LinkModel:
    drop: float = 0.0
    latency_min_ms: int = 1
    latency_max_ms: int = 5
    duplicate: float = 0.0
    reorder: bool = True

    def __post_init__(self):
        if not 0.0 <= self.drop <= 1.0:
            raise ValueError("drop probability must be in [0, 1]")
        if not 0.0 <= self.duplicate <= 1.0:
            raise ValueError("duplication probability must be in [0, 1]")
        if self.latency_min_ms < 0 or self.latency_max_ms < self.latency_min_ms:
            raise ValueError("latency range is inverted")


Handler = Callable[[str, int, bytes], None]  # (src_node, port, datagram)
Tap = Callable[[str, str, int, bytes], None]  # (src, dst, port, datagram)


class SimNet:
    def __init__(self, clock: SimClock, seed: int = 0,
                 default_link: LinkModel = LinkModel()):
        self.clock = clock
        self.rng = random.Random(seed)
        self.default_link = default_link
        self._links: dict[tuple[str, str], LinkModel] = {}
        self._handlers: dict[tuple[str, int], Handler] = {}
        self._node_up: dict[str, bool] = {}
        self._blackholes: set[tuple[str, int]] = set()
        self._fifo_front: dict[tuple[str, str], int] = {}
        self.taps: list[Tap] = []

    # -- topology ----------------------------------------------------------

    def attach(self, node_id: str, port: int, handler: Handler) -> None:
        self._handlers[(node_id, port)] = handler
        self._node_up.setdefault(node_id, True)

    def detach(self, node_id: str, port: int) -> None:
        self._handlers.pop((node_id, port), None)

    def set_node_up(self, node_id: str, up: bool) -> None:
        self._node_up[node_id] = up

    def node_up(self, node_id: str) -> bool:
        return self._node_up.get(node_id, False)

    def set_link(self, src: str, dst: str, model: LinkModel) -> None:
        self._links[(src, dst)] = model

    def link_for(self, src: str, dst: str) -> LinkModel:
        return self._links.get((src, dst), self.default_link)

    def blackhole_port(self, node_id: str, port: int, on: bool = True) -> None:
        if on:
            self._blackholes.add((node_id, port))
        else:
            self._blackholes.discard((node_id, port))

    # -- datagrams ---------------------------------------------------------

    def send(self, src: str, dst: str, port: int, datagram: bytes) -> None:
        for tap in self.taps:
            tap(src, dst, port, datagram)
        model = self.link_for(src, dst)
        if self.rng.random() < model.drop:
            return
        copies = 1
        if model.duplicate and self.rng.random() < model.duplicate:
            copies = 2
        for _ in range(copies):
            self._deliver_later(src, dst, port, datagram, model)

    def _deliver_later(self, src: str, dst: str, port: int, datagram: bytes,
                       model: LinkModel) -> None:
        latency = self.rng.randint(model.latency_min_ms, model.latency_max_ms)
        at = self.clock.now_ms + latency
        if not model.reorder:
            key = (src, dst)
            at = max(at, self._fifo_front.get(key, at))
            self._fifo_front[key] = at
        self.clock.schedule_at(at, lambda: self._deliver(src, dst, port, datagram))

    def _deliver(self, src: str, dst: str, port: int, datagram: bytes) -> None:
        if not self._node_up.get(dst, False):
            return
        if (dst, port) in self._blackholes:
            return
        handler = self._handlers.get((dst, port))
        if handler is not None:
            handler(src, port, datagram)

    # -- connection probes ---------------------------------------------------

    def connect_probe(self, src: str, dst: str, port: int,
                      on_accept: Callable[[], None]) -> None:
        """SYN-style reachability check: on_accept fires after one link
        latency iff a live listener is attached; silence otherwise."""
        model = self.link_for(src, dst)
        reachable = (self._node_up.get(dst, False)
                     and (dst, port) in self._handlers
                     and (dst, port) not in self._blackholes)
        latency = self.rng.randint(model.latency_min_ms, model.latency_max_ms)
        if reachable:
            self.clock.schedule(2 * latency, on_accept)
