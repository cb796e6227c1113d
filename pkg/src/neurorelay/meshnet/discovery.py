"""Node discovery: connection probing and simulated remote activation.

A single prober polls every roster node's probe port on a fixed interval.
When a node answers, the activator "spawns" that node's information-services
daemon, which in the original deployment meant a remote shell starting
daemons on the newly booted machine and here means starting an in-process
task. Activation is idempotent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from ..clock import SimClock
from .link import SimNet

PROBE_INTERVAL_MS = 60_000
PROBE_TIMEOUT_MS = 500


class NodeDown(Exception):
    pass


def boot_node(net: SimNet, node_id: str, probe_port: int) -> None:
    """Put a node on the network: mark it up and listen on its probe port."""
    net.attach(node_id, probe_port, lambda src, port, data: None)
    net.set_node_up(node_id, True)


def probe_node(net: SimNet, clock: SimClock, prober_id: str, node_id: str,
               probe_port: int, on_result: Callable[[str], None],
               timeout_ms: int = PROBE_TIMEOUT_MS) -> None:
    """Issue one connection probe; reports "up" or "down" exactly once."""
    state = {"done": False}

    def resolve(result: str) -> None:
        if not state["done"]:
            state["done"] = True
            on_result(result)

    net.connect_probe(prober_id, node_id, probe_port, lambda: resolve("up"))
    clock.schedule(timeout_ms, lambda: resolve("down"))


@dataclass
class RosterEntry:
    node_id: str
    probe_port: int


class Activator:
    """Tracks running ISDs; `factory(node_id)` builds and starts one."""

    def __init__(self, factory: Callable[[str], object]):
        self.factory = factory
        self.handles: dict[str, object] = {}
        self.last_status: dict[str, str] = {}

    def activate(self, node_id: str):
        if self.last_status.get(node_id) != "up":
            raise NodeDown(f"{node_id} has not answered a probe")
        if node_id not in self.handles:
            self.handles[node_id] = self.factory(node_id)
        return self.handles[node_id]

    def deactivate(self, node_id: str) -> None:
        handle = self.handles.pop(node_id, None)
        if handle is not None and hasattr(handle, "stop"):
            handle.stop()


class Prober:
    def __init__(self, net: SimNet, clock: SimClock, prober_id: str,
                 roster: list[RosterEntry], activator: Activator, *,
                 probe_interval_ms: int = PROBE_INTERVAL_MS,
                 probe_timeout_ms: int = PROBE_TIMEOUT_MS):
        self.net = net
        self.clock = clock
        self.prober_id = prober_id
        self.roster = list(roster)
        self.activator = activator
        self.probe_interval_ms = probe_interval_ms
        self.probe_timeout_ms = probe_timeout_ms
        self.running = False
        self.status_log: list[tuple[int, str, str]] = []
        self._timer = None

    def start(self) -> "Prober":
        self.running = True
        self.poll()
        return self

    def stop(self) -> None:
        self.running = False
        if self._timer is not None:
            self._timer.cancel()

    def poll(self) -> None:
        if not self.running:
            return
        for entry in self.roster:
            probe_node(self.net, self.clock, self.prober_id, entry.node_id,
                       entry.probe_port, self._result_handler(entry.node_id),
                       timeout_ms=self.probe_timeout_ms)
        self._timer = self.clock.schedule(self.probe_interval_ms, self.poll)

    def _result_handler(self, node_id: str) -> Callable[[str], None]:
        def handle(result: str) -> None:
            self.activator.last_status[node_id] = result
            self.status_log.append((self.clock.now_ms, node_id, result))
            if result == "up" and node_id not in self.activator.handles:
                self.activator.activate(node_id)
        return handle
