"""Real-socket substrate: the same endpoint logic over UDP datagrams.

A UdpReactor plays both roles the simulator splits between SimClock and
SimNet: it is a clock (monotonic milliseconds, timer heap) and a datagram
network (one UDP socket per bound port, a select loop thread). Everything
above the substrate -- envelopes, ARQ, ISD, session -- is identical in both
modes; only tests and scripted scenarios insist on the simulator.

Reachability probes in this mode are plain TCP connection attempts against
the node's probe port, served by a trivial accept-and-close listener.
"""

from __future__ import annotations

import heapq
import itertools
import selectors
import socket
import threading
import time
from typing import Callable

from ..clock import Timer
from .transport import Registry


class UdpReactor:
    def __init__(self, registry: Registry, bind_host: str = "127.0.0.1"):
        self.registry = registry
        self.bind_host = bind_host
        self._selector = selectors.DefaultSelector()
        self._sockets: dict[tuple[str, int], socket.socket] = {}
        self._handlers: dict[int, Callable[[str, int, bytes], None]] = {}
        self._heap: list[tuple[int, int, Timer]] = []
        self._seq = itertools.count()
        self._t0 = time.monotonic()
        self._lock = threading.RLock()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._wake_r, self._wake_w = socket.socketpair()
        self._wake_r.setblocking(False)
        self._selector.register(self._wake_r, selectors.EVENT_READ, None)

    # -- clock interface -------------------------------------------------------

    @property
    def now_ms(self) -> int:
        return int((time.monotonic() - self._t0) * 1000)

    def schedule(self, delay_ms: int, fn: Callable[[], None]) -> Timer:
        timer = Timer(self.now_ms + int(delay_ms), fn)
        with self._lock:
            heapq.heappush(self._heap, (timer.at_ms, next(self._seq), timer))
        self._wake_w.send(b"\x00")
        return timer

    def schedule_at(self, at_ms: int, fn: Callable[[], None]) -> Timer:
        return self.schedule(max(0, at_ms - self.now_ms), fn)

    # -- network interface --------------------------------------------------------

    def attach(self, node_id: str, port: int, handler) -> None:
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((self.bind_host, port))
        sock.setblocking(False)
        with self._lock:
            self._sockets[(node_id, port)] = sock
            self._handlers[port] = handler
        self._selector.register(sock, selectors.EVENT_READ, port)

    def detach(self, node_id: str, port: int) -> None:
        with self._lock:
            sock = self._sockets.pop((node_id, port), None)
            self._handlers.pop(port, None)
        if sock is not None:
            self._selector.unregister(sock)
            sock.close()

    def send(self, src: str, dst: str, port: int, datagram: bytes) -> None:
        addr = self.registry.lookup(dst)
        if addr is None:
            return
        host = getattr(addr, "host", None) or self.bind_host
        with self._lock:
            sock = next(iter(self._sockets.values()), None)
        if sock is not None:
            try:
                sock.sendto(datagram, (host, port))
            except OSError:
                pass

    # -- loop ------------------------------------------------------------------------

    def start(self) -> "UdpReactor":
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        self._wake_w.send(b"\x00")
        if self._thread is not None:
            self._thread.join(timeout=2)

    def _due_timers(self) -> list[Timer]:
        due = []
        with self._lock:
            while self._heap and self._heap[0][0] <= self.now_ms:
                _, _, timer = heapq.heappop(self._heap)
                if not timer.cancelled:
                    due.append(timer)
        return due

    def _run(self) -> None:
        while not self._stop.is_set():
            for timer in self._due_timers():
                timer.fn()
            with self._lock:
                timeout = None
                if self._heap:
                    timeout = max(0.0, (self._heap[0][0] - self.now_ms) / 1000.0)
            for key, _ in self._selector.select(timeout=0.05 if timeout is None
                                                else min(timeout, 0.05)):
                if key.data is None:
                    try:
                        self._wake_r.recv(4096)
                    except BlockingIOError:
                        pass
                    continue
                port = key.data
                try:
                    datagram, _addr = key.fileobj.recvfrom(65536)
                except OSError:
                    continue
                handler = self._handlers.get(port)
                if handler is not None:
                    handler("", port, datagram)


class ProbeListener:
    """Accept-and-close TCP listener standing in for a hardened shell port."""

    def __init__(self, host: str, port: int):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.sock.bind((host, port))
        self.sock.listen(4)
        self.sock.settimeout(0.2)
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def _run(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self.sock.accept()
                conn.close()
            except socket.timeout:
                continue
            except OSError:
                return

    def close(self) -> None:
        self._stop.set()
        self._thread.join(timeout=1)
        self.sock.close()


def probe_host(host: str, port: int, timeout_s: float = 0.5) -> bool:
    """Real-mode reachability check: a plain connect attempt."""
    try:
        with socket.create_connection((host, port), timeout=timeout_s):
            return True
    except OSError:
        return False
