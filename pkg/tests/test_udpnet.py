"""Real-socket smoke test: the same ARQ endpoint over loopback UDP."""

import time

from neurorelay.meshnet.envelope import Kind
from neurorelay.meshnet.transport import Endpoint, NodeAddress, Registry
from neurorelay.meshnet.udpnet import ProbeListener, UdpReactor, probe_host


def test_envelopes_over_loopback_udp():
    registry = Registry()
    registry.add("alpha", NodeAddress(49710, 49711, (49712, 49713)))
    registry.add("beta", NodeAddress(49720, 49721, (49722, 49723)))

    ra = UdpReactor(registry)
    rb = UdpReactor(registry)
    a = Endpoint("alpha", ra, ra, registry)
    b = Endpoint("beta", rb, rb, registry)
    received = []
    a.attach()
    b.attach()
    b.on_envelope = received.append
    ra.start()
    rb.start()
    try:
        deliveries = [a.send(Kind.CHAT, "beta", f"over-udp-{i}".encode())
                      for i in range(20)]
        deadline = time.time() + 10
        while time.time() < deadline and not all(d.done for d in deliveries):
            time.sleep(0.05)
        assert all(d.status == "delivered" for d in deliveries)
        assert [env.payload.decode() for env in received] == \
            [f"over-udp-{i}" for i in range(20)]
    finally:
        ra.stop()
        rb.stop()


def test_probe_listener_and_probe_host():
    listener = ProbeListener("127.0.0.1", 49730)
    try:
        assert probe_host("127.0.0.1", 49730, timeout_s=1.0) is True
    finally:
        listener.close()
    assert probe_host("127.0.0.1", 49731, timeout_s=0.3) is False
