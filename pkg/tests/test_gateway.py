"""Gateway protocol tests against a live WebSocket server."""

import asyncio
import json
import threading

import pytest
import websockets

from neurorelay.demo import demo_config
from neurorelay.gateway import Gateway
from neurorelay.orchestra import Orchestra


@pytest.fixture
def live_gateway(tmp_path):
    config = demo_config(seed=5)
    orch = Orchestra(config, tmp_path / "run").build()
    orch.start()
    orch.start_acquisition()
    frontend = tmp_path / "frontend"
    frontend.mkdir()
    (frontend / "index.html").write_text("<!doctype html><title>console</title>")
    gateway = Gateway(orch.session, orch.clock, host="127.0.0.1", port=0,
                      frontend_dir=frontend, speedup=2000.0,
                      snapshot_period_s=0.05)
    ready = threading.Event()
    loop_holder = {}

    def serve():
        loop = asyncio.new_event_loop()
        loop_holder["loop"] = loop
        asyncio.set_event_loop(loop)
        loop.run_until_complete(gateway.serve_async(ready))

    thread = threading.Thread(target=serve, daemon=True)
    thread.start()
    assert ready.wait(timeout=10)
    yield gateway
    gateway.stop()
    thread.join(timeout=5)
    orch.stop()


async def _recv_snapshot(ws, predicate=lambda snap: True, tries=200):
    for _ in range(tries):
        msg = json.loads(await ws.recv())
        if msg.get("t") == "snapshot" and predicate(msg):
            return msg
    raise AssertionError("no snapshot matching predicate")


def test_snapshot_control_roundtrip_and_errors(live_gateway):
    async def scenario():
        uri = f"ws://127.0.0.1:{live_gateway.bound_port}/ws"
        async with websockets.connect(uri) as ws:
            snap = await _recv_snapshot(ws, lambda s: len(s["windows"]) >= 1)
            assert snap["v"] == 1 and snap["mode"] == "full"
            slot = snap["windows"][0]["slot"]

            await ws.send(json.dumps({"t": "control",
                                      "line": f"win {slot} gain 1 2.5"}))
            snap = await _recv_snapshot(
                ws, lambda s: any(w["slot"] == slot and w["gains"][1] == 2.5
                                  for w in s["windows"]))
            assert any(w["gains"][1] == 2.5 for w in snap["windows"])

            # malformed input gets an error reply, not a disconnect
            await ws.send("this is not json")
            while True:
                msg = json.loads(await ws.recv())
                if msg["t"] == "error":
                    break
            await ws.send(json.dumps({"t": "bogus"}))
            while True:
                msg = json.loads(await ws.recv())
                if msg["t"] == "error":
                    assert "bogus" in msg["message"]
                    break
            # still alive
            await ws.send(json.dumps({"t": "mode"}))
            while True:
                msg = json.loads(await ws.recv())
                if msg["t"] == "mode":
                    assert msg["mode"] == "full"
                    break

    asyncio.run(asyncio.wait_for(scenario(), timeout=60))


def test_static_serving(live_gateway):
    import urllib.request
    with urllib.request.urlopen(
            f"http://127.0.0.1:{live_gateway.bound_port}/") as resp:
        body = resp.read().decode()
    assert "console" in body
    with pytest.raises(Exception):
        urllib.request.urlopen(
            f"http://127.0.0.1:{live_gateway.bound_port}/../etc/passwd")
