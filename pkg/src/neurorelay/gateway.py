"""Live console gateway: WebSocket snapshots plus static file serving.

Serves the browser console a versioned line-delimited JSON protocol:

  server -> client
    {"t":"snapshot","v":1,"now_ms",...,"mode","windows":[...],"alerts":[...],
     "chat":[...],"notices":[...]}              every snapshot period
    {"t":"frame","v":1,"data":"<base64 NNF1>"}  capture mode only
    {"t":"error","message":...}                 for malformed/refused input

  client -> server
    {"t":"control","line":"win 0 gain 1 2.0"}   maps 1:1 onto session controls
    {"t":"chat","slot":0,"text":"..."}
    {"t":"ack","id":3}
    {"t":"mode"}

Malformed messages get an error reply, never a disconnect. The simulation
advances on a pacing thread; the gateway and that thread share one lock, so
the session is only ever touched by one of them at a time.
"""

from __future__ import annotations

import asyncio
import base64
import http
import json
import logging
import threading
import time
from pathlib import Path

import numpy as np
from websockets.asyncio.server import serve
from websockets.datastructures import Headers
from websockets.http11 import Response

from .oversight.session import Session, SessionMode
from .oversight.view import build_view

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
TRACE_POINTS = 128
CONTENT_TYPES = {".html": "text/html; charset=utf-8",
                 ".js": "text/javascript; charset=utf-8",
                 ".css": "text/css; charset=utf-8",
                 ".map": "application/json",
                 ".png": "image/png"}


def _downsample(row: np.ndarray, limit: int = TRACE_POINTS) -> list[float]:
    if row.size <= limit:
        return [round(float(v), 4) for v in row]
    idx = np.linspace(0, row.size - 1, limit).round().astype(int)
    return [round(float(v), 4) for v in row[idx]]


def snapshot(session: Session, now_ms: int) -> dict:
    windows = []
    for slot, win in sorted(session.windows.items()):
        entry = {
            "slot": slot, "label": win.label, "epochs": len(win.records),
            "gains": [float(g) for g in win.gains],
            "smooth": win.smooth, "basecorr": win.basecorr,
            "baselines": list(win.baselines),
            "range": list(win.range_mode) if win.range_mode else None,
            "traces": [],
        }
        if win.records:
            view = build_view(win, win.records)
            for trace in view.traces:
                entry["traces"].append({
                    "epoch": trace.epoch_index,
                    "baseline": trace.is_baseline,
                    "ts": trace.timestamp_ms,
                    "channels": [_downsample(trace.samples[c])
                                 for c in range(trace.samples.shape[0])],
                })
        windows.append(entry)
    alerts = [{
        "id": ev.alert_id, "kind": ev.kind, "case": ev.case_label,
        "channel": ev.channel, "magnitude": round(ev.magnitude, 4),
        "epoch": ev.epoch_index, "reference": ev.reference,
        "ack": ev.acknowledged, "ts": ev.timestamp_ms,
    } for ev in session.alerts]
    return {
        "t": "snapshot", "v": PROTOCOL_VERSION, "now_ms": now_ms,
        "mode": session.mode.value, "windows": windows, "alerts": alerts,
        "chat": session.chat_log[-50:], "notices": session.notices[-10:],
    }


class Gateway:
    def __init__(self, session: Session, clock, *, host: str = "127.0.0.1",
                 port: int = 8765, frontend_dir: Path | str | None = None,
                 speedup: float = 1.0, snapshot_period_s: float = 0.4):
        self.session = session
        self.clock = clock
        self.host = host
        self.port = port
        self.frontend_dir = Path(frontend_dir) if frontend_dir else None
        self.speedup = speedup
        self.snapshot_period_s = snapshot_period_s
        self.lock = threading.Lock()
        self._stop = threading.Event()
        self._pacer: threading.Thread | None = None
        self.bound_port: int | None = None

    # -- simulation pacing ------------------------------------------------------

    def _pace(self) -> None:
        wall0 = time.monotonic()
        sim0 = self.clock.now_ms
        while not self._stop.is_set():
            target = sim0 + int((time.monotonic() - wall0) * 1000 * self.speedup)
            with self.lock:
                self.clock.run_until(target)
            time.sleep(0.02)

    # -- request handling ----------------------------------------------------------

    def _static(self, connection, request):
        path = request.path.split("?")[0]
        if "Upgrade" in request.headers.get("Connection", "") or path == "/ws":
            return None  # proceed with the websocket handshake
        if self.frontend_dir is None:
            return Response(http.HTTPStatus.NOT_FOUND, "not found", Headers(), b"")
        rel = "index.html" if path in ("", "/") else path.lstrip("/")
        target = (self.frontend_dir / rel).resolve()
        if not str(target).startswith(str(self.frontend_dir.resolve())) \
                or not target.is_file():
            return Response(http.HTTPStatus.NOT_FOUND, "not found", Headers(), b"")
        body = target.read_bytes()
        headers = Headers()
        headers["Content-Type"] = CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        headers["Content-Length"] = str(len(body))
        return Response(http.HTTPStatus.OK, "ok", headers, body)

    async def _client(self, websocket) -> None:
        async def sender():
            while True:
                with self.lock:
                    snap = snapshot(self.session, self.clock.now_ms)
                    frame = self.session.last_frame
                await websocket.send(json.dumps(snap, sort_keys=True))
                if frame is not None and self.session.mode == SessionMode.SCREEN_CAPTURE:
                    await websocket.send(json.dumps({
                        "t": "frame", "v": PROTOCOL_VERSION,
                        "ts": frame.timestamp_ms,
                        "data": base64.b64encode(frame.to_bytes()).decode("ascii")}))
                await asyncio.sleep(self.snapshot_period_s)

        send_task = asyncio.create_task(sender())
        try:
            async for raw in websocket:
                reply = self._handle(raw)
                if reply is not None:
                    await websocket.send(json.dumps(reply, sort_keys=True))
        finally:
            send_task.cancel()

    def _handle(self, raw) -> dict | None:
        try:
            msg = json.loads(raw)
            kind = msg["t"]
        except (json.JSONDecodeError, TypeError, KeyError) as exc:
            return {"t": "error", "message": f"malformed message: {exc}"}
        try:
            with self.lock:
                if kind == "control":
                    self.session.handle_command_line(msg["line"], origin="viewer")
                    return {"t": "ok", "for": "control"}
                if kind == "chat":
                    self.session.chat(int(msg["slot"]), msg["text"])
                    return {"t": "ok", "for": "chat"}
                if kind == "ack":
                    found = self.session.ack_alert(int(msg["id"]))
                    return {"t": "ok" if found else "error",
                            "for": "ack", "message": None if found else "no such alert"}
                if kind == "mode":
                    return {"t": "mode", "mode": self.session.mode.value}
            return {"t": "error", "message": f"unknown message type {kind!r}"}
        except Exception as exc:  # surfaced to the client, never a disconnect
            return {"t": "error", "message": str(exc)}

    # -- lifecycle ---------------------------------------------------------------------

    async def serve_async(self, ready: threading.Event | None = None) -> None:
        self._pacer = threading.Thread(target=self._pace, daemon=True)
        self._pacer.start()
        async with serve(self._client, self.host, self.port,
                         process_request=self._static) as server:
            self.bound_port = server.sockets[0].getsockname()[1] if hasattr(
                server, "sockets") else self.port
            if ready is not None:
                ready.set()
            while not self._stop.is_set():
                await asyncio.sleep(0.1)

    def serve_forever(self) -> None:
        try:
            asyncio.run(self.serve_async())
        except KeyboardInterrupt:
            pass
        finally:
            self._stop.set()

    def stop(self) -> None:
        self._stop.set()
