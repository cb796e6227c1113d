"""Per-node information-services daemon and its client side.

The ISD polls its node's archive root for active cases, broadcasts a case
list to its watchers every poll period (an empty list is still sent, as a
heartbeat), announces epoch-count growth between polls, and services epoch
requests. It also owns the node end of chat and remote annotations: both
are appended to the case's sidecar log so the narrative stays complete.

Request/reply protocol (all JSON payloads, sorted keys):

    EpochRequest  {"a", "b", "case", "hospital", "mod", "req"}
    reply meta    Announce {"type": "reply", "req", "status": "ok",
                            "a", "b", "count"}        (or status
                            "unknown-case" / "empty" and no data)
    reply data    `count` records as EpochData envelopes in index order,
                  `records_per_envelope` records each

Replies are enqueued atomically and links deliver in order, so a client can
attribute data envelopes to requests by counting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ..casestore import (
    ACTIVITY_WINDOW_MS, CaseArchive, CaseKey, MODALITY_SUFFIX, RootUnreadable,
    SUFFIX_MODALITY, scan_active,
)
from ..clock import SimClock
from ..wirerec import RECORD_SIZE, EpochRecord, decode_record, encode_record
from .envelope import Envelope, Kind
from .transport import Endpoint

ISD_POLL_PERIOD_MS = 5_000


class UnknownCase(Exception):
    pass


class EmptyRange(Exception):
    pass


def dumps(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


class InfoServiceDaemon:
    def __init__(self, node_id: str, archive_root: Path | str, endpoint: Endpoint,
                 clock: SimClock, *, watchers: tuple[str, ...] = (),
                 poll_period_ms: int = ISD_POLL_PERIOD_MS,
                 window_ms: int = ACTIVITY_WINDOW_MS,
                 expected_sweeps: dict[str, int] | None = None,
                 records_per_envelope: int = 1,
                 hospital: str = ""):
        self.node_id = node_id
        self.archive_root = Path(archive_root)
        self.endpoint = endpoint
        self.clock = clock
        self.watchers = tuple(watchers)
        self.poll_period_ms = poll_period_ms
        self.window_ms = window_ms
        self.expected_sweeps = dict(expected_sweeps or {})
        self.records_per_envelope = records_per_envelope
        self.hospital = hospital
        self.running = False
        self.chat_seen: list[dict] = []
        self._last_counts: dict[str, int] = {}
        self._timer = None

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> "InfoServiceDaemon":
        if self.running:
            return self
        self.running = True
        self.endpoint.attach()
        self.endpoint.on_envelope = self.on_envelope
        self.poll()
        return self

    def stop(self) -> None:
        self.running = False
        if self._timer is not None:
            self._timer.cancel()

    # -- polling ------------------------------------------------------------

    def poll(self) -> None:
        if not self.running:
            return
        health = "ok"
        try:
            active = scan_active(self.archive_root, self.clock.now_ms, self.window_ms)
        except RootUnreadable:
            active, health = [], "root-unreadable"
        cases = []
        counts: dict[str, int] = {}
        for entry in active:
            label = entry.key.label
            counts[label] = entry.record_count
            cases.append({
                "case": entry.key.case_id,
                "epochs": entry.record_count,
                "hospital": entry.key.hospital,
                "last_ms": entry.last_write_ms,
                "mod": MODALITY_SUFFIX[entry.key.modality],
                "sweeps_per_average": self.expected_sweeps.get(label, 1),
            })
        payload = dumps({"cases": cases, "health": health, "node": self.node_id,
                         "type": "caselist"})
        for watcher in self.watchers:
            self.endpoint.send(Kind.CASE_LIST, watcher, payload)
        for case in cases:
            label = f"{case['hospital']}_{case['case']}.{case['mod']}"
            if case["epochs"] > self._last_counts.get(label, 0):
                ann = dumps({**case, "node": self.node_id, "type": "announce"})
                for watcher in self.watchers:
                    self.endpoint.send(Kind.ANNOUNCE, watcher, ann)
        self._last_counts = counts
        self._timer = self.clock.schedule(self.poll_period_ms, self.poll)

    # -- inbound ------------------------------------------------------------

    def on_envelope(self, env: Envelope) -> None:
        if env.kind == Kind.EPOCH_REQUEST:
            self._serve_request(env)
        elif env.kind == Kind.CHAT:
            self._on_chat(env)
        elif env.kind == Kind.ANNOTATION:
            self._on_annotation(env)

    def _archive_for(self, body: dict) -> CaseArchive | None:
        try:
            key = CaseKey(body["hospital"], body["case"],
                          SUFFIX_MODALITY[body["mod"]])
        except KeyError:
            return None
        archive = CaseArchive(self.archive_root, key)
        if not archive.record_path.exists():
            return None
        return archive

    def _serve_request(self, env: Envelope) -> None:
        body = json.loads(env.payload)
        req = body.get("req", 0)
        archive = self._archive_for(body)
        if archive is None:
            self.endpoint.send(Kind.ANNOUNCE, env.source, dumps(
                {"req": req, "status": "unknown-case", "type": "reply"}))
            return
        n = archive.record_count()
        a, b = max(int(body["a"]), 0), min(int(body["b"]), n - 1)
        if n == 0 or a > b:
            self.endpoint.send(Kind.ANNOUNCE, env.source, dumps(
                {"req": req, "status": "empty", "type": "reply"}))
            return
        records = archive.read_range(a, b)
        self.endpoint.send(Kind.ANNOUNCE, env.source, dumps(
            {"a": a, "b": b, "count": len(records), "req": req,
             "status": "ok", "type": "reply"}))
        k = self.records_per_envelope
        for i in range(0, len(records), k):
            chunk = b"".join(encode_record(r) for r in records[i:i + k])
            self.endpoint.send(Kind.EPOCH_DATA, env.source, chunk)

    def _on_chat(self, env: Envelope) -> None:
        body = json.loads(env.payload)
        self.chat_seen.append(body)
        archive = self._archive_for(body)
        if archive is not None:
            archive.annotate(body["author"], body["text"], body["ts"])

    def _on_annotation(self, env: Envelope) -> None:
        body = json.loads(env.payload)
        archive = self._archive_for(body)
        if archive is not None:
            archive.annotate(body["author"], body["text"], body["ts"])

    # -- outbound chat (technologist side) -----------------------------------

    def send_chat(self, case_key: CaseKey, author: str, text: str) -> None:
        now = self.clock.now_ms
        archive = CaseArchive(self.archive_root, case_key)
        archive.annotate(author, text, now)
        payload = dumps({"author": author, "case": case_key.case_id,
                         "hospital": case_key.hospital,
                         "mod": MODALITY_SUFFIX[case_key.modality],
                         "text": text, "ts": now, "type": "chat"})
        for watcher in self.watchers:
            self.endpoint.send(Kind.CHAT, watcher, payload)


@dataclass
class _PendingRequest:
    req_id: int
    on_complete: Callable
    status: str | None = None
    expected: int | None = None
    actual_range: tuple[int, int] | None = None
    records: list = field(default_factory=list)


class EpochClient:
    """Session-side requester; relies on per-link in-order delivery."""

    def __init__(self, endpoint: Endpoint):
        self.endpoint = endpoint
        self._next_req = 1
        self._pending: dict[str, list[_PendingRequest]] = {}

    def request(self, dest: str, key: CaseKey, a: int, b: int,
                on_complete: Callable[[dict], None]) -> int:
        req_id = self._next_req
        self._next_req += 1
        pending = _PendingRequest(req_id, on_complete)
        self._pending.setdefault(dest, []).append(pending)
        self.endpoint.send(Kind.EPOCH_REQUEST, dest, dumps(
            {"a": a, "b": b, "case": key.case_id, "hospital": key.hospital,
             "mod": MODALITY_SUFFIX[key.modality], "req": req_id}))
        return req_id

    def on_reply(self, env: Envelope, body: dict) -> None:
        queue = self._pending.get(env.source, [])
        if not queue or queue[0].req_id != body.get("req"):
            return
        head = queue[0]
        head.status = body["status"]
        if head.status != "ok":
            queue.pop(0)
            head.on_complete({"status": head.status, "records": [], "range": None})
            return
        head.expected = body["count"]
        head.actual_range = (body["a"], body["b"])

    def on_epoch_data(self, env: Envelope) -> None:
        queue = self._pending.get(env.source, [])
        if not queue or queue[0].expected is None:
            return
        head = queue[0]
        for i in range(0, len(env.payload), RECORD_SIZE):
            head.records.append(decode_record(env.payload[i:i + RECORD_SIZE]))
        if len(head.records) >= head.expected:
            queue.pop(0)
            head.on_complete({"status": "ok", "records": head.records,
                              "range": head.actual_range})


def request_epochs(clock: SimClock, client: EpochClient, dest: str, key: CaseKey,
                   a: int, b: int, timeout_ms: int = 300_000) -> tuple[list[EpochRecord], tuple[int, int]]:
    """Synchronous facade over EpochClient for tests and the CLI."""
    result: dict = {}
    client.request(dest, key, a, b, result.update)
    deadline = clock.now_ms + timeout_ms
    while not result and clock.now_ms < deadline:
        clock.run_for(50)
    if not result:
        raise TimeoutError(f"no reply from {dest} within {timeout_ms} ms")
    if result["status"] == "unknown-case":
        raise UnknownCase(key.label)
    if result["status"] == "empty":
        raise EmptyRange(f"{key.label}[{a}..{b}]")
    return result["records"], result["range"]
