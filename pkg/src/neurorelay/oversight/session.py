"""The remote neurophysiologist's session.

One event loop consumes case-list/announce envelopes, epoch data, chat, and
clock ticks; it owns all window state. Windows auto-spawn for newly active
cases into the lowest free slot of a 4 x 4 grid, auto-follow their archive,
and are killed when a case goes idle (absent from its node's case list or
locally inactive past the window). Bound cases are fetched through the
epoch client, each new epoch runs the change comparator, and every alert
and chat message is mirrored into the case's annotation log on the owning
node so the narrative stays complete.

Two modes:

* full control: controls (gain, range, enhancement, baselines, kill) apply
  locally, never generating traffic toward the acquisition nodes;
* screen capture: the session sits OR-side, rasterizes its composite view
  every capture interval, and broadcasts frames to registered viewers
  (at most 9 registered, 4 attached); viewer controls are refused.
"""

from __future__ import annotations

import base64
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .. import scribe
from ..casestore import CaseKey, MODALITY_SUFFIX, SUFFIX_MODALITY
from ..clock import SimClock
from ..meshnet.envelope import Envelope, Kind
from ..meshnet.isd import EpochClient, dumps
from ..meshnet.transport import Endpoint
from ..wirerec import CONTINUOUS_MODALITIES, RECORD_SIZE, EpochRecord, decode_record
from .alerts import AlertEvent, Thresholds, detect_change
from .view import WaterfallView, build_view

log = logging.getLogger(__name__)

MAX_WINDOWS = 16
MAX_REGISTERED_VIEWERS = 9
MAX_ATTACHED_VIEWERS = 4
CAPTURE_INTERVAL_MS = 15_000
IDLE_WINDOW_MS = 60 * 60 * 1000
MAX_CHAT_BYTES = 4096


class SessionMode(Enum):
    FULL_CONTROL = "full"
    SCREEN_CAPTURE = "capture"


class UnknownWindow(Exception):
    pass


class BadGain(Exception):
    pass


class ModeForbidsControl(Exception):
    pass


class ViewerLimitExceeded(Exception):
    pass


class TextTooLong(Exception):
    pass


class CommandParseError(Exception):
    pass


@dataclass
class WindowState:
    slot: int
    node_id: str
    key: CaseKey
    expected_sweeps: int = 1
    range_mode: tuple[int, int] | None = None  # None = auto-follow
    gains: list = field(default_factory=lambda: [1.0] * 8)
    smooth: bool = False
    basecorr: bool = False
    baselines: tuple[int, int] = (0, 1)
    last_activity_ms: int = 0
    records: list = field(default_factory=list)
    partial: EpochRecord | None = None
    announced_epochs: int = 0
    fetching: bool = False

    @property
    def label(self) -> str:
        return f"{self.node_id}:{self.key.label}"


@dataclass(frozen=True)
class Command:
    slot: int
    action: str  # gain | range | follow | enh | baselines | kill
    args: tuple


def parse_command(line: str) -> Command:
    """Grammar: win <id> gain <ch> <x> | win <id> range <a> <b> |
    win <id> follow | win <id> enh <smooth|basecorr> <on|off> |
    win <id> baselines <i> <j> | win <id> kill"""
    parts = line.split()
    try:
        if parts[0] != "win":
            raise CommandParseError(f"expected 'win', got {parts[0]!r}")
        slot = int(parts[1])
        action = parts[2]
        if action == "gain":
            return Command(slot, "gain", (int(parts[3]), float(parts[4])))
        if action == "range":
            return Command(slot, "range", (int(parts[3]), int(parts[4])))
        if action == "follow":
            return Command(slot, "follow", ())
        if action == "enh":
            if parts[3] not in ("smooth", "basecorr") or parts[4] not in ("on", "off"):
                raise CommandParseError(f"bad enh command: {line!r}")
            return Command(slot, "enh", (parts[3], parts[4] == "on"))
        if action == "baselines":
            return Command(slot, "baselines", (int(parts[3]), int(parts[4])))
        if action == "kill":
            return Command(slot, "kill", ())
        raise CommandParseError(f"unknown action {action!r}")
    except CommandParseError:
        raise
    except (IndexError, ValueError) as exc:
        raise CommandParseError(f"cannot parse {line!r}: {exc}") from None


class Session:
    def __init__(self, node_id: str, endpoint: Endpoint, clock: SimClock, *,
                 mode: SessionMode = SessionMode.FULL_CONTROL,
                 thresholds: Thresholds = Thresholds(),
                 idle_window_ms: int = IDLE_WINDOW_MS,
                 capture_interval_ms: int = CAPTURE_INTERVAL_MS,
                 tick_ms: int = 1000,
                 command_file: Path | str | None = None,
                 alert_log_path: Path | str | None = None,
                 chat_log_path: Path | str | None = None,
                 or_view_provider=None,
                 author: str = "neurophysiologist"):
        self.node_id = node_id
        self.endpoint = endpoint
        self.clock = clock
        self.mode = mode
        self.thresholds = thresholds
        self.idle_window_ms = idle_window_ms
        self.capture_interval_ms = capture_interval_ms
        self.tick_ms = tick_ms
        self.command_file = Path(command_file) if command_file else None
        self.alert_log_path = Path(alert_log_path) if alert_log_path else None
        self.chat_log_path = Path(chat_log_path) if chat_log_path else None
        self.or_view_provider = or_view_provider
        self.author = author

        self.client = EpochClient(endpoint)
        self.windows: dict[int, WindowState] = {}
        self.pending_bindings: list[tuple[str, CaseKey, int]] = []
        self.notices: list[str] = []
        self.alerts: list[AlertEvent] = []
        self.chat_log: list[dict] = []
        self.registered_viewers: list[str] = []
        self.attached_viewers: list[str] = []
        self.frames_rendered = 0
        self.last_frame: scribe.RasterFrame | None = None
        self.skipped_commands: list[str] = []
        self.running = False
        self._alert_seq = 1
        self._timers = []

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> "Session":
        self.running = True
        self.endpoint.attach()
        self.endpoint.on_envelope = self.on_envelope
        self._timers.append(self.clock.schedule(self.tick_ms, self._tick))
        if self.mode == SessionMode.SCREEN_CAPTURE:
            self._timers.append(
                self.clock.schedule(self.capture_interval_ms, self._capture_tick))
        return self

    def stop(self) -> None:
        self.running = False
        for t in self._timers:
            t.cancel()

    # -- envelope dispatch ----------------------------------------------------

    def on_envelope(self, env: Envelope) -> None:
        if env.kind == Kind.CASE_LIST:
            self._on_caselist(json.loads(env.payload))
        elif env.kind == Kind.ANNOUNCE:
            body = json.loads(env.payload)
            kind = body.get("type")
            if kind == "reply":
                self.client.on_reply(env, body)
            elif kind == "announce":
                self._on_announce(env.source, body)
            elif kind == "partial":
                self._on_partial(env.source, body)
        elif env.kind == Kind.EPOCH_DATA:
            self.client.on_epoch_data(env)
        elif env.kind == Kind.CHAT:
            body = json.loads(env.payload)
            self.chat_log.append(body)
            self._write_chat_line(body)

    # -- announcements and window lifecycle -----------------------------------

    def _key_of(self, body: dict) -> CaseKey:
        return CaseKey(body["hospital"], body["case"], SUFFIX_MODALITY[body["mod"]])

    def _window_for(self, node_id: str, key: CaseKey) -> WindowState | None:
        for win in self.windows.values():
            if win.node_id == node_id and win.key == key:
                return win
        return None

    def _on_caselist(self, body: dict) -> None:
        node = body["node"]
        listed = set()
        for case in body["cases"]:
            key = self._key_of(case)
            listed.add(key)
            self._ensure_window(node, key, case)
        # a bound case missing from its node's list has gone idle upstream
        for slot in sorted(self.windows):
            win = self.windows[slot]
            if win.node_id == node and win.key not in listed:
                self.kill_window(slot, reason="idle upstream")

    def _on_announce(self, node: str, body: dict) -> None:
        self._ensure_window(node, self._key_of(body), body)

    def _ensure_window(self, node: str, key: CaseKey, case_body: dict) -> None:
        win = self._window_for(node, key)
        if win is None:
            if any(b[0] == node and b[1] == key for b in self.pending_bindings):
                return
            expected = int(case_body.get("sweeps_per_average", 1))
            if len(self.windows) >= MAX_WINDOWS:
                self.pending_bindings.append((node, key, expected))
                self.notices.append(f"window grid full; queued {key.label}")
                return
            win = self._spawn(node, key, expected)
        win.announced_epochs = max(win.announced_epochs, int(case_body.get("epochs", 0)))
        self._maybe_fetch(win)

    def _spawn(self, node: str, key: CaseKey, expected_sweeps: int) -> WindowState:
        slot = min(set(range(MAX_WINDOWS)) - set(self.windows))
        win = WindowState(slot=slot, node_id=node, key=key,
                          expected_sweeps=expected_sweeps,
                          last_activity_ms=self.clock.now_ms)
        self.windows[slot] = win
        return win

    def kill_window(self, slot: int, reason: str = "") -> None:
        win = self.windows.pop(slot, None)
        if win is None:
            raise UnknownWindow(f"no window {slot}")
        log.info("killed window %d (%s) %s", slot, win.label, reason)
        while self.pending_bindings and len(self.windows) < MAX_WINDOWS:
            node, key, expected = self.pending_bindings.pop(0)
            replacement = self._spawn(node, key, expected)
            replacement.announced_epochs = 0
            self._maybe_fetch(replacement)

    # -- epoch data -------------------------------------------------------------

    def _maybe_fetch(self, win: WindowState) -> None:
        if win.fetching or win.announced_epochs <= len(win.records):
            return
        win.fetching = True
        lo, hi = len(win.records), win.announced_epochs - 1
        self.client.request(win.node_id, win.key, lo, hi,
                            lambda result: self._on_fetch(win, result))

    def _on_fetch(self, win: WindowState, result: dict) -> None:
        win.fetching = False
        if result["status"] != "ok" or self.windows.get(win.slot) is not win:
            return
        for rec in result["records"]:
            win.records.append(rec)
            idx = len(win.records) - 1
            win.last_activity_ms = self.clock.now_ms
            self._detect(win, idx)
        self._maybe_fetch(win)

    def _detect(self, win: WindowState, idx: int) -> None:
        # the threshold comparator is for averaged evoked responses;
        # continuous EEG/EMG chunks are raw noise and belong to the OR reader
        if win.key.modality in CONTINUOUS_MODALITIES:
            return
        if idx < 1:
            return
        base_idx = win.baselines[0] if win.baselines[0] < idx else idx - 1
        events = detect_change(
            win.records[idx], win.records[idx - 1], win.records[base_idx],
            self.thresholds, epoch_index=idx, preceding_index=idx - 1,
            baseline_index=base_idx)
        for ev in events:
            ev.case_label = win.key.label
            ev.alert_id = self._alert_seq
            self._alert_seq += 1
            self.alerts.append(ev)
            self._write_alert_line(ev)
            # mirror into the case narrative on the owning node, exactly once
            self.endpoint.send(Kind.ANNOTATION, win.node_id, dumps({
                "author": self.author, "case": win.key.case_id,
                "hospital": win.key.hospital,
                "mod": MODALITY_SUFFIX[win.key.modality],
                "text": f"alert: {ev.kind} ch{ev.channel} "
                        f"x{ev.magnitude:.2f} epoch {ev.epoch_index} vs {ev.reference}",
                "ts": ev.timestamp_ms, "type": "annotation"}))

    def _on_partial(self, node: str, body: dict) -> None:
        win = self._window_for(node, self._key_of(body))
        if win is None:
            return
        rec = decode_record(base64.b64decode(body["record"]))
        if rec.sweep_count < win.expected_sweeps:
            win.partial = rec
            win.last_activity_ms = self.clock.now_ms

    # -- views -----------------------------------------------------------------

    def view(self, slot: int) -> WaterfallView:
        win = self.windows.get(slot)
        if win is None:
            raise UnknownWindow(f"no window {slot}")
        return build_view(win, win.records)

    def composite_views(self) -> dict[int, tuple[str, WaterfallView | None]]:
        out = {}
        for slot, win in sorted(self.windows.items()):
            try:
                out[slot] = (win.label, build_view(win, win.records))
            except Exception:
                out[slot] = (win.label, None)
        return out

    # -- controls ----------------------------------------------------------------

    def apply_control(self, cmd: Command, origin: str = "viewer") -> None:
        """Viewer-side control. In full-control mode this touches only local
        window state; in capture mode remote viewers are refused."""
        if self.mode == SessionMode.SCREEN_CAPTURE and origin == "viewer":
            raise ModeForbidsControl("capture-mode viewers cannot control the display")
        win = self.windows.get(cmd.slot)
        if win is None:
            raise UnknownWindow(f"no window {cmd.slot}")
        if cmd.action == "gain":
            ch, value = cmd.args
            if value <= 0:
                raise BadGain(f"gain must be > 0, got {value}")
            if not 0 <= ch < 8:
                raise BadGain(f"channel {ch} out of range")
            win.gains[ch] = value
        elif cmd.action == "range":
            win.range_mode = (cmd.args[0], cmd.args[1])
        elif cmd.action == "follow":
            win.range_mode = None
        elif cmd.action == "enh":
            name, on = cmd.args
            setattr(win, "smooth" if name == "smooth" else "basecorr", on)
        elif cmd.action == "baselines":
            win.baselines = (cmd.args[0], cmd.args[1])
        elif cmd.action == "kill":
            self.kill_window(cmd.slot, reason="operator kill")
        else:
            raise CommandParseError(f"unknown action {cmd.action!r}")

    def handle_command_line(self, line: str, origin: str = "viewer") -> None:
        self.apply_control(parse_command(line), origin=origin)

    # -- command file -------------------------------------------------------------

    def poll_command_file(self) -> int:
        """Execute and delete the scratch command file; returns commands run."""
        if self.command_file is None or not self.command_file.exists():
            return 0
        executed = 0
        for line in self.command_file.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            try:
                self.handle_command_line(line, origin="viewer")
                executed += 1
            except Exception as exc:
                self.skipped_commands.append(line)
                log.warning("skipped command %r: %s", line, exc)
        self.command_file.unlink()
        return executed

    # -- chat -----------------------------------------------------------------------

    def chat(self, slot: int, text: str) -> None:
        if len(text.encode("utf-8")) > MAX_CHAT_BYTES:
            raise TextTooLong(f"chat text > {MAX_CHAT_BYTES} bytes")
        win = self.windows.get(slot)
        if win is None:
            raise UnknownWindow(f"no window {slot}")
        entry = {"author": self.author, "case": win.key.case_id,
                 "hospital": win.key.hospital,
                 "mod": MODALITY_SUFFIX[win.key.modality],
                 "text": text, "ts": self.clock.now_ms, "type": "chat"}
        self.chat_log.append(entry)
        self._write_chat_line(entry)
        self.endpoint.send(Kind.CHAT, win.node_id, dumps(entry))

    # -- capture mode ------------------------------------------------------------------

    def register_viewer(self, viewer_id: str) -> None:
        if viewer_id in self.registered_viewers:
            return
        if len(self.registered_viewers) >= MAX_REGISTERED_VIEWERS:
            raise ViewerLimitExceeded(
                f"at most {MAX_REGISTERED_VIEWERS} viewers may register")
        self.registered_viewers.append(viewer_id)

    def attach_viewer(self, viewer_id: str) -> None:
        if viewer_id not in self.registered_viewers:
            raise ViewerLimitExceeded("viewer is not registered")
        if viewer_id in self.attached_viewers:
            return
        if len(self.attached_viewers) >= MAX_ATTACHED_VIEWERS:
            raise ViewerLimitExceeded(
                f"at most {MAX_ATTACHED_VIEWERS} viewers may attach at once")
        self.attached_viewers.append(viewer_id)

    def detach_viewer(self, viewer_id: str) -> None:
        if viewer_id in self.attached_viewers:
            self.attached_viewers.remove(viewer_id)

    def _capture_tick(self) -> None:
        if not self.running or self.mode != SessionMode.SCREEN_CAPTURE:
            return
        views = (self.or_view_provider() if self.or_view_provider
                 else self.composite_views())
        frame = scribe.render_composite(views, timestamp_ms=self.clock.now_ms)
        self.frames_rendered += 1
        self.last_frame = frame
        for viewer in self.attached_viewers:
            self.endpoint.send(Kind.CAPTURE_FRAME, viewer, frame.to_bytes())
        self._timers.append(
            self.clock.schedule(self.capture_interval_ms, self._capture_tick))

    # -- housekeeping ---------------------------------------------------------------------

    def _tick(self) -> None:
        if not self.running:
            return
        self.poll_command_file()
        now = self.clock.now_ms
        for slot in sorted(self.windows):
            win = self.windows[slot]
            if now - win.last_activity_ms > self.idle_window_ms:
                self.kill_window(slot, reason="idle locally")
        self._timers.append(self.clock.schedule(self.tick_ms, self._tick))

    # -- logs and ledger -----------------------------------------------------------------

    def _write_alert_line(self, ev: AlertEvent) -> None:
        if self.alert_log_path is not None:
            self.alert_log_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.alert_log_path, "a", encoding="utf-8") as f:
                f.write(ev.line() + "\n")

    def _write_chat_line(self, entry: dict) -> None:
        if self.chat_log_path is not None:
            self.chat_log_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.chat_log_path, "a", encoding="utf-8") as f:
                f.write(json.dumps(entry, sort_keys=True) + "\n")

    def ack_alert(self, alert_id: int) -> bool:
        for ev in self.alerts:
            if ev.alert_id == alert_id:
                ev.acknowledged = True
                return True
        return False

    def bandwidth_report(self) -> dict:
        """Measured traffic by category, the full-control vs capture ledger."""
        ep = self.endpoint
        data_bytes = ep.bytes_delivered[Kind.EPOCH_DATA]
        data_envs = ep.count_delivered[Kind.EPOCH_DATA]
        epochs = (data_bytes - 37 * data_envs) // RECORD_SIZE if data_envs else 0
        report = {
            "mode": self.mode.value,
            "epochs_delivered": epochs,
            "epochdata_wire_bytes": data_bytes,
            "per_epoch_bytes": (data_bytes / epochs) if epochs else 0.0,
            "frames_sent": self.frames_rendered,
            "frame_wire_bytes": ep.bytes_out[Kind.CAPTURE_FRAME],
            "per_frame_bytes": (scribe.RasterFrame(scribe.FRAME_WIDTH,
                                                   scribe.FRAME_HEIGHT,
                                                   b"").frame_size + 37),
            "capture_interval_ms": self.capture_interval_ms,
            "raw_bytes_in": sum(ep.bytes_in.values()),
            "raw_bytes_out": sum(ep.bytes_out.values()),
        }
        return report
