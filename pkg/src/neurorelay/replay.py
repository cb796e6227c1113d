"""Archive replay: drive an oversight session from a recorded case.

The archived records are re-emitted into a fresh in-simulator node archive
with their original inter-record spacing compressed by the speed factor,
so the whole live pipeline (ISD announcements, epoch fetches, change
detection, waterfall views) runs exactly as it did during acquisition.
"""

from __future__ import annotations

from pathlib import Path

from .casestore import CaseArchive, CaseKey
from .clock import SimClock
from .meshnet.isd import InfoServiceDaemon
from .meshnet.link import SimNet
from .meshnet.transport import Endpoint, NodeAddress, Registry
from .oversight.session import Session, SessionMode
from .wirerec import EpochRecord, decode_record, RECORD_SIZE


def load_records(archive_path: Path) -> list[EpochRecord]:
    data = Path(archive_path).read_bytes()
    whole = len(data) - len(data) % RECORD_SIZE
    return [decode_record(data[i:i + RECORD_SIZE])
            for i in range(0, whole, RECORD_SIZE)]


def replay_session(archive_path: Path | str, *, speed: float = 10.0,
                   seed: int = 0, work_dir: Path | str = "runs/replay",
                   poll_period_ms: int = 1000) -> Session:
    """Returns the session after the replay has fully played out."""
    archive_path = Path(archive_path)
    records = load_records(archive_path)
    if not records:
        raise ValueError(f"{archive_path} holds no records")
    key = CaseKey.from_path(archive_path)

    clock = SimClock(start_ms=records[0].timestamp_ms)
    net = SimNet(clock, seed=seed)
    registry = Registry()
    registry.add("replay-node", NodeAddress(47100, 47101, (47102, 47103)))
    registry.add("replay-view", NodeAddress(47110, 47111, (47112, 47113)))

    root = Path(work_dir) / "replay-node"
    root.mkdir(parents=True, exist_ok=True)
    live = CaseArchive(root, key, expected_sweeps=min(r.sweep_count for r in records))
    if live.record_path.exists():
        live.record_path.unlink()

    node_ep = Endpoint("replay-node", net, clock, registry)
    isd = InfoServiceDaemon("replay-node", root, node_ep, clock,
                            watchers=("replay-view",),
                            poll_period_ms=poll_period_ms,
                            hospital=key.hospital)
    session_ep = Endpoint("replay-view", net, clock, registry)
    session = Session("replay-view", session_ep, clock,
                      mode=SessionMode.FULL_CONTROL)
    isd.start()
    session.start()

    t0 = records[0].timestamp_ms
    for rec in records:
        offset = max(1, int((rec.timestamp_ms - t0) / speed))

        def emit(r=rec):
            reementered = EpochRecord(
                modality=r.modality, channel_count=r.channel_count,
                samples_per_channel=r.samples_per_channel, stim_rate=r.stim_rate,
                timestamp_ms=clock.now_ms, sweep_count=r.sweep_count,
                samples=r.samples, case_id=r.case_id, annotation=r.annotation,
                amp_gain=r.amp_gain, locut_hz=r.locut_hz, hicut_hz=r.hicut_hz)
            live.append(reementered)
        clock.schedule_at(t0 + offset, emit)

    span = max(1, int((records[-1].timestamp_ms - t0) / speed))
    clock.run_for(span + 5 * poll_period_ms + 2_000)
    isd.stop()
    session.stop()
    return session
