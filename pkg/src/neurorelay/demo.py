"""The scripted end-to-end scenario.

Three simulated operating-room nodes in different hospitals run seven cases
(four averaged evoked-potential modalities, an EEG and an EMG stream, and
one case with a mid-case amplitude drop) over a lossy WAN link while the
oversight session discovers the nodes, follows every case, raises change
alerts, and exchanges chat with the technologists. A second short phase
re-serves one node's archives in screen-capture mode so the bandwidth
ledger can put both remote-display strategies side by side.

Everything is a pure function of the seed: two runs with equal seeds give
byte-identical archives, alert logs, chat logs, and ledgers.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .casestore import CaseArchive, CaseKey, SUFFIX_MODALITY, migrate_to_central, scan_active
from .clock import SimClock
from .config import TopConfig, from_dict
from .meshnet.link import SimNet
from .meshnet.transport import Endpoint, NodeAddress, Registry
from .orchestra import Orchestra
from .oversight.session import Session, SessionMode
from .oversight.view import build_view
from .oversight.session import WindowState

FULL_PHASE_MS = 150_000
IDLE_PHASE_MS = 62 * 60_000
CAPTURE_PHASE_MS = 60_000

PHI_CANARIES = (
    "ZZCANARY^PATIENT^ONE", "ZZCANARY^PATIENT^TWO", "ZZCANARY^PATIENT^THREE",
    "MRN-CANARY-111111", "MRN-CANARY-222222", "MRN-CANARY-333333",
)


def demo_config(seed: int = 42) -> TopConfig:
    return from_dict({
        "seed": seed,
        "start_ms": 1_700_000_000_000,
        "link": {"drop": 0.05, "latency_min_ms": 2, "latency_max_ms": 25,
                 "duplicate": 0.02, "reorder": True},
        "probe_interval_ms": 30_000,
        "isd_poll_period_ms": 5_000,
        "nodes": [
            {"node_id": "or-east", "hospital": "puh",
             "probe_port": 47010, "data_port": 47011,
             "alternate_data_ports": [47012, 47013],
             "patient_name": PHI_CANARIES[0], "mrn": PHI_CANARIES[3],
             "cases": [
                 {"case_id": "b16204", "template": "median_sep",
                  "noise_sigma": 0.04, "sweeps_per_average": 100,
                  "stim_rate": 20, "n_averages": 14},
                 {"case_id": "b16209", "template": "baep", "noise_sigma": 0.02,
                  "sweeps_per_average": 200, "stim_rate": 30, "n_averages": 12},
                 {"case_id": "e0988", "modality": "eeg",
                  "continuous": {"noise_sigma": 1.0, "chunk_period_ms": 2000},
                  "n_chunks": 30},
             ]},
            {"node_id": "or-west", "hospital": "gwh",
             "probe_port": 47020, "data_port": 47021,
             "alternate_data_ports": [47022, 47023],
             "patient_name": PHI_CANARIES[1], "mrn": PHI_CANARIES[4],
             "cases": [
                 {"case_id": "c7710", "template": "baep", "noise_sigma": 0.02,
                  "sweeps_per_average": 150, "stim_rate": 30, "n_averages": 12,
                  "drop_at_epoch": 8, "drop_factor": 0.4},
                 {"case_id": "m3301", "template": "peroneal_sep",
                  "noise_sigma": 0.05, "sweeps_per_average": 150,
                  "stim_rate": 25, "n_averages": 10},
             ]},
            {"node_id": "or-north", "hospital": "mgh",
             "probe_port": 47030, "data_port": 47031,
             "alternate_data_ports": [47032, 47033],
             "patient_name": PHI_CANARIES[2], "mrn": PHI_CANARIES[5],
             "cases": [
                 {"case_id": "v5520", "template": "vep", "noise_sigma": 0.03,
                  "sweeps_per_average": 80, "stim_rate": 16, "n_averages": 12},
                 {"case_id": "g1147", "modality": "emg",
                  "continuous": {"noise_sigma": 1.0, "chunk_period_ms": 2000,
                                 "burst_chunks": [10], "burst_gain": 8.0},
                  "n_chunks": 30},
             ]},
        ],
    })


def _scripted_chat(orch: Orchestra) -> None:
    """Fixed chat script at fixed simulated instants."""
    def tech_chat(node_id, case_id, template_mod, text):
        def fire():
            node = orch.nodes[node_id]
            if node.isd is None:
                return
            key = _key_by_case(orch, node_id, case_id)
            if key is not None:
                node.isd.send_chat(key, "technologist", text)
        return fire

    def session_chat(case_id, text):
        def fire():
            for slot, win in sorted(orch.session.windows.items()):
                if win.key.case_id == case_id:
                    orch.session.chat(slot, text)
                    return
        return fire

    orch.clock.schedule(40_000, tech_chat("or-east", "b16204", "msp",
                                          "baselines acquired, starting closure watch"))
    orch.clock.schedule(60_000, session_chat("b16204", "traces look stable"))
    orch.clock.schedule(80_000, tech_chat("or-west", "c7710", "bap",
                                          "surgeon retracting now"))
    orch.clock.schedule(100_000, session_chat("c7710",
                                              "amplitude falling, please check electrodes"))


def _key_by_case(orch: Orchestra, node_id: str, case_id: str) -> CaseKey | None:
    spec = orch.nodes[node_id].spec
    for script in spec.cases:
        if script.case_id == case_id:
            return orch._case_key(spec, script)
    return None


def _write_ledger(path: Path, rows: list[dict]) -> None:
    fields = ["mode", "epochs_delivered", "epochdata_wire_bytes",
              "per_epoch_bytes", "frames_sent", "frame_wire_bytes",
              "per_frame_bytes", "capture_interval_ms", "raw_bytes_in",
              "raw_bytes_out"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            out["per_epoch_bytes"] = f"{row['per_epoch_bytes']:.1f}"
            writer.writerow(out)


def _capture_phase(config: TopConfig, out_dir: Path) -> dict:
    """Re-serve or-east's archives as 15-second raster frames for a minute."""
    clock = SimClock(start_ms=config.start_ms + FULL_PHASE_MS)
    net = SimNet(clock, seed=config.seed + 1, default_link=config.link)
    registry = Registry()
    registry.add("capture-host", NodeAddress(48010, 48011, (48012, 48013)))
    registry.add("viewer-1", NodeAddress(48020, 48021, (48022, 48023)))
    registry.add("viewer-2", NodeAddress(48030, 48031, (48032, 48033)))
    viewer_eps = []
    for viewer in ("viewer-1", "viewer-2"):
        ep = Endpoint(viewer, net, clock, registry)
        ep.attach()
        ep.on_envelope = lambda env: None
        viewer_eps.append(ep)

    archive_root = out_dir / "nodes" / "or-east"
    views = {}
    for slot, active in enumerate(scan_active(archive_root, clock.now_ms,
                                              window_ms=10 ** 12)):
        archive = CaseArchive(archive_root, active.key)
        win = WindowState(slot=slot, node_id="or-east", key=active.key)
        views[slot] = (f"or-east:{active.key.label}",
                       build_view(win, archive.read_all()))

    endpoint = Endpoint("capture-host", net, clock, registry)
    session = Session("capture-host", endpoint, clock,
                      mode=SessionMode.SCREEN_CAPTURE,
                      capture_interval_ms=config.capture_interval_ms,
                      or_view_provider=lambda: views)
    session.start()
    session.register_viewer("viewer-1")
    session.register_viewer("viewer-2")
    session.attach_viewer("viewer-1")
    session.attach_viewer("viewer-2")
    clock.run_for(CAPTURE_PHASE_MS)
    frames_dir = out_dir / "session" / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    if session.last_frame is not None:
        (frames_dir / "last_frame.bin").write_bytes(session.last_frame.to_bytes())
    report = session.bandwidth_report()
    session.stop()
    return report


def run_demo(seed: int = 42, out_dir: Path | str = "runs/demo",
             with_idle_phase: bool = True) -> dict:
    """Returns a result summary; writes archives, logs, and the ledger."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = demo_config(seed)
    orch = Orchestra(config, out).build()
    orch.start()
    orch.start_acquisition()
    _scripted_chat(orch)
    orch.run_for(FULL_PHASE_MS)
    full_report = orch.session.bandwidth_report()
    windows_at_peak = len(orch.session.windows)

    if with_idle_phase:
        # everyone stops writing; cases must fall off case lists and windows die
        orch.run_for(IDLE_PHASE_MS)
    windows_after_idle = len(orch.session.windows)
    orch.stop()

    central = out / "central"
    migrated = []
    if with_idle_phase:
        for node in orch.nodes.values():
            for active in scan_active(node.archive_root, orch.clock.now_ms,
                                      window_ms=10 ** 15):
                archive = CaseArchive(node.archive_root, active.key)
                migrated.append(migrate_to_central(
                    archive, central, orch.clock.now_ms,
                    window_ms=config.idle_window_ms))

    capture_report = _capture_phase(config, out)
    _write_ledger(out / "session" / "ledger.csv", [full_report, capture_report])

    phi_hits = [c for c in PHI_CANARIES
                if orch.wire_contains(c.encode("utf-8"))]
    return {
        "out_dir": out,
        "config": config,
        "orchestra": orch,
        "alerts": list(orch.session.alerts),
        "windows_at_peak": windows_at_peak,
        "windows_after_idle": windows_after_idle,
        "full_report": full_report,
        "capture_report": capture_report,
        "migrated": migrated,
        "phi_hits": phi_hits,
        "wire_datagrams": len(orch.captured_wire),
    }
