"""Scenario orchestration: wires clock, network, nodes, daemons, and the
oversight session together from a TopConfig and runs them on simulated time.

The orchestrator owns the clock. Node acquisition tasks, ISDs, the prober,
and the session are all independent callback-driven loops on that clock, so
a whole run is a pure function of (config, seed) and its outputs (archives,
alert log, chat log, ledger) are byte-stable across runs and hosts.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field
from pathlib import Path

from .casestore import CaseArchive, CaseKey, MODALITY_SUFFIX
from .clock import SimClock
from .config import CaseScript, NodeSpec, TopConfig, modality_for
from .meshnet.discovery import Activator, Prober, RosterEntry, boot_node
from .meshnet.envelope import Kind
from .meshnet.isd import InfoServiceDaemon, dumps
from .meshnet.link import SimNet
from .meshnet.transport import Endpoint, NodeAddress, Registry
from .neurosim import (
    AcquisitionTask, ContinuousConfig, ContinuousTask, SweepConfig,
    get_template,
)
from .oversight.session import Session, SessionMode
from .wirerec import encode_record


@dataclass
class NodeRuntime:
    spec: NodeSpec
    endpoint: Endpoint
    archive_root: Path
    isd: InfoServiceDaemon | None = None
    tasks: list = field(default_factory=list)


class Orchestra:
    def __init__(self, config: TopConfig, out_dir: Path | str):
        self.config = config
        self.out_dir = Path(out_dir)
        self.clock = SimClock(start_ms=config.start_ms)
        self.net = SimNet(self.clock, seed=config.seed, default_link=config.link)
        self.registry = Registry()
        self.nodes: dict[str, NodeRuntime] = {}
        self.session: Session | None = None
        self.prober: Prober | None = None
        self.activator: Activator | None = None
        self.captured_wire: list[bytes] = []
        self.net.taps.append(
            lambda src, dst, port, data: self.captured_wire.append(data))

    # -- construction --------------------------------------------------------

    def build(self) -> "Orchestra":
        cfg = self.config
        self.registry.add(cfg.session_node, NodeAddress(
            cfg.session_probe_port, cfg.session_data_port,
            cfg.session_alternate_ports))
        for spec in cfg.nodes:
            self.registry.add(spec.node_id, NodeAddress(
                spec.probe_port, spec.data_port, spec.alternate_data_ports))
            root = self.out_dir / "nodes" / spec.node_id
            root.mkdir(parents=True, exist_ok=True)
            endpoint = Endpoint(spec.node_id, self.net, self.clock, self.registry)
            self.nodes[spec.node_id] = NodeRuntime(spec, endpoint, root)
            boot_node(self.net, spec.node_id, spec.probe_port)

        session_dir = self.out_dir / "session"
        session_dir.mkdir(parents=True, exist_ok=True)
        session_ep = Endpoint(cfg.session_node, self.net, self.clock, self.registry)
        self.session = Session(
            cfg.session_node, session_ep, self.clock,
            mode=SessionMode.FULL_CONTROL if cfg.mode == "full"
            else SessionMode.SCREEN_CAPTURE,
            thresholds=cfg.thresholds,
            idle_window_ms=cfg.idle_window_ms,
            capture_interval_ms=cfg.capture_interval_ms,
            command_file=session_dir / "scratch.cmd",
            alert_log_path=session_dir / "alerts.log",
            chat_log_path=session_dir / "chat.log")

        self.activator = Activator(self._spawn_isd)
        roster = [RosterEntry(spec.node_id, spec.probe_port) for spec in cfg.nodes]
        self.prober = Prober(self.net, self.clock, cfg.session_node, roster,
                             self.activator,
                             probe_interval_ms=cfg.probe_interval_ms,
                             probe_timeout_ms=cfg.probe_timeout_ms)
        return self

    def _spawn_isd(self, node_id: str) -> InfoServiceDaemon:
        node = self.nodes[node_id]
        expected = {}
        for script in node.spec.cases:
            key = self._case_key(node.spec, script)
            expected[key.label] = 1 if script.is_continuous else script.sweeps_per_average
        isd = InfoServiceDaemon(
            node_id, node.archive_root, node.endpoint, self.clock,
            watchers=(self.config.session_node,),
            poll_period_ms=self.config.isd_poll_period_ms,
            window_ms=self.config.idle_window_ms,
            expected_sweeps=expected,
            hospital=node.spec.hospital)
        node.isd = isd
        return isd.start()

    def _case_key(self, spec: NodeSpec, script: CaseScript) -> CaseKey:
        return CaseKey(spec.hospital, script.case_id, modality_for(script))

    # -- acquisition -----------------------------------------------------------

    def start_acquisition(self) -> None:
        for node in self.nodes.values():
            for script in node.spec.cases:
                self.clock.schedule(script.start_offset_ms,
                                    lambda n=node, s=script: self._start_case(n, s))

    def _start_case(self, node: NodeRuntime, script: CaseScript) -> None:
        key = self._case_key(node.spec, script)
        if script.is_continuous:
            cc = script.continuous
            cfg = ContinuousConfig(
                noise_sigma=float(cc.get("noise_sigma", 1.0)),
                channel_count=int(cc.get("channel_count", 1)),
                samples_per_chunk=int(cc.get("samples_per_chunk", 256)),
                chunk_period_ms=int(cc.get("chunk_period_ms", 1000)),
                rng_seed=self.config.seed ^ hash_stable(key.label),
                smooth_window=int(cc.get("smooth_window", 5)),
                burst_chunks=tuple(cc.get("burst_chunks", ())),
                burst_gain=float(cc.get("burst_gain", 8.0)))
            archive = CaseArchive(node.archive_root, key, expected_sweeps=1)
            task = ContinuousTask(key.modality, cfg, self.clock,
                                  lambda rec, final: None, archive,
                                  case_id=script.case_id,
                                  max_chunks=script.n_chunks or None).start()
        else:
            template = get_template(script.template)
            cfg = SweepConfig(
                noise_sigma=script.noise_sigma,
                sweeps_per_average=script.sweeps_per_average,
                stim_rate=script.stim_rate,
                partial_emit_every=script.partial_emit_every,
                rng_seed=self.config.seed ^ hash_stable(key.label))
            archive = CaseArchive(node.archive_root, key,
                                  expected_sweeps=script.sweeps_per_average)
            schedule = {}
            if script.drop_at_epoch is not None:
                schedule[int(script.drop_at_epoch)] = template.scaled(script.drop_factor)
            sink = self._partial_sink(node, key, script) \
                if self.config.forward_partials else (lambda rec, final: None)
            task = AcquisitionTask(template, cfg, self.clock, sink, archive,
                                   case_id=script.case_id,
                                   max_averages=script.n_averages or None,
                                   template_schedule=schedule).start()
        node.tasks.append(task)

    def _partial_sink(self, node: NodeRuntime, key: CaseKey, script: CaseScript):
        def sink(rec, final):
            if final or node.isd is None:
                return
            payload = dumps({
                "case": key.case_id, "hospital": key.hospital,
                "mod": MODALITY_SUFFIX[key.modality],
                "record": base64.b64encode(encode_record(rec)).decode("ascii"),
                "type": "partial"})
            node.endpoint.send(Kind.ANNOUNCE, self.config.session_node, payload)
        return sink

    # -- run ----------------------------------------------------------------------

    def start(self) -> "Orchestra":
        self.session.start()
        self.prober.start()
        return self

    def run_for(self, duration_ms: int) -> None:
        self.clock.run_for(duration_ms)

    def stop(self) -> None:
        for node in self.nodes.values():
            for task in node.tasks:
                task.stop()
            if node.isd is not None:
                node.isd.stop()
        if self.prober is not None:
            self.prober.stop()
        if self.session is not None:
            self.session.stop()

    # -- inspection ------------------------------------------------------------------

    def wire_contains(self, needle: bytes) -> bool:
        return any(needle in datagram for datagram in self.captured_wire)


def hash_stable(text: str) -> int:
    """Deterministic 64-bit hash for seed derivation (not Python's hash)."""
    import hashlib
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(),
                          "little")
