"""Declarative run configuration.

One JSON file describes the whole deployment: node roster with ports,
per-case acquisition scripts, the link model, session mode and thresholds,
clock seed/speedup, and archive roots. Everything is validated on load and
errors name the offending field. The only environment override is
NEURORELAY_PORT_SHIFT, which adds a constant to every configured port.

Per-node `patient_name` / `mrn` fields hold protected health information
that stays strictly node-local; nothing in the transport path reads them.
They exist so tests can plant canary strings and prove the wire never
carries them.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .casestore import SUFFIX_MODALITY
from .meshnet.link import LinkModel
from .oversight.alerts import Thresholds
from .wirerec import Modality


class ConfigError(Exception):
    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class CaseScript:
    case_id: str
    template: str = "baep"  # builtin name or template file path
    modality: str | None = None  # continuous cases: "eeg" | "emg"
    noise_sigma: float = 0.05
    sweeps_per_average: int = 100
    stim_rate: float = 20.0
    partial_emit_every: int = 0
    n_averages: int = 10
    start_offset_ms: int = 0
    drop_at_epoch: int | None = None
    drop_factor: float = 0.4
    continuous: dict = field(default_factory=dict)
    n_chunks: int = 0

    @property
    def is_continuous(self) -> bool:
        return self.modality in ("eeg", "emg")


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    hospital: str
    probe_port: int
    data_port: int
    alternate_data_ports: tuple[int, int]
    host: str = "127.0.0.1"
    patient_name: str = ""
    mrn: str = ""
    cases: tuple[CaseScript, ...] = ()


@dataclass(frozen=True)
class TopConfig:
    seed: int = 0
    speedup: float = 1.0
    start_ms: int = 1_700_000_000_000
    session_node: str = "oversight"
    session_probe_port: int = 47900
    session_data_port: int = 47901
    session_alternate_ports: tuple[int, int] = (47902, 47903)
    mode: str = "full"
    thresholds: Thresholds = Thresholds()
    link: LinkModel = LinkModel()
    probe_interval_ms: int = 60_000
    probe_timeout_ms: int = 500
    isd_poll_period_ms: int = 5_000
    capture_interval_ms: int = 15_000
    idle_window_ms: int = 60 * 60 * 1000
    forward_partials: bool = False
    nodes: tuple[NodeSpec, ...] = ()

    def node(self, node_id: str) -> NodeSpec:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise ConfigError("nodes", f"no node {node_id!r}")


def _port(value, where: str, shift: int) -> int:
    try:
        port = int(value) + shift
    except (TypeError, ValueError):
        raise ConfigError(where, f"not a port number: {value!r}") from None
    if port < 1024:
        raise ConfigError(where, f"port {port} is in the well-known range; "
                                 "this system only binds nonstandard ports")
    if port > 65535:
        raise ConfigError(where, f"port {port} out of range")
    return port


def _case(d: dict, where: str) -> CaseScript:
    if "case_id" not in d:
        raise ConfigError(where, "case_id is required")
    mod = d.get("modality")
    if mod is not None and mod not in SUFFIX_MODALITY:
        raise ConfigError(f"{where}.modality", f"unknown modality {mod!r}")
    sigma = float(d.get("noise_sigma", 0.05))
    if sigma < 0:
        raise ConfigError(f"{where}.noise_sigma", "must be >= 0")
    n = int(d.get("sweeps_per_average", 100))
    if n < 1:
        raise ConfigError(f"{where}.sweeps_per_average", "must be >= 1")
    return CaseScript(
        case_id=d["case_id"], template=d.get("template", "baep"),
        modality=mod, noise_sigma=sigma, sweeps_per_average=n,
        stim_rate=float(d.get("stim_rate", 20.0)),
        partial_emit_every=int(d.get("partial_emit_every", 0)),
        n_averages=int(d.get("n_averages", 10)),
        start_offset_ms=int(d.get("start_offset_ms", 0)),
        drop_at_epoch=d.get("drop_at_epoch"),
        drop_factor=float(d.get("drop_factor", 0.4)),
        continuous=dict(d.get("continuous", {})),
        n_chunks=int(d.get("n_chunks", 0)))


def from_dict(raw: dict) -> TopConfig:
    shift = int(os.environ.get("NEURORELAY_PORT_SHIFT", "0"))
    speedup = float(raw.get("speedup", 1.0))
    if speedup < 1:
        raise ConfigError("speedup", "must be >= 1")
    link_raw = raw.get("link", {})
    try:
        link = LinkModel(
            drop=float(link_raw.get("drop", 0.0)),
            latency_min_ms=int(link_raw.get("latency_min_ms", 1)),
            latency_max_ms=int(link_raw.get("latency_max_ms", 5)),
            duplicate=float(link_raw.get("duplicate", 0.0)),
            reorder=bool(link_raw.get("reorder", True)))
    except ValueError as exc:
        raise ConfigError("link", str(exc)) from None
    thr_raw = raw.get("thresholds", {})
    thresholds = Thresholds(
        amplitude_drop=float(thr_raw.get("amplitude_drop", 0.5)),
        latency_shift=float(thr_raw.get("latency_shift", 0.1)))
    mode = raw.get("mode", "full")
    if mode not in ("full", "capture"):
        raise ConfigError("mode", f"must be 'full' or 'capture', got {mode!r}")

    session_raw = raw.get("session", {})
    nodes = []
    seen_ids = set()
    for i, node_raw in enumerate(raw.get("nodes", [])):
        where = f"nodes[{i}]"
        node_id = node_raw.get("node_id")
        if not node_id:
            raise ConfigError(f"{where}.node_id", "required")
        if node_id in seen_ids:
            raise ConfigError(f"{where}.node_id", f"duplicate {node_id!r}")
        seen_ids.add(node_id)
        alts = node_raw.get("alternate_data_ports", [])
        if len(alts) != 2:
            raise ConfigError(f"{where}.alternate_data_ports",
                              "exactly two alternates are required")
        nodes.append(NodeSpec(
            node_id=node_id,
            hospital=node_raw.get("hospital", node_id),
            probe_port=_port(node_raw.get("probe_port"), f"{where}.probe_port", shift),
            data_port=_port(node_raw.get("data_port"), f"{where}.data_port", shift),
            alternate_data_ports=(
                _port(alts[0], f"{where}.alternate_data_ports[0]", shift),
                _port(alts[1], f"{where}.alternate_data_ports[1]", shift)),
            host=node_raw.get("host", "127.0.0.1"),
            patient_name=node_raw.get("patient_name", ""),
            mrn=node_raw.get("mrn", ""),
            cases=tuple(_case(c, f"{where}.cases[{j}]")
                        for j, c in enumerate(node_raw.get("cases", [])))))

    return TopConfig(
        seed=int(raw.get("seed", 0)),
        speedup=speedup,
        start_ms=int(raw.get("start_ms", 1_700_000_000_000)),
        session_node=session_raw.get("node_id", "oversight"),
        session_probe_port=_port(session_raw.get("probe_port", 47900),
                                 "session.probe_port", shift),
        session_data_port=_port(session_raw.get("data_port", 47901),
                                "session.data_port", shift),
        session_alternate_ports=(
            _port(session_raw.get("alternate_data_ports", [47902, 47903])[0],
                  "session.alternate_data_ports[0]", shift),
            _port(session_raw.get("alternate_data_ports", [47902, 47903])[1],
                  "session.alternate_data_ports[1]", shift)),
        mode=mode,
        thresholds=thresholds,
        link=link,
        probe_interval_ms=int(raw.get("probe_interval_ms", 60_000)),
        probe_timeout_ms=int(raw.get("probe_timeout_ms", 500)),
        isd_poll_period_ms=int(raw.get("isd_poll_period_ms", 5_000)),
        capture_interval_ms=int(raw.get("capture_interval_ms", 15_000)),
        idle_window_ms=int(raw.get("idle_window_ms", 60 * 60 * 1000)),
        forward_partials=bool(raw.get("forward_partials", False)),
        nodes=tuple(nodes))


def load_config(path: Path | str) -> TopConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError("config", f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    return from_dict(raw)


def modality_for(script: CaseScript) -> Modality:
    if script.is_continuous:
        return SUFFIX_MODALITY[script.modality]
    from .neurosim import get_template
    return get_template(script.template).modality
