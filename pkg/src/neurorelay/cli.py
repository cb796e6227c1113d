"""Command-line entry points.

Subcommands:
  acquire   run one simulated OR node standalone over real UDP sockets
  isd       run a node's information-services daemon standalone
  discover  probe the roster and report/activate reachable nodes
  oversee   run an oversight session (--mode full|capture)
  gateway   serve the browser console over WebSocket for a live demo run
  replay    drive a session from an archived case at configurable speed
  ctl       append a control line to a running session's command file
  demo      run the scripted three-node scenario end to end
  report    render waterfall figures and CSV summaries for a finished run

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .config import ConfigError, TopConfig, load_config


def _fail(message: str, code: int) -> int:
    print(f"neurorelay: {message}", file=sys.stderr)
    return code


def _load(args) -> TopConfig:
    return load_config(args.config)


def cmd_demo(args) -> int:
    from .demo import run_demo
    from .report import write_report
    t0 = time.time()
    result = run_demo(seed=args.seed, out_dir=args.out)
    summary = {
        "out_dir": str(result["out_dir"]),
        "cases": result["windows_at_peak"],
        "epochs_delivered": result["full_report"]["epochs_delivered"],
        "per_epoch_bytes": result["full_report"]["per_epoch_bytes"],
        "alerts": len(result["alerts"]),
        "frames": result["capture_report"]["frames_sent"],
        "migrated": len(result["migrated"]),
        "phi_leaks": len(result["phi_hits"]),
        "wall_seconds": round(time.time() - t0, 1),
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    if args.report:
        rep = write_report(result["out_dir"])
        print(f"report: {rep['out_dir']} ({len(rep['figures'])} figures, "
              f"{rep['alerts']} alerts)")
    return 0 if not result["phi_hits"] else 1


def cmd_report(args) -> int:
    from .report import write_report
    rep = write_report(args.run, args.out)
    print(f"wrote {len(rep['figures'])} figures, {rep['cases']} case rows, "
          f"{rep['alerts']} alert rows to {rep['out_dir']}")
    return 0


def cmd_replay(args) -> int:
    from .replay import replay_session
    session = replay_session(args.archive, speed=max(args.speedup, 1.0),
                             seed=args.seed, work_dir=args.work_dir)
    epochs = sum(len(w.records) for w in session.windows.values()) or \
        max((w.announced_epochs for w in session.windows.values()), default=0)
    print(f"replayed {args.archive}: session saw {epochs} epochs "
          f"in {len(session.windows)} window(s), {len(session.alerts)} alert(s)")
    return 0


def cmd_ctl(args) -> int:
    from .oversight.session import parse_command
    line = " ".join(args.words)
    parse_command(line)  # validate before queueing
    cmd_file = Path(args.session_dir) / "scratch.cmd"
    cmd_file.parent.mkdir(parents=True, exist_ok=True)
    with open(cmd_file, "a", encoding="utf-8") as f:
        f.write(line + "\n")
    print(f"queued: {line}")
    return 0


def cmd_gateway(args) -> int:
    from .demo import demo_config
    from .gateway import Gateway
    from .orchestra import Orchestra

    config = demo_config(args.seed) if args.config is None else _load(args)
    out = Path(args.out)
    orch = Orchestra(config, out).build()
    orch.start()
    orch.start_acquisition()
    frontend = Path(args.frontend) if args.frontend else None
    gateway = Gateway(orch.session, orch.clock, host=args.host, port=args.port,
                      frontend_dir=frontend, speedup=args.speedup)
    print(f"gateway on ws://{args.host}:{args.port}/ws "
          f"(frontend: {frontend or 'none'}), speedup x{args.speedup}",
          flush=True)
    gateway.serve_forever()
    return 0


def _real_node_runtime(config: TopConfig, node_id: str):
    from .meshnet.transport import Endpoint, NodeAddress, Registry
    from .meshnet.udpnet import UdpReactor
    registry = Registry()
    for spec in config.nodes:
        registry.add(spec.node_id, NodeAddress(spec.probe_port, spec.data_port,
                                               spec.alternate_data_ports))
    registry.add(config.session_node, NodeAddress(
        config.session_probe_port, config.session_data_port,
        config.session_alternate_ports))
    reactor = UdpReactor(registry)
    endpoint = Endpoint(node_id, reactor, reactor, registry)
    return registry, reactor, endpoint


def cmd_isd(args) -> int:
    from .meshnet.isd import InfoServiceDaemon
    from .meshnet.udpnet import ProbeListener
    config = _load(args)
    spec = config.node(args.node)
    registry, reactor, endpoint = _real_node_runtime(config, args.node)
    probe = ProbeListener(spec.host, spec.probe_port)
    reactor.start()
    isd = InfoServiceDaemon(args.node, args.archive_root or f"runs/{args.node}",
                            endpoint, reactor,
                            watchers=(config.session_node,),
                            poll_period_ms=config.isd_poll_period_ms,
                            hospital=spec.hospital)
    isd.start()
    print(f"isd for {args.node} polling every {config.isd_poll_period_ms} ms; ^C to stop")
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        return 0
    finally:
        isd.stop()
        reactor.stop()
        probe.close()


def cmd_acquire(args) -> int:
    from .casestore import CaseArchive, CaseKey
    from .config import modality_for
    from .meshnet.udpnet import ProbeListener
    from .neurosim import AcquisitionTask, SweepConfig, get_template
    from .orchestra import hash_stable

    config = _load(args)
    spec = config.node(args.node)
    registry, reactor, endpoint = _real_node_runtime(config, args.node)
    probe = ProbeListener(spec.host, spec.probe_port)
    reactor.start()
    root = Path(args.archive_root or f"runs/{args.node}")
    tasks = []
    for script in spec.cases:
        if script.is_continuous:
            continue
        template = get_template(script.template)
        key = CaseKey(spec.hospital, script.case_id, modality_for(script))
        cfg = SweepConfig(noise_sigma=script.noise_sigma,
                          sweeps_per_average=script.sweeps_per_average,
                          stim_rate=script.stim_rate,
                          partial_emit_every=script.partial_emit_every,
                          rng_seed=config.seed ^ hash_stable(key.label))
        archive = CaseArchive(root, key, expected_sweeps=script.sweeps_per_average)
        tasks.append(AcquisitionTask(template, cfg, reactor,
                                     lambda rec, final: None, archive,
                                     case_id=script.case_id,
                                     max_averages=script.n_averages or None).start())
    print(f"acquiring {len(tasks)} case(s) on {args.node}; ^C to stop")
    try:
        while any(not t.stopped for t in tasks):
            time.sleep(0.5)
        return 0
    except KeyboardInterrupt:
        return 0
    finally:
        for t in tasks:
            t.stop()
        reactor.stop()
        probe.close()


def cmd_discover(args) -> int:
    from .meshnet.udpnet import probe_host
    config = _load(args)
    up = []
    for spec in config.nodes:
        alive = probe_host(spec.host, spec.probe_port,
                           timeout_s=config.probe_timeout_ms / 1000.0)
        print(f"{spec.node_id:12s} {spec.host}:{spec.probe_port} "
              f"{'up' if alive else 'down'}")
        if alive:
            up.append(spec.node_id)
    return 0


def cmd_oversee(args) -> int:
    from .oversight.session import Session, SessionMode
    config = _load(args)
    registry, reactor, endpoint = _real_node_runtime(config, config.session_node)
    reactor.start()
    session_dir = Path(args.session_dir)
    session_dir.mkdir(parents=True, exist_ok=True)
    session = Session(config.session_node, endpoint, reactor,
                      mode=SessionMode.FULL_CONTROL if args.mode == "full"
                      else SessionMode.SCREEN_CAPTURE,
                      thresholds=config.thresholds,
                      idle_window_ms=config.idle_window_ms,
                      capture_interval_ms=config.capture_interval_ms,
                      command_file=session_dir / "scratch.cmd",
                      alert_log_path=session_dir / "alerts.log",
                      chat_log_path=session_dir / "chat.log")
    session.start()
    print(f"oversight session up in {args.mode} mode; ^C to stop")
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        return 0
    finally:
        session.stop()
        reactor.stop()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neurorelay",
        description="desk-scale remote neuromonitoring relay")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--speedup", type=float, default=1.0,
                        help="simulated-time multiplier for live modes; "
                             "scripted runs always execute at full speed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo", help="run the scripted three-node scenario")
    p.add_argument("--out", default="runs/demo")
    p.add_argument("--report", action="store_true",
                   help="render figures and CSVs after the run")
    p.set_defaults(fn=cmd_demo)

    p = sub.add_parser("report", help="render figures/CSVs for a finished run")
    p.add_argument("--run", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("replay", help="drive a session from an archived case "
                                      "(pace set by the global --speedup)")
    p.add_argument("archive")
    p.add_argument("--work-dir", default="runs/replay")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("ctl", help="append a command line to a session's command file")
    p.add_argument("--session-dir", required=True)
    p.add_argument("words", nargs="+", help="e.g. win 3 gain 1 2.0")
    p.set_defaults(fn=cmd_ctl)

    p = sub.add_parser("gateway", help="serve the live browser console")
    p.add_argument("--config", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--frontend", default=None,
                   help="directory with the built console (index.html, app.js)")
    p.add_argument("--out", default="runs/gateway")
    p.set_defaults(fn=cmd_gateway)

    for name, fn in (("acquire", cmd_acquire), ("isd", cmd_isd)):
        p = sub.add_parser(name, help=f"run {name} for one node over UDP")
        p.add_argument("--config", required=True)
        p.add_argument("--node", required=True)
        p.add_argument("--archive-root", default=None)
        p.set_defaults(fn=fn)

    p = sub.add_parser("discover", help="probe the roster over TCP")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_discover)

    p = sub.add_parser("oversee", help="run an oversight session over UDP")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=["full", "capture"], default="full")
    p.add_argument("--session-dir", default="runs/session")
    p.set_defaults(fn=cmd_oversee)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        return _fail(str(exc), 2)
    except KeyboardInterrupt:
        return 0
    except Exception as exc:  # noqa: BLE001
        return _fail(f"{type(exc).__name__}: {exc}", 1)


if __name__ == "__main__":
    sys.exit(main())
