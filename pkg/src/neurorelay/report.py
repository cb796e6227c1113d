"""Run reports: waterfall figures plus delimited summaries.

Given a finished run directory (node archives, session logs, ledger), this
renders one waterfall figure per case archive to PNG and writes the alert
and case summaries as CSV next to them, so a run can be reviewed without
any live tooling.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import scribe  # noqa: E402
from .casestore import CaseArchive, CaseKey, SUFFIX_MODALITY  # noqa: E402
from .oversight.session import WindowState  # noqa: E402
from .oversight.view import build_view  # noqa: E402

ALERT_FIELDS = ["timestamp_ms", "case", "kind", "channel", "magnitude",
                "epoch", "reference", "reference_index"]


def find_archives(run_dir: Path) -> list[tuple[str, Path, CaseKey]]:
    found = []
    nodes_dir = run_dir / "nodes"
    if not nodes_dir.is_dir():
        return found
    for node_dir in sorted(nodes_dir.iterdir()):
        for path in sorted(node_dir.glob("*/*")):
            if path.suffix.lstrip(".") in SUFFIX_MODALITY:
                found.append((node_dir.name, path, CaseKey.from_path(path)))
    return found


def waterfall_figure(archive: CaseArchive, title: str, out_path: Path) -> None:
    records = archive.read_all()
    if not records:
        return
    win = WindowState(slot=0, node_id="report", key=archive.key)
    view = build_view(win, records)
    fig, ax = plt.subplots(figsize=(8, 6))
    n = len(view.traces)
    peak = max(float(abs(t.samples).max()) for t in view.traces) or 1.0
    for i, trace in enumerate(view.traces):
        offset = n - 1 - i
        channels, samples = trace.samples.shape
        for ch in range(channels):
            xs = [ch * samples + j for j in range(samples)]
            ys = trace.samples[ch] / (2.2 * peak) + offset
            style = dict(color="black", lw=1.2) if trace.is_baseline \
                else dict(color="tab:blue", lw=0.8)
            ax.plot(xs, ys, **style)
        tag = "base" if trace.is_baseline else "epoch"
        ax.text(1.01, offset, f"{tag} {trace.epoch_index}",
                transform=ax.get_yaxis_transform(), fontsize=7, va="center")
    ax.set_title(title)
    ax.set_yticks([])
    ax.set_xlabel("sample (channels left to right)")
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)


def alerts_to_csv(alert_log: Path, out_path: Path) -> int:
    rows = []
    if alert_log.exists():
        for line in alert_log.read_text(encoding="utf-8").splitlines():
            parts = line.split("\t")
            if len(parts) == 8:
                rows.append(dict(zip(ALERT_FIELDS, parts)))
    with open(out_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=ALERT_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    return len(rows)


def cases_to_csv(archives: list[tuple[str, Path, CaseKey]], out_path: Path) -> None:
    with open(out_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["node", "case", "records", "bytes", "first_ms", "last_ms",
                         "annotations"])
        for node, path, key in archives:
            archive = CaseArchive(path.parents[1], key)
            records = archive.read_all()
            writer.writerow([
                node, key.label, len(records), path.stat().st_size,
                records[0].timestamp_ms if records else "",
                records[-1].timestamp_ms if records else "",
                len(archive.annotations())])


def write_report(run_dir: Path | str, out_dir: Path | str | None = None) -> dict:
    run_dir = Path(run_dir)
    out = Path(out_dir) if out_dir else run_dir / "report"
    out.mkdir(parents=True, exist_ok=True)
    archives = find_archives(run_dir)
    figures = []
    for node, path, key in archives:
        archive = CaseArchive(run_dir / "nodes" / node, key)
        stem = f"{node}_{key.label.replace('.', '_')}"
        fig_path = out / f"{stem}.png"
        waterfall_figure(archive, f"{node}:{key.label}", fig_path)
        if fig_path.exists():
            figures.append(fig_path)
        records = archive.read_all()
        if records:
            view = build_view(WindowState(slot=0, node_id=node, key=key), records)
            stream = scribe.render_tek(view, throttle_baud=19_200)
            (out / f"{stem}.tek").write_bytes(stream.data)
            frame = scribe.render_raster(view, label=f"{node}:{key.label}")
            (out / f"{stem}.nnf").write_bytes(frame.to_bytes())
    n_alerts = alerts_to_csv(run_dir / "session" / "alerts.log", out / "alerts.csv")
    cases_to_csv(archives, out / "cases.csv")
    ledger_src = run_dir / "session" / "ledger.csv"
    if ledger_src.exists():
        (out / "ledger.csv").write_bytes(ledger_src.read_bytes())
    return {"figures": figures, "alerts": n_alerts, "cases": len(archives),
            "out_dir": out}
