"""CLI, replay, report, and config validation."""

import json
import subprocess

import pytest

from neurorelay.cli import main
from neurorelay.config import ConfigError, from_dict, load_config
from neurorelay.demo import run_demo


def minimal_config(**overrides):
    raw = {
        "seed": 1,
        "nodes": [{
            "node_id": "or1", "hospital": "puh",
            "probe_port": 47010, "data_port": 47011,
            "alternate_data_ports": [47012, 47013],
            "cases": [{"case_id": "c1", "template": "baep",
                       "sweeps_per_average": 10, "stim_rate": 20,
                       "n_averages": 3}],
        }],
    }
    raw.update(overrides)
    return raw


def test_config_rejects_well_known_port(tmp_path):
    raw = minimal_config()
    raw["nodes"][0]["data_port"] = 80
    with pytest.raises(ConfigError) as err:
        from_dict(raw)
    assert "nodes[0].data_port" in str(err.value)


def test_config_rejects_bad_probability():
    with pytest.raises(ConfigError) as err:
        from_dict(minimal_config(link={"drop": 1.5}))
    assert "link" in str(err.value)


def test_config_rejects_speedup_below_one():
    with pytest.raises(ConfigError):
        from_dict(minimal_config(speedup=0.5))


def test_config_port_shift_env(tmp_path, monkeypatch):
    monkeypatch.setenv("NEURORELAY_PORT_SHIFT", "1000")
    cfg = from_dict(minimal_config())
    assert cfg.nodes[0].data_port == 48011


def test_cli_exit_code_2_on_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(minimal_config(mode="bogus")))
    rc = main(["discover", "--config", str(bad)])
    assert rc == 2
    assert "mode" in capsys.readouterr().err


def test_cli_exit_code_2_on_missing_config(capsys):
    assert main(["discover", "--config", "/nonexistent.json"]) == 2


def test_ctl_appends_validated_line(tmp_path, capsys):
    rc = main(["ctl", "--session-dir", str(tmp_path), "win", "3", "gain", "1", "2.0"])
    assert rc == 0
    assert (tmp_path / "scratch.cmd").read_text() == "win 3 gain 1 2.0\n"
    rc = main(["ctl", "--session-dir", str(tmp_path), "win", "3", "zoom", "9"])
    assert rc == 1  # rejected before touching the file
    assert (tmp_path / "scratch.cmd").read_text() == "win 3 gain 1 2.0\n"


def test_replay_counts_epoch_notifications(tmp_path, capsys):
    from neurorelay.casestore import CaseArchive, CaseKey
    from neurorelay.replay import replay_session
    from neurorelay.wirerec import EpochRecord, Modality
    import numpy as np

    key = CaseKey("puh", "r1", Modality.BAEP)
    archive = CaseArchive(tmp_path / "src", key, expected_sweeps=10)
    for i in range(3):
        archive.append(EpochRecord(
            modality=Modality.BAEP, channel_count=1, samples_per_channel=32,
            stim_rate=10.0, timestamp_ms=5_000 + i * 8_000, sweep_count=10,
            samples=np.full((1, 32), float(i), dtype=np.float32), case_id="r1"))

    session = replay_session(archive.record_path, speed=20.0,
                             work_dir=tmp_path / "replay")
    assert sum(len(w.records) for w in session.windows.values()) == 3


def test_demo_cli_and_report(tmp_path, capsys):
    rc = main(["--seed", "7", "demo", "--out", str(tmp_path / "run"), "--report"])
    out = capsys.readouterr().out
    assert rc == 0
    summary = json.loads(out[: out.index("report:")])
    assert summary["cases"] == 7
    assert summary["per_epoch_bytes"] == 4645.0
    assert summary["phi_leaks"] == 0
    report_dir = tmp_path / "run" / "report"
    figures = list(report_dir.glob("*.png"))
    assert len(figures) == 7
    assert len(list(report_dir.glob("*.tek"))) == 7  # terminal vector streams
    nnf = sorted(report_dir.glob("*.nnf"))
    assert len(nnf) == 7 and nnf[0].read_bytes()[:4] == b"NNF1"
    assert (report_dir / "ledger.csv").exists()
    assert (report_dir / "alerts.csv").exists()
    assert (report_dir / "cases.csv").exists()
    ledger = (report_dir / "ledger.csv").read_text().splitlines()
    assert ledger[0].startswith("mode,")
    assert len(ledger) == 3  # header + full + capture rows


def test_entry_point_installed():
    out = subprocess.run(["neurorelay", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "demo" in out.stdout
