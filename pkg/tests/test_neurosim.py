"""Simulator tests: determinism, the sqrt-N averaging law, emission
schedules, and continuous streams.

The averaging checks are Monte-Carlo oracles: residual RMS of an average of
N unit-noise sweeps has expectation sigma/sqrt(N), so measured RMS over many
seeded trials pins the implementation without reusing its code path.
"""

import numpy as np
import pytest

from neurorelay import rng
from neurorelay.casestore import CaseArchive, CaseKey
from neurorelay.clock import SimClock
from neurorelay.neurosim import (
    AcquisitionTask, ContinuousConfig, ResponseTemplate, SweepConfig,
    acquire_case, generate_continuous, generate_sweep, get_template,
    load_template, make_baep_template, make_sep_template, run_average,
    save_template,
)
from neurorelay.wirerec import Modality


def zero_template(channels=1, samples=256):
    return ResponseTemplate(Modality.BAEP, channels, samples,
                            np.zeros((channels, samples), dtype=np.float32))


def test_vectorized_rng_matches_scalar_reference():
    key = rng.stream_key(42, 7, 3)
    vec = rng.gaussians(key, 50)
    for j in range(50):
        assert vec[j] == pytest.approx(rng.gaussian_scalar(key, j), abs=1e-12)


def test_zero_noise_returns_template_exactly():
    tmpl = make_baep_template()
    cfg = SweepConfig(noise_sigma=0.0, sweeps_per_average=10, stim_rate=10)
    sweep = generate_sweep(tmpl, cfg, 0)
    assert np.array_equal(sweep, tmpl.waveform)


def test_sweep_determinism():
    tmpl = make_sep_template()
    cfg = SweepConfig(noise_sigma=2.0, sweeps_per_average=10, stim_rate=10, rng_seed=99)
    a = generate_sweep(tmpl, cfg, 123)
    b = generate_sweep(tmpl, cfg, 123)
    assert a.tobytes() == b.tobytes()
    c = generate_sweep(tmpl, cfg, 124)
    assert a.tobytes() != c.tobytes()


def test_noise_moments():
    # 1e5 samples of unit noise: mean within 0.02 of 0, sd within 0.02 of 1
    tmpl = zero_template(1, 1000)
    cfg = SweepConfig(noise_sigma=1.0, sweeps_per_average=1, stim_rate=10, rng_seed=7)
    draws = np.concatenate([generate_sweep(tmpl, cfg, i)[0] for i in range(100)])
    assert draws.size == 100_000
    assert abs(float(draws.mean())) < 0.02
    assert abs(float(draws.std()) - 1.0) < 0.02


def test_average_of_one_equals_single_sweep():
    tmpl = make_baep_template()
    cfg = SweepConfig(noise_sigma=1.0, sweeps_per_average=1, stim_rate=10, rng_seed=5)
    rec = run_average(tmpl, cfg)
    assert np.array_equal(rec.samples, generate_sweep(tmpl, cfg, 0))
    assert rec.sweep_count == 1


def test_averaging_never_shifts_signal():
    tmpl = make_sep_template()
    for n in (1, 4, 16):
        cfg = SweepConfig(noise_sigma=0.0, sweeps_per_average=n, stim_rate=10)
        rec = run_average(tmpl, cfg)
        assert np.array_equal(rec.samples, tmpl.waveform)


def test_residual_rms_n100():
    # Monte-Carlo oracle: sigma=1, N=100 -> RMS ~ 0.1; at least 95% of 200
    # seeded trials must land in [0.08, 0.12]
    tmpl = zero_template()
    hits = 0
    for trial in range(200):
        cfg = SweepConfig(noise_sigma=1.0, sweeps_per_average=100, stim_rate=10,
                          rng_seed=trial)
        rec = run_average(tmpl, cfg)
        rms = float(np.sqrt(np.mean(rec.samples.astype(np.float64) ** 2)))
        if 0.08 <= rms <= 0.12:
            hits += 1
    assert hits >= 190


def test_quadrupling_sweeps_halves_rms():
    tmpl = zero_template()
    ratios = []
    for trial in range(200):
        rms = {}
        for n in (16, 64):
            cfg = SweepConfig(noise_sigma=1.0, sweeps_per_average=n, stim_rate=10,
                              rng_seed=10_000 + trial)
            rec = run_average(tmpl, cfg)
            rms[n] = float(np.sqrt(np.mean(rec.samples.astype(np.float64) ** 2)))
        ratios.append(rms[16] / rms[64])
    mean_ratio = float(np.mean(ratios))
    assert 2.0 * 0.85 <= mean_ratio <= 2.0 * 1.15


def sqrt_law_slope(trials=200, sweep_counts=(1, 4, 16, 64, 256), seed_base=0):
    """Regression slope of log RMS on log N; the averaging law says -0.5."""
    tmpl = zero_template()
    log_n, log_rms = [], []
    for n in sweep_counts:
        per_trial = []
        for trial in range(trials):
            cfg = SweepConfig(noise_sigma=1.0, sweeps_per_average=n, stim_rate=10,
                              rng_seed=seed_base + trial)
            rec = run_average(tmpl, cfg)
            per_trial.append(np.sqrt(np.mean(rec.samples.astype(np.float64) ** 2)))
        log_n.append(np.log(n))
        log_rms.append(np.log(np.mean(per_trial)))
    slope = np.polyfit(log_n, log_rms, 1)[0]
    return float(slope)


def test_sqrt_law_slope():
    assert abs(sqrt_law_slope() - (-0.5)) <= 0.05


def test_emission_schedule_partial_then_final():
    clock = SimClock()
    tmpl = make_baep_template()
    cfg = SweepConfig(noise_sigma=0.5, sweeps_per_average=10, stim_rate=10,
                      partial_emit_every=5, rng_seed=1)
    emissions = []
    acquire_case(tmpl, cfg, clock, lambda rec, final: emissions.append((rec.sweep_count, final)),
                 max_averages=2)
    clock.run_for(10_000)
    assert emissions == [(5, False), (10, True), (5, False), (10, True)]


def test_only_finals_archived(tmp_path):
    clock = SimClock()
    tmpl = make_baep_template()
    cfg = SweepConfig(noise_sigma=0.5, sweeps_per_average=10, stim_rate=20,
                      partial_emit_every=3, rng_seed=2)
    archive = CaseArchive(tmp_path, CaseKey("puh", "c1", Modality.BAEP),
                          expected_sweeps=10)
    acquire_case(tmpl, cfg, clock, lambda rec, final: None, archive,
                 case_id="c1", max_averages=3)
    clock.run_for(60_000)
    records = archive.read_all()
    assert len(records) == 3
    assert all(r.sweep_count == 10 for r in records)


def test_archives_byte_identical_across_runs(tmp_path):
    def one_run(root):
        clock = SimClock(start_ms=1_000_000)
        tmpl = make_sep_template()
        cfg = SweepConfig(noise_sigma=1.0, sweeps_per_average=8, stim_rate=25,
                          partial_emit_every=4, rng_seed=77)
        archive = CaseArchive(root, CaseKey("puh", "d7", Modality.MEDIAN_SEP),
                              expected_sweeps=8)
        acquire_case(tmpl, cfg, clock, lambda rec, final: None, archive,
                     case_id="d7", max_averages=5)
        clock.run_for(30_000)
        return archive.record_path.read_bytes()

    assert one_run(tmp_path / "a") == one_run(tmp_path / "b")


def test_sink_closed_stops_stream_cleanly():
    from neurorelay.neurosim import SinkClosed

    clock = SimClock()
    tmpl = make_baep_template()
    cfg = SweepConfig(noise_sigma=0.1, sweeps_per_average=5, stim_rate=50,
                      rng_seed=6)
    emitted = []

    def sink(record, final):
        emitted.append(record)
        if len(emitted) == 2:
            raise SinkClosed()

    task = acquire_case(tmpl, cfg, clock, sink)
    clock.run_for(60_000)
    assert task.stopped and len(emitted) == 2


def test_continuous_chunk_count_and_timestamps():
    cfg = ContinuousConfig(noise_sigma=1.0, rng_seed=3)
    records = generate_continuous(Modality.EEG, cfg, 10, start_ms=500)
    assert len(records) == 10
    stamps = [r.timestamp_ms for r in records]
    assert stamps == sorted(stamps) and len(set(stamps)) == 10
    assert all(r.sweep_count == 1 for r in records)


def test_continuous_burst_stands_out():
    cfg = ContinuousConfig(noise_sigma=1.0, rng_seed=4, burst_chunks=(4,),
                           burst_gain=8.0)
    records = generate_continuous(Modality.EMG, cfg, 10)
    rms = [float(np.sqrt(np.mean(r.samples.astype(np.float64) ** 2))) for r in records]
    others = [v for i, v in enumerate(rms) if i != 4]
    assert rms[4] > 3 * float(np.median(others))


def test_continuous_zero_amplitude():
    cfg = ContinuousConfig(noise_sigma=0.0)
    records = generate_continuous(Modality.EEG, cfg, 3)
    assert all(not r.samples.any() for r in records)


def test_template_file_roundtrip(tmp_path):
    tmpl = make_sep_template()
    path = tmp_path / "sep.tpl"
    save_template(tmpl, path)
    loaded = load_template(path)
    assert loaded.modality == tmpl.modality
    assert np.array_equal(loaded.waveform, tmpl.waveform)
    assert loaded.peak_latencies == tmpl.peak_latencies


def test_builtin_template_lookup():
    tmpl = get_template("baep")
    assert tmpl.modality == Modality.BAEP
    assert tmpl.waveform.shape == (1, 256)
