"""Deterministic acquisition simulator.

Synthesizes per-sweep neuroelectric responses as a fixed waveform template
plus counter-keyed Gaussian noise, runs stimulus-locked running averages
(residual noise falls as 1/sqrt(sweeps)), and emits partial and completed
epoch records on a simulated clock. Continuous modalities (EEG/EMG) stream
fixed-length chunks of filtered noise with optional injected bursts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import rng
from .casestore import CaseArchive
from .clock import SimClock
from .wirerec import EpochRecord, Modality, SAMPLE_CAPACITY


class SinkClosed(Exception):
    """Raised by a sink to stop its acquisition stream cleanly."""


@dataclass(frozen=True)
class ResponseTemplate:
    """The noiseless evoked response a simulated node is estimating."""

    modality: Modality
    channel_count: int
    samples_per_channel: int
    waveform: np.ndarray  # float32, shape (channel_count, samples_per_channel)
    peak_latencies: tuple = ()

    def __post_init__(self):
        wave = np.ascontiguousarray(self.waveform, dtype=np.float32)
        if wave.shape != (self.channel_count, self.samples_per_channel):
            raise ValueError(f"waveform shape {wave.shape} mismatch")
        if self.channel_count * self.samples_per_channel > SAMPLE_CAPACITY:
            raise ValueError("template exceeds record sample capacity")
        if not np.all(np.isfinite(wave)):
            raise ValueError("template must be finite")
        object.__setattr__(self, "waveform", wave)
        if not self.peak_latencies:
            peaks = tuple(int(np.argmax(np.abs(wave[c]))) for c in range(self.channel_count))
            object.__setattr__(self, "peak_latencies", peaks)

    def scaled(self, factor: float) -> "ResponseTemplate":
        return ResponseTemplate(self.modality, self.channel_count,
                                self.samples_per_channel,
                                self.waveform * np.float32(factor))


@dataclass(frozen=True)
class SweepConfig:
    noise_sigma: float
    sweeps_per_average: int
    stim_rate: float
    partial_emit_every: int = 0  # 0 disables partial emission
    rng_seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.sweeps_per_average < 1:
            raise ValueError("sweeps_per_average must be >= 1")


def generate_sweep(tmpl: ResponseTemplate, cfg: SweepConfig, sweep_index: int) -> np.ndarray:
    """One digitized stimulus-locked segment: template + N(0, sigma^2) noise.

    Keyed by (rng_seed, sweep_index, channel); identical inputs give
    identical float32 output on every host.
    """
    if sweep_index < 0:
        raise ValueError("sweep_index must be >= 0")
    out = tmpl.waveform.astype(np.float64)
    if cfg.noise_sigma > 0:
        for ch in range(tmpl.channel_count):
            out[ch] += rng.channel_noise(cfg.rng_seed, sweep_index, ch,
                                         tmpl.samples_per_channel, cfg.noise_sigma)
    return out.astype(np.float32)


def _mean_record(tmpl: ResponseTemplate, cfg: SweepConfig, total: np.ndarray,
                 count: int, timestamp_ms: int, case_id: str,
                 annotation: str = "") -> EpochRecord:
    samples = (total / count).astype(np.float32)
    return EpochRecord(
        modality=tmpl.modality, channel_count=tmpl.channel_count,
        samples_per_channel=tmpl.samples_per_channel, stim_rate=cfg.stim_rate,
        timestamp_ms=timestamp_ms, sweep_count=count, samples=samples,
        case_id=case_id, annotation=annotation)


def run_average(tmpl: ResponseTemplate, cfg: SweepConfig, *, start_sweep: int = 0,
                timestamp_ms: int = 0, case_id: str = "") -> EpochRecord:
    """Arithmetic mean of sweeps_per_average consecutive sweeps."""
    total = np.zeros((tmpl.channel_count, tmpl.samples_per_channel), dtype=np.float64)
    for i in range(cfg.sweeps_per_average):
        total += generate_sweep(tmpl, cfg, start_sweep + i)
    return _mean_record(tmpl, cfg, total, cfg.sweeps_per_average,
                        timestamp_ms, case_id)


class AcquisitionTask:
    """Clock-driven stimulus loop for one case+modality.

    Emits a partial record into the sink every `partial_emit_every` sweeps
    (marked by sweep_count < sweeps_per_average), emits and archives a final
    record each time an average completes, then starts the next average.
    The sweep counter runs across averages so noise never repeats.

    `template_schedule` maps an epoch index to a replacement template from
    that epoch onward, which is how scenario scripts inject amplitude drops.
    """

    def __init__(self, tmpl: ResponseTemplate, cfg: SweepConfig, clock: SimClock,
                 sink: Callable[[EpochRecord, bool], None],
                 archive: CaseArchive | None = None, *, case_id: str = "",
                 max_averages: int | None = None,
                 template_schedule: dict[int, ResponseTemplate] | None = None):
        if cfg.stim_rate <= 0:
            raise ValueError("averaged acquisition needs stim_rate > 0")
        self.tmpl = tmpl
        self.cfg = cfg
        self.clock = clock
        self.sink = sink
        self.archive = archive
        self.case_id = case_id
        self.max_averages = max_averages
        self.template_schedule = dict(template_schedule or {})
        self.epochs_done = 0
        self.stopped = False
        self._sweep_index = 0
        self._in_average = 0
        self._total = np.zeros((tmpl.channel_count, tmpl.samples_per_channel),
                               dtype=np.float64)
        self._start_ms = clock.now_ms
        self._timer = None

    def start(self) -> "AcquisitionTask":
        self._schedule_next()
        return self

    def stop(self) -> None:
        self.stopped = True
        if self._timer is not None:
            self._timer.cancel()

    def _schedule_next(self) -> None:
        if self.stopped:
            return
        period = 1000.0 / self.cfg.stim_rate
        at = self._start_ms + round((self._sweep_index + 1) * period)
        self._timer = self.clock.schedule_at(max(at, self.clock.now_ms), self._on_sweep)

    def _current_template(self) -> ResponseTemplate:
        tmpl = self.tmpl
        for epoch in sorted(self.template_schedule):
            if self.epochs_done >= epoch:
                tmpl = self.template_schedule[epoch]
        return tmpl

    def _on_sweep(self) -> None:
        if self.stopped:
            return
        sweep = generate_sweep(self._current_template(), self.cfg, self._sweep_index)
        self._sweep_index += 1
        self._in_average += 1
        self._total += sweep
        n = self.cfg.sweeps_per_average
        try:
            if self._in_average >= n:
                rec = _mean_record(self.tmpl, self.cfg, self._total, n,
                                   self.clock.now_ms, self.case_id)
                if self.archive is not None:
                    self.archive.append(rec)
                self.epochs_done += 1
                self._total[:] = 0.0
                self._in_average = 0
                self.sink(rec, True)
                if self.max_averages is not None and self.epochs_done >= self.max_averages:
                    self.stop()
                    return
            elif (self.cfg.partial_emit_every
                  and self._in_average % self.cfg.partial_emit_every == 0):
                rec = _mean_record(self.tmpl, self.cfg, self._total,
                                   self._in_average, self.clock.now_ms, self.case_id)
                self.sink(rec, False)
        except SinkClosed:
            self.stop()
            return
        self._schedule_next()


def acquire_case(tmpl: ResponseTemplate, cfg: SweepConfig, clock: SimClock,
                 sink: Callable[[EpochRecord, bool], None],
                 archive: CaseArchive | None = None, **kw) -> AcquisitionTask:
    return AcquisitionTask(tmpl, cfg, clock, sink, archive, **kw).start()


@dataclass(frozen=True)
class ContinuousConfig:
    """Shape of an EEG/EMG stream: chunked filtered noise plus bursts."""

    noise_sigma: float = 1.0
    channel_count: int = 1
    samples_per_chunk: int = 256
    chunk_period_ms: int = 1000
    rng_seed: int = 0
    smooth_window: int = 5
    burst_chunks: tuple = ()
    burst_gain: float = 8.0

    def __post_init__(self):
        if self.noise_sigma < 0 or self.smooth_window < 1:
            raise ValueError("bad continuous config")


def generate_chunk(modality: Modality, cfg: ContinuousConfig, chunk_index: int) -> np.ndarray:
    """One chunk of moving-average-filtered noise, float32 (ch, samples)."""
    out = np.zeros((cfg.channel_count, cfg.samples_per_chunk), dtype=np.float64)
    if cfg.noise_sigma > 0:
        w = cfg.smooth_window
        for ch in range(cfg.channel_count):
            raw = rng.channel_noise(cfg.rng_seed, chunk_index, ch,
                                    cfg.samples_per_chunk + w - 1, cfg.noise_sigma)
            out[ch] = np.convolve(raw, np.ones(w) / w, mode="valid")
    if chunk_index in cfg.burst_chunks:
        out *= cfg.burst_gain
    return out.astype(np.float32)


def generate_continuous(modality: Modality, cfg: ContinuousConfig,
                        duration_chunks: int, *, start_ms: int = 0,
                        case_id: str = "") -> list[EpochRecord]:
    """duration_chunks records with strictly increasing timestamps."""
    if modality not in (Modality.EEG, Modality.EMG):
        raise ValueError("continuous streams are EEG or EMG")
    records = []
    for i in range(duration_chunks):
        samples = generate_chunk(modality, cfg, i)
        records.append(EpochRecord(
            modality=modality, channel_count=cfg.channel_count,
            samples_per_channel=cfg.samples_per_chunk, stim_rate=0.0,
            timestamp_ms=start_ms + (i + 1) * cfg.chunk_period_ms,
            sweep_count=1, samples=samples, case_id=case_id))
    return records


class ContinuousTask:
    """Clock-driven EEG/EMG chunk stream; every chunk is archived."""

    def __init__(self, modality: Modality, cfg: ContinuousConfig, clock: SimClock,
                 sink: Callable[[EpochRecord, bool], None],
                 archive: CaseArchive | None = None, *, case_id: str = "",
                 max_chunks: int | None = None):
        self.modality = modality
        self.cfg = cfg
        self.clock = clock
        self.sink = sink
        self.archive = archive
        self.case_id = case_id
        self.max_chunks = max_chunks
        self.chunks_done = 0
        self.stopped = False
        self._timer = None

    def start(self) -> "ContinuousTask":
        self._timer = self.clock.schedule(self.cfg.chunk_period_ms, self._on_chunk)
        return self

    def stop(self) -> None:
        self.stopped = True
        if self._timer is not None:
            self._timer.cancel()

    def _on_chunk(self) -> None:
        if self.stopped:
            return
        samples = generate_chunk(self.modality, self.cfg, self.chunks_done)
        rec = EpochRecord(
            modality=self.modality, channel_count=self.cfg.channel_count,
            samples_per_channel=self.cfg.samples_per_chunk, stim_rate=0.0,
            timestamp_ms=self.clock.now_ms, sweep_count=1, samples=samples,
            case_id=self.case_id)
        self.chunks_done += 1
        try:
            if self.archive is not None:
                self.archive.append(rec)
            self.sink(rec, True)
        except SinkClosed:
            self.stop()
            return
        if self.max_chunks is not None and self.chunks_done >= self.max_chunks:
            self.stop()
            return
        self._timer = self.clock.schedule(self.cfg.chunk_period_ms, self._on_chunk)


# -- templates -------------------------------------------------------------

def _gauss_peak(n: int, center: float, width: float, amplitude: float) -> np.ndarray:
    t = np.arange(n, dtype=np.float64)
    return amplitude * np.exp(-0.5 * ((t - center) / width) ** 2)


def _peak_train(n: int, peaks: Sequence[tuple[float, float, float]]) -> np.ndarray:
    wave = np.zeros(n, dtype=np.float64)
    for center, width, amplitude in peaks:
        wave += _gauss_peak(n, center, width, amplitude)
    return wave


def make_baep_template() -> ResponseTemplate:
    """Synthetic five-peak brainstem auditory response, 1 channel x 256."""
    n = 256
    wave = _peak_train(n, [(30, 5, 0.35), (60, 6, 0.28), (90, 6, 0.55),
                           (130, 8, 0.40), (170, 9, 0.30)])
    return ResponseTemplate(Modality.BAEP, 1, n, wave[np.newaxis, :].astype(np.float32))


def make_sep_template(modality: Modality = Modality.MEDIAN_SEP) -> ResponseTemplate:
    """Synthetic three-peak somatosensory response, 4 channels x 256."""
    n = 256
    rows = []
    for ch in range(4):
        shift = 6 * ch
        rows.append(_peak_train(n, [(48 + shift, 7, 1.8), (92 + shift, 10, -1.2),
                                    (150 + shift, 14, 0.9)]))
    wave = np.stack(rows).astype(np.float32)
    return ResponseTemplate(modality, 4, n, wave)


def make_vep_template() -> ResponseTemplate:
    n = 256
    wave = _peak_train(n, [(75, 10, -0.8), (120, 12, 1.6), (170, 14, -0.6)])
    return ResponseTemplate(Modality.VEP, 1, n, wave[np.newaxis, :].astype(np.float32))


BUILTIN_TEMPLATES = {
    "baep": make_baep_template,
    "median_sep": lambda: make_sep_template(Modality.MEDIAN_SEP),
    "peroneal_sep": lambda: make_sep_template(Modality.PERONEAL_SEP),
    "vep": make_vep_template,
}


def save_template(tmpl: ResponseTemplate, path: Path | str) -> None:
    """Text template format: header `modality, channels, samples`, then one
    comma-separated line of microvolt values per channel."""
    lines = [f"{tmpl.modality.name}, {tmpl.channel_count}, {tmpl.samples_per_channel}"]
    for ch in range(tmpl.channel_count):
        lines.append(",".join(repr(float(v)) for v in tmpl.waveform[ch]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_template(path: Path | str) -> ResponseTemplate:
    lines = Path(path).read_text(encoding="ascii").splitlines()
    name, channels, samples = (part.strip() for part in lines[0].split(","))
    channel_count, samples_per_channel = int(channels), int(samples)
    wave = np.array([[float(v) for v in lines[1 + ch].split(",")]
                     for ch in range(channel_count)], dtype=np.float32)
    return ResponseTemplate(Modality[name], channel_count, samples_per_channel, wave)


def get_template(name_or_path: str) -> ResponseTemplate:
    if name_or_path in BUILTIN_TEMPLATES:
        return BUILTIN_TEMPLATES[name_or_path]()
    return load_template(name_or_path)
