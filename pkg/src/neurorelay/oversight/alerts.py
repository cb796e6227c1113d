"""Threshold comparator for epoch-to-epoch change detection.

Each new average is compared against both the immediately preceding epoch
and a designated baseline epoch, per channel: peak amplitude is the maximum
absolute sample in the analysis window and peak latency its sample index.
A drop below (1 - amplitude threshold) of the reference peak or a latency
excursion beyond the latency threshold fraction of the reference latency
raises an alert naming the reference that triggered it.

The 50% amplitude / 10% latency defaults are conventional clinical
heuristics shipped as configuration, not derived quantities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..wirerec import EpochRecord


class ShapeMismatch(Exception):
    pass


@dataclass(frozen=True)
class Thresholds:
    amplitude_drop: float = 0.5
    latency_shift: float = 0.1


@dataclass
class AlertEvent:
    kind: str  # "AmplitudeDrop" | "LatencyShift"
    channel: int
    magnitude: float
    epoch_index: int
    reference: str  # "preceding" | "baseline"
    reference_index: int
    case_label: str = ""
    timestamp_ms: int = 0
    alert_id: int = 0
    acknowledged: bool = False

    def line(self) -> str:
        return "\t".join((
            str(self.timestamp_ms), self.case_label, self.kind,
            f"ch{self.channel}", f"{self.magnitude:.4f}",
            f"epoch{self.epoch_index}", self.reference,
            f"ref{self.reference_index}"))


def _peaks(rec: EpochRecord, window: tuple[int, int] | None):
    a, b = (0, rec.samples_per_channel) if window is None else window
    segment = np.abs(rec.samples[:, a:b].astype(np.float64))
    latencies = segment.argmax(axis=1) + a
    peaks = segment.max(axis=1)
    return peaks, latencies


def detect_change(current: EpochRecord, preceding: EpochRecord,
                  baseline: EpochRecord, thresholds: Thresholds = Thresholds(),
                  analysis_window: tuple[int, int] | None = None, *,
                  epoch_index: int = -1, preceding_index: int = -1,
                  baseline_index: int = 0) -> list[AlertEvent]:
    for other in (preceding, baseline):
        if (other.modality != current.modality
                or other.samples.shape != current.samples.shape):
            raise ShapeMismatch("records differ in modality or shape")
    cur_peaks, cur_lats = _peaks(current, analysis_window)
    events: list[AlertEvent] = []
    for ref_name, ref_rec, ref_index in (("preceding", preceding, preceding_index),
                                         ("baseline", baseline, baseline_index)):
        ref_peaks, ref_lats = _peaks(ref_rec, analysis_window)
        for ch in range(current.channel_count):
            if ref_peaks[ch] > 0:
                ratio = cur_peaks[ch] / ref_peaks[ch]
                if ratio < (1.0 - thresholds.amplitude_drop):
                    events.append(AlertEvent(
                        kind="AmplitudeDrop", channel=ch,
                        magnitude=float(1.0 - ratio), epoch_index=epoch_index,
                        reference=ref_name, reference_index=ref_index,
                        timestamp_ms=current.timestamp_ms))
            if ref_lats[ch] > 0:
                shift = abs(int(cur_lats[ch]) - int(ref_lats[ch])) / float(ref_lats[ch])
                if shift > thresholds.latency_shift:
                    events.append(AlertEvent(
                        kind="LatencyShift", channel=ch, magnitude=float(shift),
                        epoch_index=epoch_index, reference=ref_name,
                        reference_index=ref_index,
                        timestamp_ms=current.timestamp_ms))
    return events
