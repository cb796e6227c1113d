"""Waterfall view assembly.

A view is at most 12 traces: the window's two baseline epochs first, then
the 10 most recent epochs of the selected range in chronological order.
Per-channel gain and the display enhancements are applied here, on copies,
so the cached records stay pristine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..wirerec import EpochRecord

RECENT_TRACES = 10


class NoEpochs(Exception):
    pass


@dataclass(frozen=True)
class Trace:
    epoch_index: int
    samples: np.ndarray  # float32 (channels, samples), scaled for display
    timestamp_ms: int
    annotation: str
    is_baseline: bool


@dataclass(frozen=True)
class WaterfallView:
    traces: tuple


def smooth5(samples: np.ndarray) -> np.ndarray:
    """5-point centered moving average per channel, zero-padded at the edges."""
    kernel = np.ones(5, dtype=np.float64) / 5.0
    out = np.stack([np.convolve(row.astype(np.float64), kernel, mode="same")
                    for row in samples])
    return out.astype(np.float32)


def baseline_correct(samples: np.ndarray) -> np.ndarray:
    """Subtract each channel's mean over the first 10% of samples."""
    head = max(1, samples.shape[1] // 10)
    offsets = samples[:, :head].astype(np.float64).mean(axis=1, keepdims=True)
    return (samples.astype(np.float64) - offsets).astype(np.float32)


def render_trace(rec: EpochRecord, gains, smooth: bool, basecorr: bool,
                 epoch_index: int, is_baseline: bool) -> Trace:
    g = np.asarray(gains[: rec.channel_count], dtype=np.float32).reshape(-1, 1)
    samples = rec.samples * g
    if smooth:
        samples = smooth5(samples)
    if basecorr:
        samples = baseline_correct(samples)
    return Trace(epoch_index=epoch_index, samples=samples,
                 timestamp_ms=rec.timestamp_ms, annotation=rec.annotation,
                 is_baseline=is_baseline)


def build_view(window, records: list[EpochRecord]) -> WaterfallView:
    """Baselines that exist, then the last 10 epochs of the window's range.

    An epoch may appear both as baseline and as a recent trace when the case
    is younger than 10 epochs; that duplication is intended.
    """
    if not records:
        raise NoEpochs(f"window {window.slot} has no epochs")
    n = len(records)
    if window.range_mode is None:
        lo, hi = 0, n - 1
    else:
        lo, hi = max(window.range_mode[0], 0), min(window.range_mode[1], n - 1)
        if lo > hi:
            raise NoEpochs(f"range {window.range_mode} selects nothing")
    traces = []
    for b in window.baselines:
        if 0 <= b < n:
            traces.append(render_trace(records[b], window.gains, window.smooth,
                                       window.basecorr, b, True))
    recent_lo = max(lo, hi - (RECENT_TRACES - 1))
    for i in range(recent_lo, hi + 1):
        traces.append(render_trace(records[i], window.gains, window.smooth,
                                   window.basecorr, i, False))
    return WaterfallView(traces=tuple(traces))
