"""Renderer tests.

oracle_render() re-derives the vector stream from the published terminal
coordinate scheme (high/low tag bits 0x20/0x60 for Y, 0x20/0x40 for X) with
its own layout arithmetic; the committed golden files are generated from it,
never from the production renderer.
"""

from pathlib import Path

import numpy as np
import pytest

from neurorelay import scribe
from neurorelay.oversight.view import Trace, WaterfallView

DATA = Path(__file__).parent / "data"


def make_trace(samples, epoch_index=0, is_baseline=False, ts=0):
    return Trace(epoch_index=epoch_index,
                 samples=np.asarray(samples, dtype=np.float32),
                 timestamp_ms=ts, annotation="", is_baseline=is_baseline)


def fixture_views() -> dict:
    ramp = np.linspace(-1.0, 1.0, 32)[np.newaxis, :]
    t = np.arange(64)
    views = {
        "single": WaterfallView(traces=(make_trace(ramp),)),
        "stacked": WaterfallView(traces=(
            make_trace(np.stack([np.sin(t / 5.0), np.cos(t / 5.0)]), 0, True),
            make_trace(np.stack([np.sin(t / 5.0 + 0.3), np.cos(t / 5.0 + 0.3)]), 1, True),
            make_trace(np.stack([np.sin(t / 4.0), np.cos(t / 4.0)]), 8),
            make_trace(np.stack([np.sin(t / 3.0), np.cos(t / 3.0)]), 9),
        )),
        "full": WaterfallView(traces=tuple(
            make_trace(np.sin(t / (2.0 + k))[np.newaxis, :] * (1 + k / 12), k)
            for k in range(12))),
    }
    return views


def oracle_point(x: int, y: int) -> bytes:
    hi_y = 0x20 | (y >> 5)
    lo_y = 0x60 | (y & 0x1F)
    hi_x = 0x20 | (x >> 5)
    lo_x = 0x40 | (x & 0x1F)
    return bytes([hi_y, lo_y, hi_x, lo_x])


def oracle_render(view) -> bytes:
    """Independent vector-stream construction used to mint the goldens."""
    n = len(view.traces)
    top = bottom = 16
    usable = 780 - top - bottom
    band = usable / n
    peak = max(float(np.max(np.abs(tr.samples))) for tr in view.traces) or 1.0
    stream = bytearray()
    for i, trace in enumerate(view.traces):
        center = 780 - top - (i + 0.5) * band
        channels, samples = trace.samples.shape
        seg = (1024 - 40 - 16) / channels
        for ch in range(channels):
            stream.append(0x1D)
            for j in range(samples):
                x = int(round(40 + ch * seg + (seg - 8) * (j / max(samples - 1, 1))))
                y = int(round(center + 0.45 * band * float(trace.samples[ch, j]) / peak))
                x = min(max(x, 0), 1023)
                y = min(max(y, 0), 779)
                stream += oracle_point(x, y)
    return bytes(stream)


def decode_stream(data: bytes):
    """Test-only decoder: GS-introduced polylines of 4-byte groups."""
    polylines, current, i = [], None, 0
    while i < len(data):
        if data[i] == 0x1D:
            current = []
            polylines.append(current)
            i += 1
            continue
        hi_y, lo_y, hi_x, lo_x = data[i:i + 4]
        assert hi_y & 0xE0 == 0x20 and lo_y & 0xE0 == 0x60
        assert hi_x & 0xE0 == 0x20 and lo_x & 0xE0 == 0x40
        y = ((hi_y & 0x1F) << 5) | (lo_y & 0x1F)
        x = ((hi_x & 0x1F) << 5) | (lo_x & 0x1F)
        current.append((x, y))
        i += 4
    return polylines


def test_origin_point_encoding():
    assert scribe.encode_point(0, 0) == bytes([0x20, 0x60, 0x20, 0x40])
    assert scribe.encode_polyline([(0, 0)]) == bytes([0x1D, 0x20, 0x60, 0x20, 0x40])


def test_corner_point_encoding_matches_oracle():
    # (1023, 779): x -> hi 0x3F lo 0x5F; y = 24*32 + 11 -> hi 0x38 lo 0x6B
    assert oracle_point(1023, 779) == bytes([0x38, 0x6B, 0x3F, 0x5F])
    assert scribe.encode_polyline([(1023, 779)]) == \
        bytes([0x1D]) + oracle_point(1023, 779)


def test_out_of_space_rejected():
    with pytest.raises(ValueError):
        scribe.encode_point(1024, 0)
    with pytest.raises(ValueError):
        scribe.encode_point(0, 780)


def test_coordinate_roundtrip_full_space():
    xs, ys = np.meshgrid(np.arange(1024), np.arange(780))
    xs, ys = xs.ravel(), ys.ravel()
    hi_y = 0x20 | (ys >> 5)
    lo_y = 0x60 | (ys & 31)
    hi_x = 0x20 | (xs >> 5)
    lo_x = 0x40 | (xs & 31)
    back_y = ((hi_y & 0x1F) << 5) | (lo_y & 0x1F)
    back_x = ((hi_x & 0x1F) << 5) | (lo_x & 0x1F)
    assert np.array_equal(back_x, xs) and np.array_equal(back_y, ys)
    # spot-check the scalar functions along the edges and a diagonal
    for x, y in [(0, 0), (1023, 0), (0, 779), (1023, 779)] + \
                [(i, (i * 7) % 780) for i in range(0, 1024, 97)]:
        group = scribe.encode_point(x, y)
        assert decode_stream(bytes([0x1D]) + group) == [[(x, y)]]


def test_golden_streams():
    for name, view in fixture_views().items():
        golden = DATA / f"golden_tek_{name}.bin"
        assert golden.exists(), "regenerate goldens with tests/data/make_goldens.py"
        assert scribe.render_tek(view).data == golden.read_bytes()


def test_rendered_stream_decodes_to_sane_polylines():
    view = fixture_views()["stacked"]
    polylines = decode_stream(scribe.render_tek(view).data)
    assert len(polylines) == 8  # 4 traces x 2 channels
    assert all(len(p) == 64 for p in polylines)


def test_empty_view_rejected():
    with pytest.raises(scribe.EmptyView):
        scribe.render_tek(WaterfallView(traces=()))


def test_transmit_estimate_monotonic_in_trace_count():
    views = fixture_views()
    est = {name: scribe.render_tek(view, throttle_baud=19200).transmit_seconds
           for name, view in views.items()}
    lengths = {name: len(scribe.render_tek(view).data) for name, view in views.items()}
    for name in views:
        assert est[name] == pytest.approx(lengths[name] / 1920.0)
    assert est["single"] < est["stacked"] < est["full"]


def test_raster_determinism_and_size():
    view = fixture_views()["stacked"]
    f1 = scribe.render_raster(view, label="puh_b16204.msp")
    f2 = scribe.render_raster(view, label="puh_b16204.msp")
    assert f1.to_bytes() == f2.to_bytes()
    assert len(f1.to_bytes()) == 8 + (800 // 8) * 600 == f1.frame_size


def test_raster_header_layout():
    frame = scribe.render_raster(fixture_views()["single"])
    head = frame.to_bytes()[:8]
    assert head[:4] == b"NNF1"
    assert int.from_bytes(head[4:6], "little") == 800
    assert int.from_bytes(head[6:8], "little") == 600


def test_empty_composite_is_static_chrome_only():
    frame = scribe.render_composite({})
    assert frame.payload == b"\x00" * len(frame.payload)
    framed = scribe.render_composite({0: ("W0", None)})
    assert framed.payload != b"\x00" * len(framed.payload)  # border + label


def test_golden_square_pulse_frame():
    golden = DATA / "golden_frame.bin"
    pulse = np.zeros((1, 64), dtype=np.float32)
    pulse[0, 16:48] = 1.0
    frame = scribe.render_raster(WaterfallView(traces=(make_trace(pulse),)),
                                 label="pulse")
    assert golden.exists(), "regenerate goldens with tests/data/make_goldens.py"
    assert frame.to_bytes() == golden.read_bytes()
