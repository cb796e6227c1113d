"""Renderers: Tektronix-4010 vector byte streams and monochrome raster frames.

The vector path serves the dial-in terminal use: each waterfall trace
becomes a polyline in the 1024 x 780 terminal coordinate space, encoded as
GS (0x1D) followed by 4-byte coordinate groups

    HiY = 0x20 | (y >> 5)    LoY = 0x60 | (y & 31)
    HiX = 0x20 | (x >> 5)    LoX = 0x40 | (x & 31)

with the unchanged-byte elision deliberately not used, so every point costs
exactly four bytes and golden files stay simple.

The raster path serves screen-capture mode: a deterministic 1-bit frame,
packed rows MSB-first, with an 8-byte header (magic "NNF1", width u16,
height u16, little-endian).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GS = 0x1D
TEK_WIDTH = 1024
TEK_HEIGHT = 780

RASTER_MAGIC = b"NNF1"
FRAME_WIDTH = 800
FRAME_HEIGHT = 600


class EmptyView(Exception):
    pass


@dataclass(frozen=True)
class TekStream:
    data: bytes
    transmit_seconds: float | None = None


@dataclass(frozen=True)
class RasterFrame:
    width: int
    height: int
    payload: bytes  # ceil(width/8) * height packed bytes
    timestamp_ms: int = 0

    def to_bytes(self) -> bytes:
        head = RASTER_MAGIC + self.width.to_bytes(2, "little") + \
            self.height.to_bytes(2, "little")
        return head + self.payload

    @property
    def frame_size(self) -> int:
        return 8 + ((self.width + 7) // 8) * self.height


def encode_point(x: int, y: int) -> bytes:
    if not (0 <= x < TEK_WIDTH and 0 <= y < TEK_HEIGHT):
        raise ValueError(f"({x}, {y}) outside the {TEK_WIDTH}x{TEK_HEIGHT} space")
    return bytes((0x20 | (y >> 5), 0x60 | (y & 31), 0x20 | (x >> 5), 0x40 | (x & 31)))


def encode_polyline(points) -> bytes:
    out = bytearray([GS])
    for x, y in points:
        out += encode_point(x, y)
    return bytes(out)


def _trace_geometry(n_traces: int, height: int, top: int = 16, bottom: int = 16):
    usable = height - top - bottom
    band = usable / n_traces
    centers = [height - top - (i + 0.5) * band for i in range(n_traces)]
    return band, centers


def _view_scale(view) -> float:
    peak = 0.0
    for trace in view.traces:
        peak = max(peak, float(np.max(np.abs(trace.samples))) if trace.samples.size else 0.0)
    return peak if peak > 0 else 1.0


def render_tek(view, throttle_baud: int | None = None) -> TekStream:
    """Waterfall polylines, first trace at the top, channels side by side."""
    if not view.traces:
        raise EmptyView("nothing to draw")
    n = len(view.traces)
    band, centers = _trace_geometry(n, TEK_HEIGHT)
    peak = _view_scale(view)
    margin_l, margin_r = 40, 16
    span = TEK_WIDTH - margin_l - margin_r
    out = bytearray()
    for i, trace in enumerate(view.traces):
        channels, samples = trace.samples.shape
        seg = span / channels
        for ch in range(channels):
            x0 = margin_l + ch * seg
            pts = []
            for j in range(samples):
                x = int(round(x0 + (seg - 8) * (j / max(samples - 1, 1))))
                y = int(round(centers[i] + 0.45 * band * float(trace.samples[ch, j]) / peak))
                pts.append((min(max(x, 0), TEK_WIDTH - 1),
                            min(max(y, 0), TEK_HEIGHT - 1)))
            out += encode_polyline(pts)
    data = bytes(out)
    transmit = len(data) / (throttle_baud / 10.0) if throttle_baud else None
    return TekStream(data=data, transmit_seconds=transmit)


# -- raster ------------------------------------------------------------------

FONT_5X7 = {
    "0": (0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E),
    "1": (0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E),
    "2": (0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F),
    "3": (0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E),
    "4": (0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02),
    "5": (0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E),
    "6": (0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E),
    "7": (0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08),
    "8": (0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E),
    "9": (0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C),
    "A": (0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11),
    "B": (0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E),
    "C": (0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E),
    "D": (0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C),
    "E": (0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F),
    "F": (0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10),
    "G": (0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F),
    "H": (0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11),
    "I": (0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E),
    "J": (0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C),
    "K": (0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11),
    "L": (0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F),
    "M": (0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11),
    "N": (0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11),
    "O": (0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E),
    "P": (0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10),
    "Q": (0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D),
    "R": (0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11),
    "S": (0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E),
    "T": (0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04),
    "U": (0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E),
    "V": (0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04),
    "W": (0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11),
    "X": (0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11),
    "Y": (0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04),
    "Z": (0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F),
    ":": (0x00, 0x04, 0x00, 0x00, 0x04, 0x00, 0x00),
    ".": (0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x04),
    "-": (0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00),
    "_": (0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F),
    "/": (0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10),
    " ": (0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00),
}


class Canvas:
    """1-bit drawing surface; y grows downward."""

    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.bits = np.zeros((height, width), dtype=np.uint8)

    def set(self, x: int, y: int) -> None:
        if 0 <= x < self.width and 0 <= y < self.height:
            self.bits[y, x] = 1

    def line(self, x0: int, y0: int, x1: int, y1: int) -> None:
        dx, dy = abs(x1 - x0), -abs(y1 - y0)
        sx = 1 if x0 < x1 else -1
        sy = 1 if y0 < y1 else -1
        err = dx + dy
        while True:
            self.set(x0, y0)
            if x0 == x1 and y0 == y1:
                return
            e2 = 2 * err
            if e2 >= dy:
                err += dy
                x0 += sx
            if e2 <= dx:
                err += dx
                y0 += sy

    def rect(self, x0: int, y0: int, x1: int, y1: int) -> None:
        self.line(x0, y0, x1, y0)
        self.line(x1, y0, x1, y1)
        self.line(x1, y1, x0, y1)
        self.line(x0, y1, x0, y0)

    def text(self, x: int, y: int, s: str) -> None:
        for k, ch in enumerate(s.upper()):
            glyph = FONT_5X7.get(ch, FONT_5X7[" "])
            gx = x + k * 6
            for row, bits in enumerate(glyph):
                for col in range(5):
                    if bits & (1 << (4 - col)):
                        self.set(gx + col, y + row)

    def packed(self) -> bytes:
        return np.packbits(self.bits, axis=1).tobytes()


def _draw_view(canvas: Canvas, view, x0: int, y0: int, w: int, h: int,
               label: str = "") -> None:
    canvas.rect(x0, y0, x0 + w - 1, y0 + h - 1)
    if label:
        canvas.text(x0 + 3, y0 + 2, label[: (w - 6) // 6])
    plot_top = y0 + 11
    plot_h = h - 13
    if not view or not view.traces or plot_h <= 0:
        return
    n = len(view.traces)
    band = plot_h / n
    peak = _view_scale(view)
    for i, trace in enumerate(view.traces):
        channels, samples = trace.samples.shape
        seg = (w - 8) / channels
        cy = plot_top + (i + 0.5) * band
        prev = None
        for ch in range(channels):
            cx0 = x0 + 4 + ch * seg
            prev = None
            for j in range(samples):
                px = int(round(cx0 + (seg - 4) * (j / max(samples - 1, 1))))
                py = int(round(cy - 0.45 * band * float(trace.samples[ch, j]) / peak))
                if prev is not None:
                    canvas.line(prev[0], prev[1], px, py)
                prev = (px, py)


def render_raster(view, *, label: str = "", width: int = FRAME_WIDTH,
                  height: int = FRAME_HEIGHT, timestamp_ms: int = 0) -> RasterFrame:
    """One view as a full frame. Identical views give identical bytes."""
    canvas = Canvas(width, height)
    _draw_view(canvas, view, 0, 0, width, height, label)
    return RasterFrame(width, height, canvas.packed(), timestamp_ms)


def render_composite(labeled_views: dict[int, tuple[str, object]], *,
                     width: int = FRAME_WIDTH, height: int = FRAME_HEIGHT,
                     grid: int = 4, timestamp_ms: int = 0) -> RasterFrame:
    """The OR-side screen: a 4x4 grid of window thumbnails by slot index."""
    canvas = Canvas(width, height)
    cell_w, cell_h = width // grid, height // grid
    for slot, (label, view) in sorted(labeled_views.items()):
        row, col = divmod(slot, grid)
        if row >= grid:
            continue
        _draw_view(canvas, view, col * cell_w, row * cell_h, cell_w, cell_h, label)
    return RasterFrame(width, height, canvas.packed(), timestamp_ms)
