// Waterfall grid geometry and immediate-mode canvas drawing. The geometry
// helpers are pure so tests can pin the layout without a DOM.

import type { TraceMsg, WindowMsg } from "./protocol.js";

export const GRID_COLS = 4;
export const GRID_ROWS = 4;

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export function cellRect(slot: number, width: number, height: number): Rect {
  const w = Math.floor(width / GRID_COLS);
  const h = Math.floor(height / GRID_ROWS);
  const row = Math.floor(slot / GRID_COLS);
  const col = slot % GRID_COLS;
  return { x: col * w, y: row * h, w, h };
}

export function viewPeak(traces: TraceMsg[]): number {
  let peak = 0;
  for (const trace of traces) {
    for (const channel of trace.channels) {
      for (const v of channel) {
        const a = Math.abs(v);
        if (a > peak) peak = a;
      }
    }
  }
  return peak > 0 ? peak : 1;
}

// one polyline per channel: [x, y] pairs inside the cell's plot area
export function tracePolylines(
  trace: TraceMsg, traceIndex: number, traceCount: number, rect: Rect, peak: number,
): [number, number][][] {
  const top = rect.y + 14;
  const plotH = rect.h - 18;
  const band = plotH / traceCount;
  const centerY = top + (traceIndex + 0.5) * band;
  const channels = trace.channels.length;
  const seg = (rect.w - 10) / channels;
  const lines: [number, number][][] = [];
  for (let c = 0; c < channels; c++) {
    const x0 = rect.x + 5 + c * seg;
    const samples = trace.channels[c];
    const n = Math.max(samples.length - 1, 1);
    const pts: [number, number][] = [];
    for (let j = 0; j < samples.length; j++) {
      const x = x0 + ((seg - 4) * j) / n;
      const y = centerY - 0.45 * band * (samples[j] / peak);
      pts.push([x, y]);
    }
    lines.push(pts);
  }
  return lines;
}

export interface DrawStyle {
  background: string;
  border: string;
  borderSelected: string;
  label: string;
  baseline: string;
  recent: string;
}

export const DEFAULT_STYLE: DrawStyle = {
  background: "#0b0f0c",
  border: "#274032",
  borderSelected: "#7fe89a",
  label: "#9adfae",
  baseline: "#f2d98c",
  recent: "#7fe89a",
};

export function drawGrid(
  ctx: CanvasRenderingContext2D, windows: WindowMsg[], width: number,
  height: number, selectedSlot: number | null, style: DrawStyle = DEFAULT_STYLE,
): void {
  ctx.fillStyle = style.background;
  ctx.fillRect(0, 0, width, height);
  for (const win of windows) {
    const rect = cellRect(win.slot, width, height);
    ctx.strokeStyle = win.slot === selectedSlot ? style.borderSelected : style.border;
    ctx.lineWidth = 1;
    ctx.strokeRect(rect.x + 0.5, rect.y + 0.5, rect.w - 1, rect.h - 1);
    ctx.fillStyle = style.label;
    ctx.font = "10px monospace";
    ctx.fillText(win.label, rect.x + 4, rect.y + 10, rect.w - 8);
    const peak = viewPeak(win.traces);
    win.traces.forEach((trace, i) => {
      ctx.strokeStyle = trace.baseline ? style.baseline : style.recent;
      ctx.lineWidth = trace.baseline ? 1.4 : 0.8;
      for (const line of tracePolylines(trace, i, win.traces.length, rect, peak)) {
        ctx.beginPath();
        line.forEach(([x, y], j) => (j === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
        ctx.stroke();
      }
    });
  }
}

export function slotAt(px: number, py: number, width: number, height: number): number {
  const col = Math.min(GRID_COLS - 1, Math.floor((px / width) * GRID_COLS));
  const row = Math.min(GRID_ROWS - 1, Math.floor((py / height) * GRID_ROWS));
  return row * GRID_COLS + col;
}
