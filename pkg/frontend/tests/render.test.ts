import { describe, expect, it } from "vitest";
import type { TraceMsg } from "../src/protocol.js";
import { cellRect, slotAt, tracePolylines, viewPeak } from "../src/render.js";

function trace(channels: number[][], baseline = false): TraceMsg {
  return { epoch: 0, baseline, ts: 0, channels };
}

describe("cellRect", () => {
  it("packs 16 slots into a 4x4 grid", () => {
    expect(cellRect(0, 800, 600)).toEqual({ x: 0, y: 0, w: 200, h: 150 });
    expect(cellRect(3, 800, 600)).toEqual({ x: 600, y: 0, w: 200, h: 150 });
    expect(cellRect(4, 800, 600)).toEqual({ x: 0, y: 150, w: 200, h: 150 });
    expect(cellRect(15, 800, 600)).toEqual({ x: 600, y: 450, w: 200, h: 150 });
  });

  it("round-trips through hit testing", () => {
    for (let slot = 0; slot < 16; slot++) {
      const rect = cellRect(slot, 800, 600);
      expect(slotAt(rect.x + rect.w / 2, rect.y + rect.h / 2, 800, 600)).toBe(slot);
    }
  });
});

describe("tracePolylines", () => {
  const rect = { x: 0, y: 0, w: 200, h: 150 };

  it("keeps every point inside the cell", () => {
    const t = trace([[1, -1, 0.5, -0.5], [0.2, 0.8, -0.9, 0]]);
    for (let i = 0; i < 12; i++) {
      for (const line of tracePolylines(t, i, 12, rect, viewPeak([t]))) {
        for (const [x, y] of line) {
          expect(x).toBeGreaterThanOrEqual(rect.x);
          expect(x).toBeLessThanOrEqual(rect.x + rect.w);
          expect(y).toBeGreaterThanOrEqual(rect.y);
          expect(y).toBeLessThanOrEqual(rect.y + rect.h);
        }
      }
    }
  });

  it("stacks traces top to bottom, one polyline per channel", () => {
    const t = trace([[0, 0], [0, 0]]);
    const first = tracePolylines(t, 0, 4, rect, 1);
    const last = tracePolylines(t, 3, 4, rect, 1);
    expect(first).toHaveLength(2);
    expect(first[0][0][1]).toBeLessThan(last[0][0][1]);
  });

  it("scales amplitude by the shared view peak", () => {
    const quiet = trace([[0.1]]);
    const loud = trace([[1.0]]);
    const peak = viewPeak([quiet, loud]);
    expect(peak).toBe(1.0);
    const yQuiet = tracePolylines(quiet, 0, 2, rect, peak)[0][0][1];
    const yLoud = tracePolylines(loud, 0, 2, rect, peak)[0][0][1];
    expect(Math.abs(yLoud - yQuiet)).toBeGreaterThan(1);
  });

  it("defaults the peak to 1 for all-zero views", () => {
    expect(viewPeak([trace([[0, 0, 0]])])).toBe(1);
  });
});
