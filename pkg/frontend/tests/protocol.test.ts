import { describe, expect, it } from "vitest";
import { encodeClientMessage, parseServerMessage } from "../src/protocol.js";

const SNAPSHOT = {
  t: "snapshot", v: 1, now_ms: 12_000, mode: "full",
  windows: [{
    slot: 0, label: "or-east:puh_b16204.msp", epochs: 3,
    gains: [1, 1, 1, 1, 1, 1, 1, 1], smooth: false, basecorr: false,
    baselines: [0, 1], range: null,
    traces: [{ epoch: 0, baseline: true, ts: 5, channels: [[0, 1, 0]] }],
  }],
  alerts: [], chat: [], notices: [],
};

describe("parseServerMessage", () => {
  it("parses a snapshot", () => {
    const msg = parseServerMessage(JSON.stringify(SNAPSHOT));
    expect(msg?.t).toBe("snapshot");
    if (msg?.t === "snapshot") {
      expect(msg.windows[0].label).toBe("or-east:puh_b16204.msp");
      expect(msg.mode).toBe("full");
    }
  });

  it("rejects garbage without throwing", () => {
    expect(parseServerMessage("not json at all")).toBeNull();
    expect(parseServerMessage("42")).toBeNull();
    expect(parseServerMessage('{"t":"snapshot"}')).toBeNull();
    expect(parseServerMessage('{"t":"wat"}')).toBeNull();
    expect(parseServerMessage('{"t":"mode","mode":"sideways"}')).toBeNull();
  });

  it("parses errors, acks, frames and mode replies", () => {
    expect(parseServerMessage('{"t":"error","message":"nope"}'))
      .toEqual({ t: "error", message: "nope" });
    expect(parseServerMessage('{"t":"ok","for":"control"}'))
      .toEqual({ t: "ok", for: "control" });
    expect(parseServerMessage('{"t":"mode","mode":"capture"}'))
      .toEqual({ t: "mode", mode: "capture" });
    const frame = parseServerMessage('{"t":"frame","v":1,"ts":9,"data":"QUJD"}');
    expect(frame?.t).toBe("frame");
  });
});

describe("encodeClientMessage", () => {
  it("encodes the four client message kinds", () => {
    expect(JSON.parse(encodeClientMessage({ t: "control", line: "win 0 gain 1 2" })))
      .toEqual({ t: "control", line: "win 0 gain 1 2" });
    expect(JSON.parse(encodeClientMessage({ t: "chat", slot: 2, text: "hi" })))
      .toEqual({ t: "chat", slot: 2, text: "hi" });
    expect(JSON.parse(encodeClientMessage({ t: "ack", id: 7 })))
      .toEqual({ t: "ack", id: 7 });
    expect(JSON.parse(encodeClientMessage({ t: "mode" }))).toEqual({ t: "mode" });
  });
});
