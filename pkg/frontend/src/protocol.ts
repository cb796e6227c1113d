// Gateway wire protocol: line-delimited JSON, versioned. The client is a
// thin viewer -- it only ever sends control/chat/ack/mode messages and
// reconstructs all UI state from the latest snapshot plus the alert and
// chat logs it carries.

export interface TraceMsg {
  epoch: number;
  baseline: boolean;
  ts: number;
  channels: number[][];
}

export interface WindowMsg {
  slot: number;
  label: string;
  epochs: number;
  gains: number[];
  smooth: boolean;
  basecorr: boolean;
  baselines: number[];
  range: [number, number] | null;
  traces: TraceMsg[];
}

export interface AlertMsg {
  id: number;
  kind: string;
  case: string;
  channel: number;
  magnitude: number;
  epoch: number;
  reference: string;
  ack: boolean;
  ts: number;
}

export interface ChatMsg {
  author: string;
  case: string;
  text: string;
  ts: number;
}

export interface SnapshotMsg {
  t: "snapshot";
  v: number;
  now_ms: number;
  mode: "full" | "capture";
  windows: WindowMsg[];
  alerts: AlertMsg[];
  chat: ChatMsg[];
  notices: string[];
}

export interface FrameMsg {
  t: "frame";
  v: number;
  ts: number;
  data: string; // base64 NNF1 bitmap
}

export interface ErrorMsg {
  t: "error";
  message: string;
}

export interface OkMsg {
  t: "ok";
  for: string;
}

export interface ModeMsg {
  t: "mode";
  mode: "full" | "capture";
}

export type ServerMessage = SnapshotMsg | FrameMsg | ErrorMsg | OkMsg | ModeMsg;

function isStringArray(v: unknown): v is string[] {
  return Array.isArray(v) && v.every((x) => typeof x === "string");
}

export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const msg = data as Record<string, unknown>;
  switch (msg.t) {
    case "snapshot": {
      if (!Array.isArray(msg.windows) || !Array.isArray(msg.alerts)) return null;
      if (msg.mode !== "full" && msg.mode !== "capture") return null;
      return {
        t: "snapshot",
        v: Number(msg.v ?? 1),
        now_ms: Number(msg.now_ms ?? 0),
        mode: msg.mode,
        windows: msg.windows as WindowMsg[],
        alerts: msg.alerts as AlertMsg[],
        chat: Array.isArray(msg.chat) ? (msg.chat as ChatMsg[]) : [],
        notices: isStringArray(msg.notices) ? msg.notices : [],
      };
    }
    case "frame":
      if (typeof msg.data !== "string") return null;
      return { t: "frame", v: Number(msg.v ?? 1), ts: Number(msg.ts ?? 0), data: msg.data };
    case "error":
      return { t: "error", message: String(msg.message ?? "unknown error") };
    case "ok":
      return { t: "ok", for: String(msg.for ?? "") };
    case "mode":
      if (msg.mode !== "full" && msg.mode !== "capture") return null;
      return { t: "mode", mode: msg.mode };
    default:
      return null;
  }
}

export type ClientMessage =
  | { t: "control"; line: string }
  | { t: "chat"; slot: number; text: string }
  | { t: "ack"; id: number }
  | { t: "mode" };

export function encodeClientMessage(msg: ClientMessage): string {
  return JSON.stringify(msg);
}
