// Console state and its reducer. All mutation flows through reduce(), and
// the state is rebuilt from each snapshot, so a page refresh (or a
// reconnect) recovers the exact UI from the next snapshot alone.

import type { AlertMsg, ServerMessage, SnapshotMsg, WindowMsg } from "./protocol.js";
import { decodeFrame, type DecodedFrame } from "./frame.js";

// an optimistic local control not yet confirmed by a snapshot
export interface PendingControl {
  slot: number;
  field: "gain" | "range" | "smooth" | "basecorr" | "baselines" | "follow";
  channel?: number;
  value: unknown;
  snapshotsLeft: number; // reconcile within this many snapshots, then drop
}

export interface ConsoleState {
  connected: boolean;
  mode: "full" | "capture" | null;
  nowMs: number;
  windows: WindowMsg[];
  alerts: AlertMsg[];
  chat: SnapshotMsg["chat"];
  notices: string[];
  frame: DecodedFrame | null;
  pending: PendingControl[];
  errors: string[];
  snapshotCount: number;
}

export const RECONCILE_SNAPSHOTS = 2;

export function initialState(): ConsoleState {
  return {
    connected: false,
    mode: null,
    nowMs: 0,
    windows: [],
    alerts: [],
    chat: [],
    notices: [],
    frame: null,
    pending: [],
    errors: [],
    snapshotCount: 0,
  };
}

export function controlsEnabled(state: ConsoleState): boolean {
  return state.connected && state.mode === "full";
}

export function activeAlerts(state: ConsoleState): AlertMsg[] {
  return state.alerts.filter((a) => !a.ack);
}

function confirmed(p: PendingControl, win: WindowMsg): boolean {
  switch (p.field) {
    case "gain":
      return win.gains[p.channel ?? 0] === p.value;
    case "smooth":
      return win.smooth === p.value;
    case "basecorr":
      return win.basecorr === p.value;
    case "baselines":
      return JSON.stringify(win.baselines) === JSON.stringify(p.value);
    case "range":
      return JSON.stringify(win.range) === JSON.stringify(p.value);
    case "follow":
      return win.range === null;
  }
}

function overlay(windows: WindowMsg[], pending: PendingControl[]): WindowMsg[] {
  if (pending.length === 0) return windows;
  return windows.map((win) => {
    const mine = pending.filter((p) => p.slot === win.slot);
    if (mine.length === 0) return win;
    const copy: WindowMsg = { ...win, gains: [...win.gains] };
    for (const p of mine) {
      switch (p.field) {
        case "gain":
          copy.gains[p.channel ?? 0] = p.value as number;
          break;
        case "smooth":
          copy.smooth = p.value as boolean;
          break;
        case "basecorr":
          copy.basecorr = p.value as boolean;
          break;
        case "baselines":
          copy.baselines = p.value as number[];
          break;
        case "range":
          copy.range = p.value as [number, number];
          break;
        case "follow":
          copy.range = null;
          break;
      }
    }
    return copy;
  });
}

export function applyLocalControl(state: ConsoleState, p: Omit<PendingControl, "snapshotsLeft">): ConsoleState {
  const pend: PendingControl = { ...p, snapshotsLeft: RECONCILE_SNAPSHOTS };
  const pending = [...state.pending.filter(
    (q) => !(q.slot === p.slot && q.field === p.field && q.channel === p.channel)), pend];
  return { ...state, pending, windows: overlay(state.windows, pending) };
}

export function reduce(state: ConsoleState, msg: ServerMessage): ConsoleState {
  switch (msg.t) {
    case "snapshot": {
      // reconcile optimism: confirmed entries drop out; stale ones expire
      const pending = state.pending
        .map((p) => ({ ...p, snapshotsLeft: p.snapshotsLeft - 1 }))
        .filter((p) => {
          const win = msg.windows.find((w) => w.slot === p.slot);
          if (win === undefined) return false;
          if (confirmed(p, win)) return false;
          return p.snapshotsLeft > 0;
        });
      return {
        ...state,
        mode: msg.mode,
        nowMs: msg.now_ms,
        windows: overlay(msg.windows, pending),
        alerts: msg.alerts,
        chat: msg.chat,
        notices: msg.notices,
        pending,
        snapshotCount: state.snapshotCount + 1,
      };
    }
    case "frame":
      return { ...state, frame: decodeFrame(msg.data) };
    case "error":
      return { ...state, errors: [...state.errors.slice(-19), msg.message] };
    case "mode":
      return { ...state, mode: msg.mode };
    case "ok":
      return state;
  }
}

export function setConnected(state: ConsoleState, connected: boolean): ConsoleState {
  return { ...state, connected };
}
