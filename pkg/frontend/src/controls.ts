// UI actions map 1:1 onto the session's control-line grammar. Every
// function returns the exact line the gateway forwards to the session;
// nothing else about the protocol is control-specific.

export function gainLine(slot: number, channel: number, value: number): string {
  return `win ${slot} gain ${channel} ${value}`;
}

export function rangeLine(slot: number, a: number, b: number): string {
  return `win ${slot} range ${a} ${b}`;
}

export function followLine(slot: number): string {
  return `win ${slot} follow`;
}

export function enhLine(slot: number, which: "smooth" | "basecorr", on: boolean): string {
  return `win ${slot} enh ${which} ${on ? "on" : "off"}`;
}

export function baselinesLine(slot: number, i: number, j: number): string {
  return `win ${slot} baselines ${i} ${j}`;
}

export function killLine(slot: number): string {
  return `win ${slot} kill`;
}

// reconnect backoff: 1s, 2s, 4s, ... capped at 15s
export function reconnectDelayMs(attempt: number): number {
  return Math.min(1000 * 2 ** Math.max(0, attempt), 15_000);
}
