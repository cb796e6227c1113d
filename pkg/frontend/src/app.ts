// DOM wiring: one WebSocket, one reducer, one animation-frame repaint.

import {
  encodeClientMessage, parseServerMessage, type WindowMsg,
} from "./protocol.js";
import {
  applyLocalControl, activeAlerts, controlsEnabled, initialState, reduce,
  setConnected, type ConsoleState,
} from "./state.js";
import {
  baselinesLine, enhLine, followLine, gainLine, killLine, rangeLine,
  reconnectDelayMs,
} from "./controls.js";
import { drawGrid, slotAt } from "./render.js";

let state: ConsoleState = initialState();
let socket: WebSocket | null = null;
let reconnectAttempt = 0;
let selectedSlot: number | null = null;
let repaintQueued = false;

const $ = (id: string) => document.getElementById(id)!;
const canvas = $("grid") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const frameCanvas = $("frame") as HTMLCanvasElement;

function wsUrl(): string {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}/ws`;
}

function send(msg: Parameters<typeof encodeClientMessage>[0]): void {
  if (socket !== null && socket.readyState === WebSocket.OPEN) {
    socket.send(encodeClientMessage(msg));
  }
}

function connect(): void {
  socket = new WebSocket(wsUrl());
  socket.onopen = () => {
    reconnectAttempt = 0;
    state = setConnected(state, true);
    send({ t: "mode" });
    queueRepaint();
  };
  socket.onmessage = (event) => {
    const msg = parseServerMessage(String(event.data));
    if (msg !== null) {
      state = reduce(state, msg);
      queueRepaint();
    }
  };
  socket.onclose = () => {
    state = setConnected(state, false);
    queueRepaint();
    const delay = reconnectDelayMs(reconnectAttempt++);
    setTimeout(connect, delay);
  };
  socket.onerror = () => socket?.close();
}

function queueRepaint(): void {
  if (repaintQueued) return;
  repaintQueued = true;
  requestAnimationFrame(() => {
    repaintQueued = false;
    repaint();
  });
}

function selectedWindow(): WindowMsg | undefined {
  return state.windows.find((w) => w.slot === selectedSlot);
}

function repaint(): void {
  $("banner").className = state.connected ? "banner ok" : "banner lost";
  $("banner").textContent = state.connected
    ? `connected - ${state.mode ?? "?"} mode - t=${(state.nowMs / 1000).toFixed(0)}s`
    : "connection lost - reconnecting";

  const capture = state.mode === "capture";
  $("grid-wrap").style.display = capture ? "none" : "block";
  $("frame-wrap").style.display = capture ? "block" : "none";
  if (capture && state.frame !== null) {
    frameCanvas.width = state.frame.width;
    frameCanvas.height = state.frame.height;
    const image = new ImageData(state.frame.rgba, state.frame.width, state.frame.height);
    frameCanvas.getContext("2d")!.putImageData(image, 0, 0);
  } else {
    drawGrid(ctx, state.windows, canvas.width, canvas.height, selectedSlot);
  }

  renderAlerts();
  renderChat();
  renderControls();
  $("notices").textContent = state.notices.concat(state.errors.slice(-3)).join("\n");
}

function renderAlerts(): void {
  const list = $("alerts");
  list.replaceChildren();
  for (const alert of activeAlerts(state).slice(-30).reverse()) {
    const li = document.createElement("li");
    li.textContent = `#${alert.id} ${alert.kind} ${alert.case} ch${alert.channel} ` +
      `x${alert.magnitude.toFixed(2)} epoch ${alert.epoch} vs ${alert.reference} `;
    const ack = document.createElement("button");
    ack.textContent = "ack";
    ack.onclick = () => send({ t: "ack", id: alert.id });
    li.appendChild(ack);
    list.appendChild(li);
  }
}

function renderChat(): void {
  const log = $("chat-log");
  log.replaceChildren();
  for (const entry of state.chat.slice(-40)) {
    const div = document.createElement("div");
    div.textContent = `[${entry.case}] ${entry.author}: ${entry.text}`;
    log.appendChild(div);
  }
  log.scrollTop = log.scrollHeight;
}

function renderControls(): void {
  const panel = $("controls");
  const enabled = controlsEnabled(state);
  panel.title = enabled ? "" :
    "screen-capture mode: the remote reader cannot adjust the display; " +
    "ask the operating-room technologist";
  panel.classList.toggle("disabled", !enabled);
  const win = selectedWindow();
  $("sel-label").textContent = win ? `window ${win.slot}: ${win.label}` : "no window selected";
  const body = $("controls-body");
  body.replaceChildren();
  if (win === undefined) return;

  win.gains.slice(0, Math.max(1, win.traces[0]?.channels.length ?? 1)).forEach((gain, ch) => {
    const row = document.createElement("div");
    const label = document.createElement("span");
    label.textContent = `ch${ch} gain ${gain.toFixed(2)}`;
    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = "0.1";
    slider.max = "8";
    slider.step = "0.1";
    slider.value = String(gain);
    slider.disabled = !enabled;
    slider.onchange = () => {
      const value = Number(slider.value);
      send({ t: "control", line: gainLine(win.slot, ch, value) });
      state = applyLocalControl(state, { slot: win.slot, field: "gain", channel: ch, value });
      queueRepaint();
    };
    row.append(label, slider);
    body.appendChild(row);
  });

  const mk = (text: string, fn: () => void) => {
    const button = document.createElement("button");
    button.textContent = text;
    button.disabled = !enabled;
    button.onclick = fn;
    return button;
  };
  body.appendChild(mk(win.smooth ? "smooth off" : "smooth on", () => {
    send({ t: "control", line: enhLine(win.slot, "smooth", !win.smooth) });
    state = applyLocalControl(state, { slot: win.slot, field: "smooth", value: !win.smooth });
    queueRepaint();
  }));
  body.appendChild(mk(win.basecorr ? "basecorr off" : "basecorr on", () => {
    send({ t: "control", line: enhLine(win.slot, "basecorr", !win.basecorr) });
    state = applyLocalControl(state, { slot: win.slot, field: "basecorr", value: !win.basecorr });
    queueRepaint();
  }));

  const rangeRow = document.createElement("div");
  const a = document.createElement("input");
  const b = document.createElement("input");
  for (const input of [a, b]) {
    input.type = "number";
    input.min = "0";
    input.disabled = !enabled;
  }
  a.value = String(win.range?.[0] ?? 0);
  b.value = String(win.range?.[1] ?? Math.max(win.epochs - 1, 0));
  rangeRow.append("epochs ", a, " to ", b,
    mk("set range", () => {
      send({ t: "control", line: rangeLine(win.slot, Number(a.value), Number(b.value)) });
      state = applyLocalControl(state, {
        slot: win.slot, field: "range", value: [Number(a.value), Number(b.value)],
      });
      queueRepaint();
    }),
    mk("follow", () => {
      send({ t: "control", line: followLine(win.slot) });
      state = applyLocalControl(state, { slot: win.slot, field: "follow", value: null });
      queueRepaint();
    }));
  body.appendChild(rangeRow);

  const baseRow = document.createElement("div");
  const bi = document.createElement("input");
  const bj = document.createElement("input");
  for (const input of [bi, bj]) {
    input.type = "number";
    input.min = "0";
    input.disabled = !enabled;
  }
  bi.value = String(win.baselines[0] ?? 0);
  bj.value = String(win.baselines[1] ?? 1);
  baseRow.append("baselines ", bi, " ", bj,
    mk("set", () => {
      send({ t: "control", line: baselinesLine(win.slot, Number(bi.value), Number(bj.value)) });
      state = applyLocalControl(state, {
        slot: win.slot, field: "baselines", value: [Number(bi.value), Number(bj.value)],
      });
      queueRepaint();
    }),
    mk("kill window", () => send({ t: "control", line: killLine(win.slot) })));
  body.appendChild(baseRow);
}

canvas.addEventListener("click", (event) => {
  const bounds = canvas.getBoundingClientRect();
  const slot = slotAt(event.clientX - bounds.left, event.clientY - bounds.top,
    bounds.width, bounds.height);
  selectedSlot = state.windows.some((w) => w.slot === slot) ? slot : null;
  queueRepaint();
});

($("chat-form") as HTMLFormElement).addEventListener("submit", (event) => {
  event.preventDefault();
  const input = $("chat-input") as HTMLInputElement;
  const win = selectedWindow() ?? state.windows[0];
  if (win !== undefined && input.value.trim() !== "") {
    send({ t: "chat", slot: win.slot, text: input.value.trim() });
    input.value = "";
  }
});

connect();
