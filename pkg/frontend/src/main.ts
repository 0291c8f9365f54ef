/** Wiring: socket, keyboard, render loop, HUD, delta slider. */

import { InputTracker, ActionDeduper } from "./input.js";
import { Connection, wsUrl } from "./net.js";
import { actionMessage, configMessage } from "./protocol.js";
import { DEFAULT_OPTIONS, Draw2D, hudText, renderFrame } from "./render.js";
import { ClientState } from "./state.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

export function start(): void {
  const canvas = byId<HTMLCanvasElement>("court");
  const ctx = canvas.getContext("2d") as unknown as Draw2D;
  const opts = { ...DEFAULT_OPTIONS, width: canvas.width, height: canvas.height };

  const state = new ClientState();
  const tracker = new InputTracker();
  const deduper = new ActionDeduper();

  const socket = new WebSocket(wsUrl(window.location.host, window.location.protocol === "https:"));
  const conn = new Connection(socket as never);
  conn.onOpen = () => {
    state.connection = "open";
  };
  conn.onClose = () => {
    state.connection = "closed";
  };
  conn.onFrame = (frame) => state.onFrame(frame);

  window.addEventListener("keydown", (ev) => {
    tracker.keyDown(ev.code);
    if (ev.code.startsWith("Arrow")) ev.preventDefault();
  });
  window.addEventListener("keyup", (ev) => tracker.keyUp(ev.code));
  window.addEventListener("blur", () => tracker.clear());

  const slider = byId<HTMLInputElement>("delta");
  const deltaLabel = byId<HTMLSpanElement>("delta-value");
  slider.addEventListener("input", () => {
    const delta = state.setDelta(Number(slider.value));
    deltaLabel.textContent = delta.toFixed(0);
    conn.send(configMessage(delta));
  });

  const betaOpEl = byId<HTMLSpanElement>("beta-op");
  const betaPlEl = byId<HTMLSpanElement>("beta-pl");
  const scoreEl = byId<HTMLSpanElement>("score");
  const statusEl = byId<HTMLSpanElement>("status");

  const tickUi = () => {
    // At most one action message per animation frame, and only on change.
    const { h, v } = tracker.action();
    const change = deduper.next(h, v);
    if (change !== null) conn.send(actionMessage(change.h, change.v));

    if (state.frame !== null) renderFrame(ctx, state.frame, opts);
    const hud = hudText(state.frame, state.connection === "open");
    betaOpEl.textContent = hud.betaOp;
    betaPlEl.textContent = hud.betaPl;
    scoreEl.textContent = hud.score;
    statusEl.textContent = hud.status;

    window.requestAnimationFrame(tickUi);
  };
  window.requestAnimationFrame(tickUi);
}

start();
