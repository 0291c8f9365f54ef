/** Pure rendering of state frames onto a 2D context.
 *
 * The court is the normalised [-1, 1]^2 square scaled to the canvas; court
 * y points up, so it is flipped to screen coordinates here. Only the latest
 * frame is drawn; the renderer holds no game state of its own.
 */

import { S, StateFrame } from "./protocol.js";

/** Subset of CanvasRenderingContext2D the renderer needs (mockable). */
export interface Draw2D {
  fillStyle: string;
  font: string;
  textAlign: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
}

export interface RenderOptions {
  width: number;
  height: number;
  paddleHalf: number; // court units, visual only
  ballRadius: number; // pixels
}

export const DEFAULT_OPTIONS: RenderOptions = {
  width: 640,
  height: 480,
  paddleHalf: 0.3,
  ballRadius: 5,
};

export function courtToPixel(
  x: number, y: number, opts: RenderOptions,
): { px: number; py: number } {
  return {
    px: ((x + 1) / 2) * opts.width,
    py: ((1 - y) / 2) * opts.height, // court y up -> screen y down
  };
}

function paddle(ctx: Draw2D, x: number, y: number, opts: RenderOptions, color: string): void {
  const { px, py } = courtToPixel(x, y, opts);
  const halfPx = (opts.paddleHalf / 2) * opts.height;
  const w = Math.max(4, opts.width / 80);
  ctx.fillStyle = color;
  ctx.fillRect(px - w / 2, py - halfPx, w, 2 * halfPx);
}

export function renderFrame(ctx: Draw2D, frame: StateFrame, opts: RenderOptions = DEFAULT_OPTIONS): void {
  ctx.clearRect(0, 0, opts.width, opts.height);
  ctx.fillStyle = "#101418";
  ctx.fillRect(0, 0, opts.width, opts.height);

  // centre line
  ctx.fillStyle = "#2a3a4a";
  ctx.fillRect(opts.width / 2 - 1, 0, 2, opts.height);

  paddle(ctx, frame.state[S.PlX], frame.state[S.PlY], opts, "#4cc9f0");
  paddle(ctx, frame.state[S.OpX], frame.state[S.OpY], opts, "#f72585");

  const ball = courtToPixel(frame.state[S.BallX], frame.state[S.BallY], opts);
  ctx.fillStyle = "#ffffff";
  ctx.beginPath();
  ctx.arc(ball.px, ball.py, opts.ballRadius, 0, 2 * Math.PI);
  ctx.fill();

  if (frame.terminal) {
    ctx.fillStyle = "rgba(255, 214, 10, 0.85)";
    ctx.font = "bold 40px monospace";
    ctx.textAlign = "center";
    ctx.fillText("POINT", opts.width / 2, opts.height / 2);
  }
}

export interface HudText {
  betaOp: string;
  betaPl: string;
  score: string;
  status: string;
}

/** HUD strings echo the frame values (beta estimate to one decimal). */
export function hudText(frame: StateFrame | null, connected: boolean): HudText {
  if (!connected) {
    return { betaOp: "–", betaPl: "–", score: "–", status: "disconnected" };
  }
  if (frame === null) {
    return { betaOp: "–", betaPl: "–", score: "–", status: "waiting for server" };
  }
  return {
    betaOp: frame.beta_op_hat.toFixed(1),
    betaPl: frame.beta_pl.toFixed(1),
    score: `${frame.score[0]} : ${frame.score[1]}`,
    status: frame.terminal ? "point!" : "live",
  };
}
