/** Wire protocol (schema v1) shared with the play server. */

export const PROTOCOL_VERSION = 1;

/** 13-float state layout indices. */
export const enum S {
  PlX = 0, PlY, PlVX, PlVY,
  OpX, OpY, OpVX, OpVY,
  BallX, BallY, BallVX, BallVY,
  Time,
}

export interface StateFrame {
  v: number;
  type: "state";
  tick: number;
  state: number[];
  beta_op_hat: number;
  beta_pl: number;
  score: [number, number];
  terminal: boolean;
}

export type Axis = -1 | 0 | 1;

/** Vertical axis is screen convention: -1 = up. */
export interface ActionMessage {
  type: "action";
  h: Axis;
  v: Axis;
}

export interface ConfigMessage {
  type: "config";
  delta: number;
}

export interface ResetMessage {
  type: "reset";
}

export type ClientMessage = ActionMessage | ConfigMessage | ResetMessage;

export function parseFrame(raw: string): StateFrame | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const d = doc as Record<string, unknown>;
  if (d.type !== "state" || d.v !== PROTOCOL_VERSION) return null;
  if (!Array.isArray(d.state) || d.state.length !== 13) return null;
  if (typeof d.tick !== "number" || typeof d.terminal !== "boolean") return null;
  if (typeof d.beta_op_hat !== "number" || typeof d.beta_pl !== "number") return null;
  if (!Array.isArray(d.score) || d.score.length !== 2) return null;
  return d as unknown as StateFrame;
}

export function actionMessage(h: Axis, v: Axis): ActionMessage {
  return { type: "action", h, v };
}

export function configMessage(delta: number): ConfigMessage {
  return { type: "config", delta };
}

export function encode(msg: ClientMessage): string {
  return JSON.stringify(msg);
}
