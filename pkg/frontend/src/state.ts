/** Client-side view state: latest frame only, no game logic. */

import { StateFrame } from "./protocol.js";

export type Connection = "connecting" | "open" | "closed";

export class ClientState {
  connection: Connection = "connecting";
  frame: StateFrame | null = null;
  delta = 0;
  scoreHistory: Array<[number, number]> = [];

  onFrame(frame: StateFrame): void {
    // Render only the newest frame; no interpolation backlog.
    if (this.frame !== null && frame.tick < this.frame.tick) return;
    this.frame = frame;
    if (frame.terminal) this.scoreHistory.push([frame.score[0], frame.score[1]]);
  }

  setDelta(delta: number): number {
    this.delta = Math.min(50, Math.max(0, delta));
    return this.delta;
  }
}
