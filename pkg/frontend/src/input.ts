/** Keyboard state -> factored action components.
 *
 * Arrow keys map to (h, v) in {-1, 0, 1}^2 with screen convention
 * (ArrowUp = v -1). Opposing keys cancel. The tracker reports whether the
 * combined action changed so the caller can send at most one message per
 * change per animation frame.
 */

import type { Axis } from "./protocol.js";

const TRACKED = new Set(["ArrowLeft", "ArrowRight", "ArrowUp", "ArrowDown"]);

export class InputTracker {
  private held = new Set<string>();

  keyDown(code: string): void {
    if (TRACKED.has(code)) this.held.add(code);
  }

  keyUp(code: string): void {
    this.held.delete(code);
  }

  clear(): void {
    this.held.clear();
  }

  action(): { h: Axis; v: Axis } {
    const left = this.held.has("ArrowLeft") ? 1 : 0;
    const right = this.held.has("ArrowRight") ? 1 : 0;
    const up = this.held.has("ArrowUp") ? 1 : 0;
    const down = this.held.has("ArrowDown") ? 1 : 0;
    return { h: (right - left) as Axis, v: (down - up) as Axis };
  }
}

/** Emits the current action only when it differs from the last one sent. */
export class ActionDeduper {
  private lastH: Axis | null = null;
  private lastV: Axis | null = null;

  next(h: Axis, v: Axis): { h: Axis; v: Axis } | null {
    if (h === this.lastH && v === this.lastV) return null;
    this.lastH = h;
    this.lastV = v;
    return { h, v };
  }
}
