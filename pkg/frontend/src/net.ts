/** Thin WebSocket wrapper with a pluggable socket for tests. */

import { ClientMessage, encode, parseFrame, StateFrame } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
}

export class Connection {
  private socket: SocketLike;
  onFrame: (frame: StateFrame) => void = () => undefined;
  onOpen: () => void = () => undefined;
  onClose: () => void = () => undefined;
  private open = false;

  constructor(socket: SocketLike) {
    this.socket = socket;
    socket.onopen = () => {
      this.open = true;
      this.onOpen();
    };
    socket.onclose = () => {
      this.open = false;
      this.onClose();
    };
    socket.onmessage = (ev) => {
      if (typeof ev.data !== "string") return;
      const frame = parseFrame(ev.data);
      if (frame !== null) this.onFrame(frame);
    };
  }

  get isOpen(): boolean {
    return this.open;
  }

  send(msg: ClientMessage): boolean {
    if (!this.open) return false;
    this.socket.send(encode(msg));
    return true;
  }
}

export function wsUrl(locationHost: string, secure: boolean): string {
  return `${secure ? "wss" : "ws"}://${locationHost}/ws`;
}
