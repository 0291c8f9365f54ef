import { describe, expect, it } from "vitest";

import { actionMessage, configMessage, encode, parseFrame } from "../src/protocol.js";

function validFrame(overrides: Record<string, unknown> = {}): string {
  return JSON.stringify({
    v: 1,
    type: "state",
    tick: 3,
    state: new Array(13).fill(0),
    beta_op_hat: -9.96,
    beta_pl: 12.5,
    score: [1, 2],
    terminal: false,
    ...overrides,
  });
}

describe("parseFrame", () => {
  it("accepts a well-formed frame", () => {
    const frame = parseFrame(validFrame());
    expect(frame).not.toBeNull();
    expect(frame!.tick).toBe(3);
    expect(frame!.state).toHaveLength(13);
  });

  it("rejects wrong version, type, or shapes", () => {
    expect(parseFrame(validFrame({ v: 2 }))).toBeNull();
    expect(parseFrame(validFrame({ type: "telemetry" }))).toBeNull();
    expect(parseFrame(validFrame({ state: [1, 2, 3] }))).toBeNull();
    expect(parseFrame(validFrame({ score: [1] }))).toBeNull();
    expect(parseFrame("not json")).toBeNull();
    expect(parseFrame("[]")).toBeNull();
  });
});

describe("message encoding", () => {
  it("encodes factored actions verbatim", () => {
    expect(JSON.parse(encode(actionMessage(-1, 1)))).toEqual({ type: "action", h: -1, v: 1 });
  });

  it("encodes config with delta", () => {
    expect(JSON.parse(encode(configMessage(12)))).toEqual({ type: "config", delta: 12 });
  });
});
