import { describe, expect, it } from "vitest";

import {
  decodeBase64Pnm,
  decodePnm,
  parseServerMessage,
  validateDrag,
  validateGain,
} from "../src/protocol.js";

describe("parseServerMessage", () => {
  it("accepts known types with seq", () => {
    const msg = parseServerMessage('{"type":"state","seq":4,"t":0.1}');
    expect(msg.type).toBe("state");
    expect(msg.seq).toBe(4);
  });

  it("rejects unknown types and missing seq", () => {
    expect(() => parseServerMessage('{"type":"mystery","seq":1}')).toThrow();
    expect(() => parseServerMessage('{"type":"state"}')).toThrow();
    expect(() => parseServerMessage("[1,2]")).toThrow();
  });
});

describe("decodePnm", () => {
  it("decodes P5 grayscale", () => {
    const header = Buffer.from("P5\n3 2\n255\n", "ascii");
    const body = Buffer.from([0, 50, 100, 150, 200, 250]);
    const img = decodePnm(Buffer.concat([header, body]));
    expect(img.width).toBe(3);
    expect(img.height).toBe(2);
    expect(Array.from(img.pixels)).toEqual([0, 50, 100, 150, 200, 250]);
  });

  it("decodes P6 color by channel average", () => {
    const header = Buffer.from("P6\n2 1\n255\n", "ascii");
    const body = Buffer.from([30, 30, 30, 120, 120, 120]);
    const img = decodePnm(Buffer.concat([header, body]));
    expect(Array.from(img.pixels)).toEqual([30, 120]);
  });

  it("round-trips through base64", () => {
    const payload = Buffer.concat([
      Buffer.from("P5\n2 2\n255\n", "ascii"),
      Buffer.from([1, 2, 3, 4]),
    ]);
    const img = decodeBase64Pnm(payload.toString("base64"));
    expect(Array.from(img.pixels)).toEqual([1, 2, 3, 4]);
  });

  it("rejects truncated and non-PNM payloads", () => {
    expect(() => decodePnm(Buffer.from("P5\n4 4\n255\n12", "ascii"))).toThrow();
    expect(() => decodePnm(Buffer.from("GIF89a", "ascii"))).toThrow();
  });
});

describe("outbound validation", () => {
  const image = { width: 320, height: 240 };

  it("accepts in-bounds drags", () => {
    expect(() => validateDrag([0, 0], image)).not.toThrow();
    expect(() => validateDrag([319.5, 239.5], image)).not.toThrow();
  });

  it("blocks out-of-range drags", () => {
    expect(() => validateDrag([-1, 10], image)).toThrow();
    expect(() => validateDrag([320, 10], image)).toThrow();
    expect(() => validateDrag([NaN, 10], image)).toThrow();
  });

  it("blocks non-positive or unknown gains", () => {
    expect(() => validateGain("k_d", 0.5)).not.toThrow();
    expect(() => validateGain("k_d", -1)).toThrow();
    expect(() => validateGain("k_d", 0)).toThrow();
    expect(() => validateGain("warp", 1)).toThrow();
  });
});
