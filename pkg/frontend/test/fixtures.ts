/** Shared message builders for the cockpit tests. */

import { StateMessage } from "../src/protocol.js";

export function pgm64(width: number, height: number, value = 128): string {
  const header = Buffer.from(`P5\n${width} ${height}\n255\n`, "ascii");
  const body = Buffer.alloc(width * height, value);
  return Buffer.concat([header, body]).toString("base64");
}

export function ppm64(width: number, height: number, value = 90): string {
  const header = Buffer.from(`P6\n${width} ${height}\n255\n`, "ascii");
  const body = Buffer.alloc(width * height * 3, value);
  return Buffer.concat([header, body]).toString("base64");
}

export function helloMsg(seq = 1): any {
  return {
    type: "hello",
    v: "v1",
    seq,
    dt: 0.01,
    image: { width: 320, height: 240 },
    heatmap: { width: 320, height: 240, pgm_base64: pgm64(320, 240) },
    settings: {
      mrc: false,
      paused: false,
      gains: { k_d: 0.1, k_theta: 1, kr: 0.5, ks_insert: 3e-3 },
    },
  };
}

export function stateMsg(seq: number, overrides: Partial<StateMessage> = {}): StateMessage {
  return {
    type: "state",
    v: "v1",
    seq,
    t: seq * 0.01,
    e_p: [seq * 1.0, -seq * 0.5],
    e_d: 2.0 - seq * 0.01,
    e_r: [3e-4, -4e-4],
    theta_star: 0.001 * seq,
    lyapunov: 100 / (seq + 1),
    tip_px: [160 + seq, 120 - seq],
    target_px: [160, 120],
    d_tool: 12.5,
    misorientation: 0.002 * seq,
    camera_pose: [1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0],
    settings: helloMsg().settings,
    flags: "",
    ...overrides,
  };
}

export function frameMsg(seq: number, width = 80, height = 60): any {
  return {
    type: "frame",
    v: "v1",
    seq,
    t: seq * 0.01,
    width,
    height,
    ppm_base64: ppm64(width, height),
  };
}
