/**
 * lapfov session protocol (v1): newline-delimited JSON after a plain HTTP
 * upgrade handshake. Message shapes mirror the service schema verbatim.
 */

export const PROTOCOL_VERSION = "v1";
export const PROTOCOL_TAG = "lapfov-sim";

export interface GainSettings {
  k_d: number;
  k_theta: number;
  kr: number;
  ks_insert: number;
}

export interface SessionSettings {
  mrc: boolean;
  paused: boolean;
  gains: GainSettings;
}

export interface HelloMessage {
  type: "hello";
  v: string;
  seq: number;
  dt: number;
  image: { width: number; height: number };
  heatmap: { width: number; height: number; pgm_base64: string };
  settings: SessionSettings;
}

export interface StateMessage {
  type: "state";
  v: string;
  seq: number;
  t: number;
  e_p: [number, number];
  e_d: number;
  e_r: [number, number];
  theta_star: number;
  lyapunov: number;
  tip_px: [number, number];
  target_px: [number, number];
  d_tool: number;
  misorientation: number;
  camera_pose: number[];
  settings: SessionSettings;
  flags: string;
}

export interface FrameMessage {
  type: "frame";
  v: string;
  seq: number;
  t: number;
  width: number;
  height: number;
  ppm_base64: string;
}

export interface ErrorMessage {
  type: "error";
  v: string;
  seq: number;
  message: string;
}

export type ServerMessage = HelloMessage | StateMessage | FrameMessage | ErrorMessage;

export type GainName = "k_d" | "k_theta" | "kr" | "ks_insert";
export const GAIN_NAMES: GainName[] = ["k_d", "k_theta", "kr", "ks_insert"];

export interface GrayImage {
  width: number;
  height: number;
  /** one byte per pixel, row major */
  pixels: Uint8Array;
}

export function parseServerMessage(line: string): ServerMessage {
  const msg = JSON.parse(line);
  if (typeof msg !== "object" || msg === null || typeof msg.type !== "string") {
    throw new Error("not a protocol message");
  }
  if (typeof msg.seq !== "number") {
    throw new Error(`message ${msg.type} missing seq`);
  }
  switch (msg.type) {
    case "hello":
    case "state":
    case "frame":
    case "error":
      return msg as ServerMessage;
    default:
      throw new Error(`unknown message type ${msg.type}`);
  }
}

/** Parse a binary P5 (PGM) or P6 (PPM) payload into a grayscale image. */
export function decodePnm(payload: Uint8Array): GrayImage {
  const header = new TextDecoder().decode(payload.subarray(0, 64));
  const match = header.match(/^(P[56])\s+(\d+)\s+(\d+)\s+(\d+)\s/);
  if (!match) {
    throw new Error("unsupported PNM payload");
  }
  const [, magic, w, h] = match;
  const width = parseInt(w, 10);
  const height = parseInt(h, 10);
  const offset = match[0].length;
  const channels = magic === "P6" ? 3 : 1;
  const need = width * height * channels;
  const body = payload.subarray(offset, offset + need);
  if (body.length < need) {
    throw new Error("truncated PNM payload");
  }
  const pixels = new Uint8Array(width * height);
  if (channels === 1) {
    pixels.set(body);
  } else {
    for (let i = 0; i < width * height; i++) {
      // stored grayscale-replicated; average is exact for those, safe otherwise
      pixels[i] = Math.round((body[3 * i] + body[3 * i + 1] + body[3 * i + 2]) / 3);
    }
  }
  return { width, height, pixels };
}

export function decodeBase64Pnm(b64: string): GrayImage {
  return decodePnm(Buffer.from(b64, "base64"));
}

/** Client-side validation of outbound messages; throws on out-of-range. */
export function validateDrag(
  px: [number, number],
  image: { width: number; height: number },
): void {
  if (!Number.isFinite(px[0]) || !Number.isFinite(px[1])) {
    throw new Error("drag pixel must be finite");
  }
  if (px[0] < 0 || px[0] >= image.width || px[1] < 0 || px[1] >= image.height) {
    throw new Error(`drag pixel (${px[0]}, ${px[1]}) outside ${image.width}x${image.height}`);
  }
}

export function validateGain(name: string, value: number): void {
  if (!GAIN_NAMES.includes(name as GainName)) {
    throw new Error(`unknown gain ${name}`);
  }
  if (!Number.isFinite(value) || value <= 0) {
    throw new Error("gain must be positive");
  }
}

export function encodeClientMessage(msg: object): string {
  return JSON.stringify(msg) + "\n";
}
