/**
 * Cockpit state: the latest frame and state message, a rolling error history
 * strictly ordered by sequence number (gaps recorded, never interpolated),
 * connection status, and the pending drag echo.
 *
 * The cockpit never re-simulates: every displayed quantity comes straight
 * from server messages.
 */

import {
  GrayImage,
  HelloMessage,
  ServerMessage,
  SessionSettings,
  StateMessage,
  decodeBase64Pnm,
} from "./protocol.js";

export type ConnectionStatus = "idle" | "connecting" | "connected" | "closed";

export interface FrameSnapshot {
  seq: number;
  t: number;
  image: GrayImage;
  receivedAtMs: number;
}

export interface HistoryPoint {
  seq: number;
  t: number;
  e_p: [number, number];
  e_d: number;
  e_r_norm: number;
  theta_star: number;
  lyapunov: number;
  misorientation: number;
  gapBefore: boolean;
}

export const STALE_AFTER_MS = 1000;

export class CockpitState {
  connection: ConnectionStatus = "idle";
  hello: HelloMessage | null = null;
  heatmap: GrayImage | null = null;
  latestFrame: FrameSnapshot | null = null;
  latestState: StateMessage | null = null;
  settings: SessionSettings | null = null;
  history: HistoryPoint[] = [];
  gapCount = 0;
  droppedOutOfOrder = 0;
  errors: string[] = [];
  pendingDrag: [number, number] | null = null;
  private lastSeq = -1;
  private lastStateSeq = -1;

  constructor(readonly historyWindow: number = 2048) {}

  apply(msg: ServerMessage, nowMs: number): void {
    if (this.lastSeq >= 0 && msg.seq <= this.lastSeq) {
      this.droppedOutOfOrder += 1;
      return;
    }
    this.lastSeq = msg.seq;
    switch (msg.type) {
      case "hello":
        this.hello = msg;
        this.settings = msg.settings;
        this.heatmap = decodeBase64Pnm(msg.heatmap.pgm_base64);
        break;
      case "state": {
        const gapBefore = this.lastStateSeq >= 0 && msg.seq !== this.lastStateSeq + 1;
        if (gapBefore) {
          this.gapCount += 1;
        }
        this.lastStateSeq = msg.seq;
        this.latestState = msg;
        this.settings = msg.settings;
        this.history.push({
          seq: msg.seq,
          t: msg.t,
          e_p: msg.e_p,
          e_d: msg.e_d,
          e_r_norm: Math.hypot(msg.e_r[0], msg.e_r[1]),
          theta_star: msg.theta_star,
          lyapunov: msg.lyapunov,
          misorientation: msg.misorientation,
          gapBefore,
        });
        if (this.history.length > this.historyWindow) {
          this.history.splice(0, this.history.length - this.historyWindow);
        }
        break;
      }
      case "frame":
        this.latestFrame = {
          seq: msg.seq,
          t: msg.t,
          image: decodeBase64Pnm(msg.ppm_base64),
          receivedAtMs: nowMs,
        };
        break;
      case "error":
        this.errors.push(msg.message);
        if (this.errors.length > 64) {
          this.errors.splice(0, this.errors.length - 64);
        }
        break;
    }
  }

  isStale(nowMs: number): boolean {
    if (this.latestFrame === null) {
      return true;
    }
    return nowMs - this.latestFrame.receivedAtMs > STALE_AFTER_MS;
  }

  /** Fraction along the image (0..1) for the given full-resolution pixel. */
  normalizedPixel(px: [number, number]): [number, number] | null {
    if (!this.hello) {
      return null;
    }
    return [px[0] / this.hello.image.width, px[1] / this.hello.image.height];
  }
}
