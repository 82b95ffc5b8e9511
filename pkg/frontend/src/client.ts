/**
 * Session client: TCP connect, HTTP upgrade handshake, line-delimited JSON
 * both ways. Drags are validated client-side and coalesced to at most 30 Hz
 * (latest wins); settings are validated before sending.
 */

import * as net from "node:net";

import {
  PROTOCOL_TAG,
  PROTOCOL_VERSION,
  ServerMessage,
  encodeClientMessage,
  parseServerMessage,
  validateDrag,
  validateGain,
} from "./protocol.js";
import { CockpitState } from "./state.js";

export const DRAG_MIN_INTERVAL_MS = 1000 / 30;

export interface ClientOptions {
  host: string;
  port: number;
  now?: () => number;
}

export class SessionClient {
  readonly state: CockpitState;
  private socket: net.Socket | null = null;
  private buffer = "";
  private upgraded = false;
  private listeners: ((msg: ServerMessage) => void)[] = [];
  private closeListeners: (() => void)[] = [];
  private now: () => number;
  private lastDragSentMs = -Infinity;
  private pendingDragPx: [number, number] | null = null;
  private dragTimer: NodeJS.Timeout | null = null;
  dragsSent = 0;

  constructor(private readonly options: ClientOptions, state?: CockpitState) {
    this.state = state ?? new CockpitState();
    this.now = options.now ?? (() => Date.now());
  }

  connect(): Promise<void> {
    this.state.connection = "connecting";
    return new Promise((resolve, reject) => {
      const socket = net.createConnection(
        { host: this.options.host, port: this.options.port },
        () => {
          socket.write(
            `GET /${PROTOCOL_VERSION} HTTP/1.1\r\n` +
            `Upgrade: ${PROTOCOL_TAG}\r\nConnection: Upgrade\r\n\r\n`,
          );
        },
      );
      this.socket = socket;
      socket.setNoDelay(true);
      socket.on("data", (chunk) => {
        this.buffer += chunk.toString("utf8");
        if (!this.upgraded) {
          const headerEnd = this.buffer.indexOf("\r\n\r\n");
          if (headerEnd < 0) {
            return;
          }
          const header = this.buffer.slice(0, headerEnd);
          this.buffer = this.buffer.slice(headerEnd + 4);
          if (!header.includes("101")) {
            this.state.connection = "closed";
            socket.destroy();
            reject(new Error(`handshake rejected: ${header.split("\r\n")[0]}`));
            return;
          }
          this.upgraded = true;
          this.state.connection = "connected";
          resolve();
        }
        this.drainLines();
      });
      socket.on("error", (err) => {
        this.state.connection = "closed";
        if (!this.upgraded) {
          reject(err);
        }
      });
      socket.on("close", () => {
        this.state.connection = "closed";
        this.closeListeners.forEach((fn) => fn());
      });
    });
  }

  private drainLines(): void {
    for (;;) {
      const nl = this.buffer.indexOf("\n");
      if (nl < 0) {
        return;
      }
      const line = this.buffer.slice(0, nl).trim();
      this.buffer = this.buffer.slice(nl + 1);
      if (!line) {
        continue;
      }
      let msg: ServerMessage;
      try {
        msg = parseServerMessage(line);
      } catch {
        continue; // tolerate junk on the wire
      }
      this.state.apply(msg, this.now());
      this.listeners.forEach((fn) => fn(msg));
    }
  }

  onMessage(fn: (msg: ServerMessage) => void): void {
    this.listeners.push(fn);
  }

  onClose(fn: () => void): void {
    this.closeListeners.push(fn);
  }

  private sendRaw(msg: object): void {
    if (!this.socket || this.state.connection !== "connected") {
      throw new Error("not connected");
    }
    this.socket.write(encodeClientMessage(msg));
  }

  /** Drag the tool toward an image pixel; coalesced to <= 30 Hz, latest wins. */
  sendDrag(px: [number, number]): void {
    if (!this.state.hello) {
      throw new Error("no hello yet");
    }
    validateDrag(px, this.state.hello.image);
    this.state.pendingDrag = px;
    this.pendingDragPx = px;
    const since = this.now() - this.lastDragSentMs;
    if (since >= DRAG_MIN_INTERVAL_MS) {
      this.flushDrag();
    } else if (!this.dragTimer) {
      this.dragTimer = setTimeout(() => this.flushDrag(), DRAG_MIN_INTERVAL_MS - since);
    }
  }

  private flushDrag(): void {
    if (this.dragTimer) {
      clearTimeout(this.dragTimer);
      this.dragTimer = null;
    }
    if (!this.pendingDragPx) {
      return;
    }
    this.sendRaw({ type: "tool_drag", px: this.pendingDragPx });
    this.dragsSent += 1;
    this.lastDragSentMs = this.now();
    this.pendingDragPx = null;
  }

  releaseDrag(): void {
    this.state.pendingDrag = null;
    this.pendingDragPx = null;
    this.sendRaw({ type: "tool_drag", release: true });
  }

  setGain(name: string, value: number): void {
    validateGain(name, value);
    this.sendRaw({ type: "set_gain", name, value });
  }

  setMrc(on: boolean): void {
    this.sendRaw({ type: "set_mrc", on });
  }

  pause(): void {
    this.sendRaw({ type: "pause" });
  }

  resume(): void {
    this.sendRaw({ type: "resume" });
  }

  reset(seed: number): void {
    this.sendRaw({ type: "reset", seed });
  }

  close(): void {
    if (this.dragTimer) {
      clearTimeout(this.dragTimer);
      this.dragTimer = null;
    }
    this.socket?.destroy();
    this.state.connection = "closed";
  }

  /** Wait for the next state message satisfying the predicate. */
  waitForState(
    predicate: (msg: ServerMessage) => boolean,
    timeoutMs = 15000,
  ): Promise<ServerMessage> {
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        this.listeners = this.listeners.filter((fn) => fn !== handler);
        reject(new Error("timed out waiting for state"));
      }, timeoutMs);
      const handler = (msg: ServerMessage) => {
        if (predicate(msg)) {
          clearTimeout(timer);
          this.listeners = this.listeners.filter((fn) => fn !== handler);
          resolve(msg);
        }
      };
      this.onMessage(handler);
    });
  }
}
