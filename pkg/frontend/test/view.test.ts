import { describe, expect, it } from "vitest";

import { Canvas } from "../src/canvas.js";
import { CockpitState } from "../src/state.js";
import {
  DISCONNECT_COLOR,
  STALE_COLOR,
  TARGET_COLOR,
  TIP_COLOR,
  renderView,
} from "../src/view.js";
import { frameMsg, helloMsg, stateMsg } from "./fixtures.js";

const RECT = { x: 0, y: 0, width: 320, height: 240 };

function connectedState(tip: [number, number], target: [number, number]): CockpitState {
  const st = new CockpitState();
  st.connection = "connected";
  st.apply(helloMsg(1), 0);
  st.apply(frameMsg(2), 0);
  st.apply(stateMsg(3, { tip_px: tip, target_px: target }), 0);
  return st;
}

function countColor(canvas: Canvas, color: [number, number, number]): number {
  let n = 0;
  for (let y = 0; y < canvas.height; y++) {
    for (let x = 0; x < canvas.width; x++) {
      const [r, g, b] = canvas.get(x, y);
      if (r === color[0] && g === color[1] && b === color[2]) {
        n++;
      }
    }
  }
  return n;
}

describe("renderView", () => {
  it("draws coinciding markers when tip equals target", () => {
    const st = connectedState([160, 120], [160, 120]);
    const canvas = new Canvas(320, 240);
    renderView(canvas, st, RECT, 10);
    // the tip cross center overdraws the target disk center
    const center = canvas.get(160, 120);
    expect(center).toEqual(TIP_COLOR);
    expect(countColor(canvas, TARGET_COLOR)).toBeGreaterThan(20);
  });

  it("separates markers when tip differs from target", () => {
    const st = connectedState([100, 80], [220, 180]);
    const canvas = new Canvas(320, 240);
    renderView(canvas, st, RECT, 10);
    expect(canvas.get(100, 80)).toEqual(TIP_COLOR);
    expect(canvas.get(220, 180)).toEqual(TARGET_COLOR);
  });

  it("shows the stale badge when frames stop", () => {
    const st = connectedState([160, 120], [160, 120]);
    const fresh = new Canvas(320, 240);
    renderView(fresh, st, RECT, 500);
    expect(countColor(fresh, STALE_COLOR)).toBe(0);
    const stale = new Canvas(320, 240);
    renderView(stale, st, RECT, 5000);
    expect(countColor(stale, STALE_COLOR)).toBeGreaterThan(100);
  });

  it("grays the view with a reconnect banner when disconnected", () => {
    const st = connectedState([160, 120], [160, 120]);
    st.connection = "closed";
    const canvas = new Canvas(320, 240);
    renderView(canvas, st, RECT, 10);
    expect(countColor(canvas, DISCONNECT_COLOR)).toBeGreaterThan(1000);
    expect(countColor(canvas, [235, 235, 235])).toBeGreaterThan(100);
  });
});
