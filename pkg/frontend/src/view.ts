/**
 * Live view rendering: latest frame, translucent heatmap overlay, tip and
 * target markers, an NLS orientation compass showing the live misorientation,
 * a stale badge when frames stop, and a grayed reconnect banner when the
 * session drops.
 */

import { Canvas, Color } from "./canvas.js";
import { CockpitState } from "./state.js";

export const TIP_COLOR: Color = [80, 220, 80];
export const TARGET_COLOR: Color = [255, 60, 60];
export const STALE_COLOR: Color = [255, 200, 0];
export const DISCONNECT_COLOR: Color = [120, 120, 120];
export const COMPASS_COLOR: Color = [90, 170, 255];

export interface ViewRect {
  x: number;
  y: number;
  width: number;
  height: number;
}

export function renderView(
  canvas: Canvas,
  state: CockpitState,
  rect: ViewRect,
  nowMs: number,
): void {
  const { x, y, width, height } = rect;
  canvas.fillRect(x, y, width, height, [15, 15, 20]);

  const disconnected = state.connection !== "connected";
  if (state.latestFrame) {
    const img = state.latestFrame.image;
    canvas.blitGray(img.pixels, img.width, img.height, x, y, width, height,
      disconnected ? 0.35 : 1.0);
  }
  if (!disconnected && state.heatmap) {
    canvas.overlayHeat(state.heatmap.pixels, state.heatmap.width,
      state.heatmap.height, x, y, width, height);
  }

  if (!disconnected && state.latestState && state.hello) {
    const toView = (px: [number, number]): [number, number] => [
      x + (px[0] / state.hello!.image.width) * width,
      y + (px[1] / state.hello!.image.height) * height,
    ];
    const tip = toView(state.latestState.tip_px);
    const target = toView(state.latestState.target_px);
    canvas.circle(target[0], target[1], 5, TARGET_COLOR, true);
    canvas.cross(tip[0], tip[1], 6, TIP_COLOR);

    // NLS compass: needle rotated by the live misorientation
    const r = Math.min(18, Math.floor(width / 10));
    const ccx = x + width - r - 4;
    const ccy = y + r + 4;
    canvas.circle(ccx, ccy, r, COMPASS_COLOR);
    const ang = -Math.PI / 2 + state.latestState.misorientation;
    canvas.line(ccx, ccy, ccx + r * Math.cos(ang), ccy + r * Math.sin(ang), COMPASS_COLOR);
    canvas.set(ccx, ccy - r, [255, 255, 255]);
  }

  if (!disconnected && state.isStale(nowMs)) {
    canvas.fillRect(x + 2, y + 2, 34, 8, STALE_COLOR);
  }
  if (disconnected) {
    // gray banner with a bright "reconnect" block as the affordance
    canvas.fillRect(x, y + Math.floor(height / 2) - 6, width, 12, DISCONNECT_COLOR);
    canvas.fillRect(x + Math.floor(width / 2) - 12, y + Math.floor(height / 2) - 4,
      24, 8, [235, 235, 235]);
  }
  canvas.strokeRect(x, y, width, height, [60, 60, 70]);
}
