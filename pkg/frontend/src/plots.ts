/**
 * Rolling error plots, one lane per channel, drawn from the state history.
 * Plotted values are exactly the values carried by the state messages;
 * sequence gaps break the polyline rather than interpolating across them.
 */

import { Canvas, Color } from "./canvas.js";
import { CockpitState, HistoryPoint } from "./state.js";
import { ViewRect } from "./view.js";

export interface PlottedPoint {
  seq: number;
  t: number;
  value: number;
  gapBefore: boolean;
}

export type ChannelName =
  | "e_p_x"
  | "e_p_y"
  | "e_d"
  | "e_r_norm"
  | "theta_star"
  | "lyapunov"
  | "misorientation";

export const CHANNELS: { name: ChannelName; color: Color; pick: (h: HistoryPoint) => number }[] = [
  { name: "e_p_x", color: [100, 200, 255], pick: (h) => h.e_p[0] },
  { name: "e_p_y", color: [100, 255, 200], pick: (h) => h.e_p[1] },
  { name: "e_d", color: [255, 120, 120], pick: (h) => h.e_d },
  { name: "e_r_norm", color: [120, 255, 120], pick: (h) => h.e_r_norm },
  { name: "theta_star", color: [200, 140, 255], pick: (h) => h.theta_star },
  { name: "lyapunov", color: [255, 210, 100], pick: (h) => h.lyapunov },
  { name: "misorientation", color: [255, 160, 60], pick: (h) => h.misorientation },
];

/**
 * The exact series a plot displays for one channel; tests compare these
 * against the raw state messages.
 */
export function plottedSeries(state: CockpitState, channel: ChannelName): PlottedPoint[] {
  const spec = CHANNELS.find((c) => c.name === channel);
  if (!spec) {
    throw new Error(`unknown channel ${channel}`);
  }
  return state.history.map((h) => ({
    seq: h.seq,
    t: h.t,
    value: spec.pick(h),
    gapBefore: h.gapBefore,
  }));
}

export function renderPlots(canvas: Canvas, state: CockpitState, rect: ViewRect): void {
  const laneH = Math.floor(rect.height / CHANNELS.length);
  CHANNELS.forEach((spec, lane) => {
    const y0 = rect.y + lane * laneH;
    canvas.fillRect(rect.x, y0, rect.width, laneH, [10, 10, 14]);
    canvas.strokeRect(rect.x, y0, rect.width, laneH, [50, 50, 60]);
    const series = plottedSeries(state, spec.name);
    if (series.length < 2) {
      return;
    }
    let lo = Infinity;
    let hi = -Infinity;
    for (const p of series) {
      lo = Math.min(lo, p.value);
      hi = Math.max(hi, p.value);
    }
    if (hi - lo < 1e-9) {
      hi = lo + 1;
    }
    const toX = (i: number) => rect.x + (i / (series.length - 1)) * (rect.width - 1);
    const toY = (v: number) => y0 + laneH - 2 - ((v - lo) / (hi - lo)) * (laneH - 4);
    for (let i = 1; i < series.length; i++) {
      if (series[i].gapBefore) {
        continue; // gap: break the line, never interpolate
      }
      canvas.line(toX(i - 1), toY(series[i - 1].value), toX(i), toY(series[i].value),
        spec.color);
    }
  });
}
