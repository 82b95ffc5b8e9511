/**
 * Minimal RGBA raster canvas: enough 2D drawing for the cockpit (fills,
 * lines, circles, grayscale blits) plus PPM export for headless snapshots.
 */

export type Color = [number, number, number];

export class Canvas {
  readonly data: Uint8ClampedArray;

  constructor(readonly width: number, readonly height: number) {
    this.data = new Uint8ClampedArray(width * height * 4);
    this.clear([0, 0, 0]);
  }

  clear(color: Color): void {
    for (let i = 0; i < this.width * this.height; i++) {
      this.data[4 * i] = color[0];
      this.data[4 * i + 1] = color[1];
      this.data[4 * i + 2] = color[2];
      this.data[4 * i + 3] = 255;
    }
  }

  set(x: number, y: number, color: Color, alpha = 1): void {
    const xi = Math.round(x);
    const yi = Math.round(y);
    if (xi < 0 || yi < 0 || xi >= this.width || yi >= this.height) {
      return;
    }
    const i = 4 * (yi * this.width + xi);
    if (alpha >= 1) {
      this.data[i] = color[0];
      this.data[i + 1] = color[1];
      this.data[i + 2] = color[2];
    } else {
      this.data[i] = this.data[i] * (1 - alpha) + color[0] * alpha;
      this.data[i + 1] = this.data[i + 1] * (1 - alpha) + color[1] * alpha;
      this.data[i + 2] = this.data[i + 2] * (1 - alpha) + color[2] * alpha;
    }
    this.data[i + 3] = 255;
  }

  get(x: number, y: number): Color {
    const i = 4 * (Math.round(y) * this.width + Math.round(x));
    return [this.data[i], this.data[i + 1], this.data[i + 2]];
  }

  fillRect(x0: number, y0: number, w: number, h: number, color: Color, alpha = 1): void {
    for (let y = y0; y < y0 + h; y++) {
      for (let x = x0; x < x0 + w; x++) {
        this.set(x, y, color, alpha);
      }
    }
  }

  strokeRect(x0: number, y0: number, w: number, h: number, color: Color): void {
    this.line(x0, y0, x0 + w - 1, y0, color);
    this.line(x0, y0 + h - 1, x0 + w - 1, y0 + h - 1, color);
    this.line(x0, y0, x0, y0 + h - 1, color);
    this.line(x0 + w - 1, y0, x0 + w - 1, y0 + h - 1, color);
  }

  line(x0: number, y0: number, x1: number, y1: number, color: Color): void {
    // Bresenham on rounded endpoints
    let x = Math.round(x0);
    let y = Math.round(y0);
    const xe = Math.round(x1);
    const ye = Math.round(y1);
    const dx = Math.abs(xe - x);
    const dy = -Math.abs(ye - y);
    const sx = x < xe ? 1 : -1;
    const sy = y < ye ? 1 : -1;
    let err = dx + dy;
    for (;;) {
      this.set(x, y, color);
      if (x === xe && y === ye) {
        break;
      }
      const e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y += sy;
      }
    }
  }

  circle(cx: number, cy: number, radius: number, color: Color, fill = false): void {
    if (fill) {
      for (let y = -radius; y <= radius; y++) {
        const half = Math.floor(Math.sqrt(radius * radius - y * y));
        for (let x = -half; x <= half; x++) {
          this.set(cx + x, cy + y, color);
        }
      }
      return;
    }
    const steps = Math.max(16, Math.ceil(2 * Math.PI * radius));
    for (let i = 0; i < steps; i++) {
      const a = (2 * Math.PI * i) / steps;
      this.set(cx + radius * Math.cos(a), cy + radius * Math.sin(a), color);
    }
  }

  cross(cx: number, cy: number, arm: number, color: Color): void {
    this.line(cx - arm, cy, cx + arm, cy, color);
    this.line(cx, cy - arm, cx, cy + arm, color);
  }

  /** Nearest-neighbour blit of a grayscale image into the given rect. */
  blitGray(
    pixels: Uint8Array,
    srcW: number,
    srcH: number,
    x0: number,
    y0: number,
    w: number,
    h: number,
    dim = 1,
  ): void {
    for (let y = 0; y < h; y++) {
      const sy = Math.min(srcH - 1, Math.floor((y * srcH) / h));
      for (let x = 0; x < w; x++) {
        const sx = Math.min(srcW - 1, Math.floor((x * srcW) / w));
        const v = pixels[sy * srcW + sx] * dim;
        this.set(x0 + x, y0 + y, [v, v, v]);
      }
    }
  }

  /** Translucent heatmap overlay: hot colors where the map is strong. */
  overlayHeat(
    pixels: Uint8Array,
    srcW: number,
    srcH: number,
    x0: number,
    y0: number,
    w: number,
    h: number,
    alpha = 0.35,
  ): void {
    for (let y = 0; y < h; y++) {
      const sy = Math.min(srcH - 1, Math.floor((y * srcH) / h));
      for (let x = 0; x < w; x++) {
        const sx = Math.min(srcW - 1, Math.floor((x * srcW) / w));
        const v = pixels[sy * srcW + sx] / 255;
        if (v < 0.05) {
          continue;
        }
        this.set(x0 + x, y0 + y, [255 * v, 160 * v * v, 0], alpha * v);
      }
    }
  }

  toPpm(): Uint8Array {
    const header = Buffer.from(`P6\n${this.width} ${this.height}\n255\n`, "ascii");
    const body = Buffer.alloc(this.width * this.height * 3);
    for (let i = 0; i < this.width * this.height; i++) {
      body[3 * i] = this.data[4 * i];
      body[3 * i + 1] = this.data[4 * i + 1];
      body[3 * i + 2] = this.data[4 * i + 2];
    }
    return Buffer.concat([header, body]);
  }
}
