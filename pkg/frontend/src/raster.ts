/**
 * Pure rasterization of a stroke buffer: white background (255), black
 * strokes (0), grayscale, at an arbitrary square export size. Deterministic,
 * no canvas APIs, so exports are byte-stable and testable off-browser.
 */

import { Stroke, StrokeBuffer } from "./strokes.js";

/** Distance from pixel center (px, py) to the segment (ax,ay)-(bx,by). */
function segmentDistance(px: number, py: number, ax: number, ay: number, bx: number, by: number): number {
  const dx = bx - ax;
  const dy = by - ay;
  const len2 = dx * dx + dy * dy;
  let t = 0;
  if (len2 > 0) {
    t = ((px - ax) * dx + (py - ay) * dy) / len2;
    t = Math.min(Math.max(t, 0), 1);
  }
  const cx = ax + t * dx;
  const cy = ay + t * dy;
  return Math.hypot(px - cx, py - cy);
}

function paintSegment(
  gray: Uint8Array,
  size: number,
  ax: number,
  ay: number,
  bx: number,
  by: number,
  radius: number,
): void {
  const r = Math.max(radius, 0.6); // keep thin diagonal strokes connected
  const x0 = Math.max(0, Math.floor(Math.min(ax, bx) - r - 1));
  const x1 = Math.min(size - 1, Math.ceil(Math.max(ax, bx) + r + 1));
  const y0 = Math.max(0, Math.floor(Math.min(ay, by) - r - 1));
  const y1 = Math.min(size - 1, Math.ceil(Math.max(ay, by) + r + 1));
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      if (segmentDistance(x, y, ax, ay, bx, by) <= r) {
        gray[y * size + x] = 0;
      }
    }
  }
}

/** Rasterize one stroke, scaled from canvas space into a size x size grid. */
function paintStroke(gray: Uint8Array, size: number, stroke: Stroke, scaleX: number, scaleY: number): void {
  const pts = stroke.points;
  if (pts.length === 0) return;
  const radius = (stroke.width * Math.min(scaleX, scaleY)) / 2;
  if (pts.length === 1) {
    const p = pts[0];
    paintSegment(gray, size, p.x * scaleX, p.y * scaleY, p.x * scaleX, p.y * scaleY, radius);
    return;
  }
  for (let i = 0; i + 1 < pts.length; i++) {
    paintSegment(
      gray,
      size,
      pts[i].x * scaleX,
      pts[i].y * scaleY,
      pts[i + 1].x * scaleX,
      pts[i + 1].y * scaleY,
      radius,
    );
  }
}

/** Export the buffer as a grayscale raster at the model's input size. */
export function rasterizeStrokes(buffer: StrokeBuffer, size: number): Uint8Array {
  if (size <= 0) throw new Error("export size must be positive");
  const gray = new Uint8Array(size * size).fill(255);
  const scaleX = size / buffer.width;
  const scaleY = size / buffer.height;
  for (const stroke of buffer.allStrokes()) {
    paintStroke(gray, size, stroke, scaleX, scaleY);
  }
  return gray;
}
