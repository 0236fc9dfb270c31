// Deterministic rasterization: the same document always produces the same
// index grid and the same wire payload.
//
// Sparse modes ship vector strokes and let the server rasterize (single
// source of truth); the local grid here only drives on-canvas preview and
// file export. Dense paint rasterizes client-side because the exported mask
// file *is* the artifact.

import { CanvasDocument, Element } from "./document.js";
import { StrokePayload, UNKNOWN } from "./types.js";

/** Integer line rasterization; same rule as the server (both ends included). */
export function bresenham(
  x0: number, y0: number, x1: number, y1: number,
): [number, number][] {
  const points: [number, number][] = [];
  const dx = Math.abs(x1 - x0);
  const dy = -Math.abs(y1 - y0);
  const sx = x0 < x1 ? 1 : -1;
  const sy = y0 < y1 ? 1 : -1;
  let err = dx + dy;
  let x = x0;
  let y = y0;
  for (;;) {
    points.push([x, y]);
    if (x === x1 && y === y1) break;
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
  return points;
}

function stampDisc(
  grid: Uint8Array, width: number, height: number,
  cx: number, cy: number, radius: number, value: number,
): void {
  const r = Math.max(0, Math.floor(radius));
  for (let y = cy - r; y <= cy + r; y++) {
    for (let x = cx - r; x <= cx + r; x++) {
      if (x < 0 || y < 0 || x >= width || y >= height) continue;
      const ddx = x - cx;
      const ddy = y - cy;
      if (ddx * ddx + ddy * ddy <= r * r) grid[y * width + x] = value;
    }
  }
}

function crossSegments(el: { x: number; y: number; arm: number }): [number, number][][] {
  const a = Math.max(1, Math.round(el.arm));
  return [
    [[el.x - a, el.y], [el.x + a, el.y]],
    [[el.x, el.y - a], [el.x, el.y + a]],
  ];
}

function applyElement(
  grid: Uint8Array, width: number, height: number, el: Element, eraseValue: number,
): void {
  const put = (x: number, y: number, value: number) => {
    if (x >= 0 && y >= 0 && x < width && y < height) grid[y * width + x] = value;
  };
  switch (el.kind) {
    case "stroke": {
      const pts = el.points.map(([x, y]) => [Math.round(x), Math.round(y)] as [number, number]);
      const line: [number, number][] = pts.length === 1 ? [pts[0]] : [];
      for (let i = 0; i + 1 < pts.length; i++) {
        line.push(...bresenham(pts[i][0], pts[i][1], pts[i + 1][0], pts[i + 1][1]));
      }
      for (const [x, y] of line) {
        if (el.brushSize > 1) stampDisc(grid, width, height, x, y, el.brushSize / 2, el.classId);
        else put(x, y, el.classId);
      }
      break;
    }
    case "point":
      put(Math.round(el.x), Math.round(el.y), el.classId);
      break;
    case "cross":
      for (const [[ax, ay], [bx, by]] of crossSegments(el).map(
        (seg) => [seg[0], seg[1]] as const,
      )) {
        for (const [x, y] of bresenham(
          Math.round(ax), Math.round(ay), Math.round(bx), Math.round(by),
        )) {
          put(x, y, el.classId);
        }
      }
      break;
    case "erase":
      stampDisc(grid, width, height, Math.round(el.x), Math.round(el.y), el.radius, eraseValue);
      break;
  }
}

/** Index grid for the document: dense starts at class 0, sparse at UNKNOWN. */
export function rasterize(doc: CanvasDocument): Uint8Array {
  const fill = doc.mode === "dense-paint" ? 0 : UNKNOWN;
  const grid = new Uint8Array(doc.width * doc.height).fill(fill);
  for (const el of doc.elements()) {
    applyElement(grid, doc.width, doc.height, el, fill);
  }
  return grid;
}

/** Vector payload for sparse documents; erased marks are resolved locally. */
export function toStrokePayload(doc: CanvasDocument): StrokePayload[] {
  if (doc.mode === "dense-paint") {
    throw new Error("dense documents travel as mask files, not strokes");
  }
  // Resolve erasures against the rasterized grid so the wire payload equals
  // what the preview shows: one point per surviving annotated pixel.
  const grid = rasterize(doc);
  const strokes: StrokePayload[] = [];
  for (let y = 0; y < doc.height; y++) {
    for (let x = 0; x < doc.width; x++) {
      const value = grid[y * doc.width + x];
      if (value !== UNKNOWN) {
        strokes.push({ class_id: value, points: [[x, y]], type: "point" });
      }
    }
  }
  return strokes;
}

/** Sparse annotation document in the pipeline's JSON format. */
export function toAnnotationJson(doc: CanvasDocument): string {
  const elements = toStrokePayload(doc).map((s) => ({
    class_id: s.class_id,
    type: s.type,
    points: s.points,
  }));
  return JSON.stringify(
    {
      kind: "sparse",
      canvas: [doc.width, doc.height],
      class_count: doc.classCount,
      elements,
    },
    null,
    2,
  );
}
