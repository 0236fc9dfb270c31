import { describe, expect, it } from "vitest";

import { CanvasDocument } from "../src/document.js";
import { rasterize } from "../src/raster.js";

function scribble(classId: number, x: number): CanvasDocument["add"] extends never ? never : any {
  return { kind: "stroke", classId, points: [[x, 2], [x, 8]], brushSize: 1 };
}

describe("CanvasDocument", () => {
  it("rejects class ids outside the palette", () => {
    const doc = new CanvasDocument("scribble", 16, 16, 3);
    expect(() => doc.add(scribble(5, 1))).toThrow(/class id/);
    expect(doc.size).toBe(0);
  });

  it("undo restores the pre-stroke state, redo reapplies it", () => {
    const doc = new CanvasDocument("scribble", 16, 16, 3);
    doc.add(scribble(1, 3));
    const before = rasterize(doc).slice();
    doc.add(scribble(2, 7));
    expect(doc.undo()).toBe(true);
    expect(rasterize(doc)).toEqual(before);
    expect(doc.redo()).toBe(true);
    expect(doc.size).toBe(2);
    expect(doc.undo() && doc.undo()).toBe(true);
    expect(doc.undo()).toBe(false); // nothing left to undo
  });

  it("a new edit after undo drops the redo tail", () => {
    const doc = new CanvasDocument("scribble", 16, 16, 3);
    doc.add(scribble(1, 3));
    doc.add(scribble(2, 7));
    doc.undo();
    doc.add(scribble(0, 5));
    expect(doc.redo()).toBe(false);
    expect(doc.size).toBe(2);
  });

  it("history replay reproduces the document exactly", () => {
    const doc = new CanvasDocument("scribble", 16, 16, 3);
    doc.add(scribble(1, 3));
    doc.add({ kind: "point", classId: 2, x: 9, y: 9 });
    doc.add({ kind: "erase", x: 3, y: 5, radius: 2 });
    doc.add({ kind: "cross", classId: 0, x: 12, y: 4, arm: 2 });
    doc.undo(); // replay must reflect the cursor, not the raw log
    const copy = doc.replay();
    expect(copy.size).toBe(doc.size);
    expect(rasterize(copy)).toEqual(rasterize(doc));
  });

  it("empty sparse documents are flagged for the synthesis gate", () => {
    const doc = new CanvasDocument("scribble", 16, 16, 3);
    expect(doc.isEmpty).toBe(true);
    doc.add(scribble(1, 1));
    expect(doc.isEmpty).toBe(false);
  });
});
