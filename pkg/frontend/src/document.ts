// Layout document: an append-only edit log with an undo cursor.
//
// Every gesture (stroke, landmark point, cross line, erase) becomes one log
// entry, so replaying entries 0..cursor reproduces the document exactly;
// undo/redo just move the cursor.

export type EditorMode = "dense-paint" | "scribble" | "landmark" | "crossline";

export interface StrokeElement {
  kind: "stroke";
  classId: number;
  points: [number, number][];
  brushSize: number;
}

export interface PointElement {
  kind: "point";
  classId: number;
  x: number;
  y: number;
}

export interface CrossElement {
  kind: "cross";
  classId: number;
  x: number;
  y: number;
  arm: number;
}

export interface EraseElement {
  kind: "erase";
  x: number;
  y: number;
  radius: number;
}

export type Element = StrokeElement | PointElement | CrossElement | EraseElement;

export class CanvasDocument {
  private log: Element[] = [];
  private cursor = 0;

  constructor(
    readonly mode: EditorMode,
    readonly width: number,
    readonly height: number,
    readonly classCount: number,
  ) {}

  private validate(el: Element): void {
    if (el.kind !== "erase") {
      if (!Number.isInteger(el.classId) || el.classId < 0 || el.classId >= this.classCount) {
        throw new Error(`class id ${(el as { classId: number }).classId} outside palette`);
      }
    }
  }

  add(el: Element): void {
    this.validate(el);
    this.log.length = this.cursor; // a new edit drops any redo tail
    this.log.push(el);
    this.cursor = this.log.length;
  }

  undo(): boolean {
    if (this.cursor === 0) return false;
    this.cursor -= 1;
    return true;
  }

  redo(): boolean {
    if (this.cursor === this.log.length) return false;
    this.cursor += 1;
    return true;
  }

  clear(): void {
    this.log = [];
    this.cursor = 0;
  }

  /** Elements currently in effect, in application order. */
  elements(): readonly Element[] {
    return this.log.slice(0, this.cursor);
  }

  get size(): number {
    return this.cursor;
  }

  get isEmpty(): boolean {
    return this.cursor === 0;
  }

  /** A fresh document built by replaying the active log. */
  replay(): CanvasDocument {
    const copy = new CanvasDocument(this.mode, this.width, this.height, this.classCount);
    for (const el of this.elements()) copy.add(structuredClone(el));
    return copy;
  }
}
