/**
 * Stroke model for the sketch studio: an ordered list of strokes, each an
 * ordered list of canvas-space points plus a width, with undo/redo.
 * Points are clamped to the canvas bounds on entry.
 */

export interface Point {
  x: number;
  y: number;
}

export interface Stroke {
  points: Point[];
  width: number;
}

export class StrokeBuffer {
  private strokes: Stroke[] = [];
  private redoStack: Stroke[] = [];
  private active: Stroke | null = null;
  /** bumped on every visible change, for cheap dirty-checking */
  revision = 0;

  constructor(readonly width: number, readonly height: number) {
    if (width <= 0 || height <= 0) throw new Error("canvas bounds must be positive");
  }

  private clamp(x: number, y: number): Point {
    return {
      x: Math.min(Math.max(x, 0), this.width - 1),
      y: Math.min(Math.max(y, 0), this.height - 1),
    };
  }

  beginStroke(x: number, y: number, width: number): void {
    this.endStroke();
    this.active = { points: [this.clamp(x, y)], width: Math.max(width, 1) };
    this.revision++;
  }

  extendStroke(x: number, y: number): void {
    if (!this.active) return;
    const p = this.clamp(x, y);
    const last = this.active.points[this.active.points.length - 1];
    if (p.x === last.x && p.y === last.y) return;
    this.active.points.push(p);
    this.revision++;
  }

  endStroke(): void {
    if (!this.active) return;
    this.strokes.push(this.active);
    this.active = null;
    this.redoStack = []; // a new stroke invalidates the redo branch
    this.revision++;
  }

  undo(): boolean {
    this.endStroke();
    const s = this.strokes.pop();
    if (!s) return false;
    this.redoStack.push(s);
    this.revision++;
    return true;
  }

  redo(): boolean {
    const s = this.redoStack.pop();
    if (!s) return false;
    this.strokes.push(s);
    this.revision++;
    return true;
  }

  clear(): void {
    this.strokes = [];
    this.redoStack = [];
    this.active = null;
    this.revision++;
  }

  isEmpty(): boolean {
    return this.strokes.length === 0 && this.active === null;
  }

  /** committed strokes plus the one being drawn, in draw order */
  allStrokes(): readonly Stroke[] {
    return this.active ? [...this.strokes, this.active] : [...this.strokes];
  }
}
