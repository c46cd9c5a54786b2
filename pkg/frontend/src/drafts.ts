/**
 * Client-side operator drafts.
 *
 * Drafts live purely in the browser until submitted; each carries the
 * state version it was drafted against so a submission either fully
 * applies or is rejected as a conflict with no state change.
 */

import type { Point, PolygonPayload } from "./types.js";

export interface DraftValidity {
  valid: boolean;
  reasons: string[];
}

function segmentsProperlyIntersect(a: Point, b: Point, c: Point, d: Point): boolean {
  const orient = (p: Point, q: Point, r: Point) =>
    (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
  const d1 = orient(c, d, a);
  const d2 = orient(c, d, b);
  const d3 = orient(a, b, c);
  const d4 = orient(a, b, d);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

export function ringSelfIntersects(ring: Point[]): boolean {
  const n = ring.length;
  for (let i = 0; i < n; i++) {
    const a = ring[i];
    const b = ring[(i + 1) % n];
    for (let j = i + 1; j < n; j++) {
      // skip segments sharing an endpoint
      if (j === i || (j + 1) % n === i || (i + 1) % n === j) continue;
      if (segmentsProperlyIntersect(a, b, ring[j], ring[(j + 1) % n])) return true;
    }
  }
  return false;
}

export function ringArea(ring: Point[]): number {
  let area = 0;
  for (let i = 0; i < ring.length; i++) {
    const [x0, y0] = ring[i];
    const [x1, y1] = ring[(i + 1) % ring.length];
    area += x0 * y1 - x1 * y0;
  }
  return Math.abs(area) / 2;
}

export class PolygonDraft {
  readonly points: Point[] = [];

  constructor(readonly baseVersion: number) {}

  addPoint(p: Point): void {
    this.points.push(p);
  }

  undo(): void {
    this.points.pop();
  }

  validity(): DraftValidity {
    const reasons: string[] = [];
    if (this.points.length < 3) reasons.push("need at least 3 vertices");
    if (this.points.some(([x, y]) => !Number.isFinite(x) || !Number.isFinite(y))) {
      reasons.push("coordinates must be finite");
    }
    if (this.points.length >= 3) {
      if (ringArea(this.points) <= 0) reasons.push("polygon has zero area");
      if (ringSelfIntersects(this.points)) reasons.push("polygon self-intersects");
    }
    return { valid: reasons.length === 0, reasons };
  }

  toPayload(): PolygonPayload {
    const v = this.validity();
    if (!v.valid) {
      throw new Error(`draft is not submittable: ${v.reasons.join("; ")}`);
    }
    return { envelope: this.points.map((p) => [p[0], p[1]]), holes: [] };
  }
}

export class PointsDraft {
  readonly points: Point[] = [];

  constructor(readonly baseVersion: number) {}

  addPoint(p: Point): void {
    this.points.push(p);
  }

  undo(): void {
    this.points.pop();
  }

  validity(): DraftValidity {
    const reasons: string[] = [];
    if (this.points.length < 1) reasons.push("need at least one point");
    if (this.points.some(([x, y]) => !Number.isFinite(x) || !Number.isFinite(y))) {
      reasons.push("coordinates must be finite");
    }
    return { valid: reasons.length === 0, reasons };
  }
}
