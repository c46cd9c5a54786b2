import { describe, expect, it } from "vitest";

import { PointsDraft, PolygonDraft, ringSelfIntersects } from "../src/drafts.js";

describe("polygon drafts", () => {
  it("is invalid until it has three vertices and positive area", () => {
    const draft = new PolygonDraft(3);
    expect(draft.validity().valid).toBe(false);
    draft.addPoint([0, 0]);
    draft.addPoint([4, 0]);
    expect(draft.validity().valid).toBe(false);
    draft.addPoint([4, 4]);
    expect(draft.validity().valid).toBe(true);
  });

  it("flags self-intersecting rings and refuses to build a payload", () => {
    const draft = new PolygonDraft(1);
    for (const p of [[0, 0], [4, 4], [4, 0], [0, 4]] as const) {
      draft.addPoint([p[0], p[1]]);
    }
    const v = draft.validity();
    expect(v.valid).toBe(false);
    expect(v.reasons.join(" ")).toContain("self-intersects");
    expect(() => draft.toPayload()).toThrow(/not submittable/);
  });

  it("carries the version it was drafted against", () => {
    const draft = new PolygonDraft(7);
    expect(draft.baseVersion).toBe(7);
  });

  it("undo removes the last vertex", () => {
    const draft = new PolygonDraft(1);
    draft.addPoint([0, 0]);
    draft.addPoint([1, 0]);
    draft.undo();
    expect(draft.points).toHaveLength(1);
  });

  it("detects self-intersection independent of draft state", () => {
    expect(ringSelfIntersects([[0, 0], [4, 0], [4, 4], [0, 4]])).toBe(false);
    expect(ringSelfIntersects([[0, 0], [4, 4], [4, 0], [0, 4]])).toBe(true);
  });
});

describe("point drafts", () => {
  it("needs at least one finite point", () => {
    const draft = new PointsDraft(2);
    expect(draft.validity().valid).toBe(false);
    draft.addPoint([3, 4]);
    expect(draft.validity().valid).toBe(true);
    draft.addPoint([Infinity, 0]);
    expect(draft.validity().valid).toBe(false);
  });
});
