import { describe, expect, it } from "vitest";

import { AnnotationSession } from "../src/state.js";
import type { SequenceRecord } from "../src/types.js";

function sequence(): SequenceRecord {
  return {
    sequence_id: "seq000",
    captured_at: "2023-06-01T09:00:00+00:00",
    views: [
      { view: "upper", image_id: "seq000_upper", file: "images/seq000_upper.png" },
      { view: "lower", image_id: "seq000_lower", file: "images/seq000_lower.png" },
      { view: "front", image_id: "seq000_front", file: "images/seq000_front.png" },
    ],
  };
}

describe("AnnotationSession", () => {
  it("orders views lower -> front -> upper regardless of server order", () => {
    const s = new AnnotationSession(sequence());
    expect(s.views.map((v) => v.view)).toEqual(["lower", "front", "upper"]);
    expect(s.currentView.view).toBe("lower");
  });

  it("cycles through the three views and wraps around", () => {
    const s = new AnnotationSession(sequence());
    expect(s.nextView()).toBe("front");
    expect(s.nextView()).toBe("upper");
    expect(s.nextView()).toBe("lower");
  });

  it("stores clicks as relative coordinates", () => {
    const s = new AnnotationSession(sequence());
    expect(s.clickAtCanvas(128, 256, 512, 512)).toBe(true);
    expect(s.currentView.points[0]).toMatchObject({ x: 0.25, y: 0.5 });
  });

  it("is invariant to the canvas size", () => {
    const a = new AnnotationSession(sequence());
    const b = new AnnotationSession(sequence());
    a.clickAtCanvas(100, 150, 400, 300);
    b.clickAtCanvas(250, 400, 1000, 800);
    expect(a.currentView.points[0]).toEqual(b.currentView.points[0]);
  });

  it("ignores clicks outside the image", () => {
    const s = new AnnotationSession(sequence());
    expect(s.clickAt(1.2, 0.5)).toBe(false);
    expect(s.clickAt(-0.01, 0.5)).toBe(false);
    expect(s.currentView.points).toHaveLength(0);
  });

  it("undo removes the latest point only on the current view", () => {
    const s = new AnnotationSession(sequence());
    s.clickAt(0.1, 0.1);
    s.clickAt(0.2, 0.2);
    s.nextView();
    s.clickAt(0.3, 0.3);
    expect(s.undo()).toBe(true);
    expect(s.currentView.points).toHaveLength(0);
    s.selectView("lower");
    expect(s.currentView.points).toHaveLength(2);
  });

  it("gates segment and submit on placed points", () => {
    const s = new AnnotationSession(sequence());
    expect(s.canSegment).toBe(false);
    expect(s.canSubmit).toBe(false);
    s.clickAt(0.5, 0.5);
    expect(s.canSegment).toBe(true);
    expect(s.canSubmit).toBe(false);
    s.nextView();
    s.clickAt(0.5, 0.5);
    s.nextView();
    s.clickAt(0.5, 0.5);
    expect(s.canSubmit).toBe(true);
  });

  it("converts prompts to pixel coordinates inside the frame", () => {
    const s = new AnnotationSession(sequence());
    s.clickAt(0.5, 0.25);
    s.clickAt(1.0, 1.0);
    const prompts = s.pixelKeypoints(256, 256);
    expect(prompts[0]).toEqual({ x_px: 128, y_px: 64 });
    expect(prompts[1].x_px).toBeLessThan(256);
    expect(prompts[1].y_px).toBeLessThan(256);
  });

  it("serializes the wire record with properties and notes", () => {
    const s = new AnnotationSession(sequence());
    s.clickAt(0.5, 0.5);
    s.setProperty(0, "state", "healthy");
    s.nextView();
    s.clickAt(0.25, 0.75);
    s.nextView();
    s.clickAt(0.125, 0.625);
    s.setGlobalNote("overall", "fine");
    const record = s.toAnnotationRecord();
    expect(record.schema_version).toBe(1);
    expect(record.sequence_id).toBe("seq000");
    expect(record.views.map((v) => v.view)).toEqual(["lower", "front", "upper"]);
    expect(record.views[0].teeth[0]).toEqual({
      x: 0.5,
      y: 0.5,
      properties: { state: "healthy" },
    });
    expect(record.global_notes).toEqual({ overall: "fine" });
  });

  it("clears the overlay when switching views", () => {
    const s = new AnnotationSession(sequence());
    s.clickAt(0.5, 0.5);
    s.applyOverlay({ maskPngBase64: "abc", labelCount: 1, scoreHint: 0.1 });
    s.nextView();
    expect(s.overlay).toBeNull();
  });

  it("lists review rows across all views", () => {
    const s = new AnnotationSession(sequence());
    s.clickAt(0.1, 0.2);
    s.nextView();
    s.clickAt(0.3, 0.4);
    s.clickAt(0.5, 0.6);
    const rows = s.reviewRows();
    expect(rows).toHaveLength(3);
    expect(rows[1]).toMatchObject({ view: "front", index: 0 });
  });
});
