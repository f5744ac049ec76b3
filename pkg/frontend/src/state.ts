/** Pure annotation-session state: point placement in relative
 * coordinates, per-point property drafts, view cycling, overlays, and
 * serialization to the wire format. No DOM access here, so every
 * transition is unit-testable. */

import type {
  AnnotationRecord,
  PixelKeypoint,
  SequenceRecord,
  ViewName,
} from "./types.js";
import { VIEW_ORDER } from "./types.js";

export interface PlacedPoint {
  x: number; // relative [0, 1]
  y: number;
  properties: Record<string, string>;
}

export interface ViewDraft {
  view: ViewName;
  imageId: string;
  points: PlacedPoint[];
}

export interface OverlayState {
  maskPngBase64: string;
  labelCount: number;
  scoreHint: number;
}

export class AnnotationSession {
  readonly sequenceId: string;
  readonly capturedAt: string;
  readonly views: ViewDraft[];
  viewIndex = 0;
  overlay: OverlayState | null = null;
  globalNotes: Record<string, string> = {};
  reviewVisible = false;

  constructor(sequence: SequenceRecord) {
    this.sequenceId = sequence.sequence_id;
    this.capturedAt = sequence.captured_at;
    // fixed lower -> front -> upper cycle regardless of server order
    this.views = VIEW_ORDER.map((name) => {
      const entry = sequence.views.find((v) => v.view === name);
      if (!entry) {
        throw new Error(`sequence ${sequence.sequence_id} is missing the ${name} view`);
      }
      return { view: name, imageId: entry.image_id, points: [] };
    });
  }

  get currentView(): ViewDraft {
    return this.views[this.viewIndex];
  }

  /** Place a point given relative coordinates; outside clicks are ignored. */
  clickAt(relX: number, relY: number): boolean {
    if (relX < 0 || relX > 1 || relY < 0 || relY > 1 || !isFinite(relX) || !isFinite(relY)) {
      return false;
    }
    this.currentView.points.push({ x: relX, y: relY, properties: {} });
    return true;
  }

  /** Place a point given canvas pixel coordinates. The stored value is
   * relative, so the canvas size never affects the annotation. */
  clickAtCanvas(px: number, py: number, canvasW: number, canvasH: number): boolean {
    if (canvasW <= 0 || canvasH <= 0) {
      return false;
    }
    return this.clickAt(px / canvasW, py / canvasH);
  }

  undo(): boolean {
    return this.currentView.points.pop() !== undefined;
  }

  setProperty(pointIndex: number, key: string, value: string): void {
    const point = this.currentView.points[pointIndex];
    if (!point) {
      throw new Error(`no point ${pointIndex} on the ${this.currentView.view} view`);
    }
    if (value === "") {
      delete point.properties[key];
    } else {
      point.properties[key] = value;
    }
  }

  setGlobalNote(key: string, value: string): void {
    if (value === "") {
      delete this.globalNotes[key];
    } else {
      this.globalNotes[key] = value;
    }
  }

  nextView(): ViewName {
    this.viewIndex = (this.viewIndex + 1) % this.views.length;
    this.overlay = null;
    return this.currentView.view;
  }

  selectView(view: ViewName): void {
    const index = this.views.findIndex((v) => v.view === view);
    if (index >= 0 && index !== this.viewIndex) {
      this.viewIndex = index;
      this.overlay = null;
    }
  }

  get canSegment(): boolean {
    return this.currentView.points.length > 0;
  }

  get canSubmit(): boolean {
    return this.views.every((v) => v.points.length > 0);
  }

  get totalPoints(): number {
    return this.views.reduce((acc, v) => acc + v.points.length, 0);
  }

  /** Current view's points in pixel coordinates for segmentation prompts. */
  pixelKeypoints(imageW: number, imageH: number): PixelKeypoint[] {
    // clamp a hair inside the frame so x=1.0 stays a valid pixel column
    const clamp = (v: number, top: number) => Math.min(Math.max(v, 0), top - 1e-3);
    return this.currentView.points.map((p) => ({
      x_px: clamp(p.x * imageW, imageW),
      y_px: clamp(p.y * imageH, imageH),
    }));
  }

  applyOverlay(overlay: OverlayState): void {
    this.overlay = overlay;
  }

  clearOverlay(): void {
    this.overlay = null;
  }

  /** Serialize the session to the write-once annotation wire format. */
  toAnnotationRecord(): AnnotationRecord {
    return {
      schema_version: 1,
      sequence_id: this.sequenceId,
      captured_at: this.capturedAt,
      views: this.views.map((v) => ({
        view: v.view,
        image_id: v.imageId,
        teeth: v.points.map((p) => ({
          x: p.x,
          y: p.y,
          properties: { ...p.properties },
        })),
      })),
      global_notes: { ...this.globalNotes },
    };
  }

  /** Rows for the review table: one per tooth across all views. */
  reviewRows(): { view: ViewName; index: number; x: number; y: number; properties: Record<string, string> }[] {
    const rows = [];
    for (const view of this.views) {
      for (let i = 0; i < view.points.length; i++) {
        const p = view.points[i];
        rows.push({ view: view.view, index: i, x: p.x, y: p.y, properties: p.properties });
      }
    }
    return rows;
  }
}
