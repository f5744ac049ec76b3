/** Wire types of the toothseg service API. */

export type ViewName = "lower" | "front" | "upper";

export const VIEW_ORDER: ViewName[] = ["lower", "front", "upper"];

export interface SequenceView {
  view: ViewName;
  image_id: string;
  file: string;
}

export interface SequenceRecord {
  sequence_id: string;
  captured_at: string;
  views: SequenceView[];
}

export interface ToothAnnotation {
  x: number; // relative [0, 1]
  y: number;
  properties: Record<string, string>;
}

export interface AnnotationView {
  view: ViewName;
  image_id: string;
  teeth: ToothAnnotation[];
}

export interface AnnotationRecord {
  schema_version: 1;
  sequence_id: string;
  captured_at: string;
  views: AnnotationView[];
  global_notes: Record<string, string>;
}

export interface PixelKeypoint {
  x_px: number;
  y_px: number;
}

export type SegmentMethod = "prompted" | "otsu" | "hsv";

export interface SegmentResponse {
  mask_png_base64: string;
  label_count: number;
  score_hint: number;
  error?: string;
}

export interface ApiError {
  error: string;
  field?: string;
  message?: string;
}
