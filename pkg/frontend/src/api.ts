/** Thin fetch client for the toothseg service; the UI talks to the
 * backend exclusively through this module. */

import type {
  AnnotationRecord,
  PixelKeypoint,
  SegmentMethod,
  SegmentResponse,
  SequenceRecord,
} from "./types.js";

export class ApiRequestError extends Error {
  readonly status: number;
  readonly field: string | undefined;
  readonly body: unknown;

  constructor(status: number, body: unknown) {
    const detail =
      body && typeof body === "object" && "message" in body
        ? String((body as { message?: unknown }).message)
        : `HTTP ${status}`;
    super(detail);
    this.status = status;
    this.body = body;
    this.field =
      body && typeof body === "object" && "field" in body
        ? String((body as { field?: unknown }).field)
        : undefined;
  }
}

async function parseJson(resp: Response): Promise<unknown> {
  const text = await resp.text();
  try {
    return text ? JSON.parse(text) : null;
  } catch {
    return null;
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const body = await parseJson(resp);
    if (!resp.ok) {
      throw new ApiRequestError(resp.status, body);
    }
    return body;
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request("/api/health") as Promise<{ status: string; version: string }>;
  }

  listSequences(): Promise<SequenceRecord[]> {
    return this.request("/api/sequences") as Promise<SequenceRecord[]>;
  }

  getSequence(sequenceId: string): Promise<SequenceRecord> {
    return this.request(`/api/sequences/${sequenceId}`) as Promise<SequenceRecord>;
  }

  imageUrl(imageId: string): string {
    return `${this.baseUrl}/api/images/${imageId}`;
  }

  getAnnotation(sequenceId: string): Promise<AnnotationRecord> {
    return this.request(`/api/annotations/${sequenceId}`) as Promise<AnnotationRecord>;
  }

  submitAnnotation(record: AnnotationRecord): Promise<AnnotationRecord> {
    return this.request("/api/annotations", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(record),
    }) as Promise<AnnotationRecord>;
  }

  segment(
    imageId: string,
    keypoints: PixelKeypoint[],
    method: SegmentMethod = "prompted",
  ): Promise<SegmentResponse> {
    return this.request("/api/segment", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ image_id: imageId, keypoints, method }),
    }) as Promise<SegmentResponse>;
  }
}
