/** Acceptance round trip against a live service on synthetic fixtures:
 * click-place 12 points across the three views, submit, re-fetch equals
 * the submission; segment_now yields an overlay whose label_count equals
 * the click count. */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiRequestError } from "../src/api.js";
import { AnnotationSession } from "../src/state.js";

const PORT = 8900 + Math.floor(Math.random() * 500);
const BASE = `http://127.0.0.1:${PORT}`;
const IMAGE_SIZE = 256;

let dataDir: string;
let server: ChildProcess;
const api = new ApiClient(BASE);

async function waitForHealth(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const health = await api.health();
      if (health.status === "ok") return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("service did not come up");
    await new Promise((r) => setTimeout(r, 250));
  }
}

beforeAll(async () => {
  dataDir = mkdtempSync(join(tmpdir(), "toothseg-ui-"));
  const fixture = spawnSync("toothseg", ["fixture", "--out", dataDir, "--seed", "7", "--size", String(IMAGE_SIZE)]);
  if (fixture.status !== 0) {
    throw new Error(`fixture failed: ${fixture.stderr}`);
  }
  server = spawn("toothseg", ["serve", "--port", String(PORT), "--data-dir", dataDir], {
    stdio: "ignore",
  });
  await waitForHealth();
}, 60_000);

afterAll(() => {
  server?.kill();
  if (dataDir) rmSync(dataDir, { recursive: true, force: true });
});

describe("UI round trip against the live service", () => {
  it("places 12 points across 3 views, submits, and re-fetches identically", async () => {
    const sequences = await api.listSequences();
    expect(sequences.length).toBeGreaterThan(0);
    const session = new AnnotationSession(sequences[0]);

    // 4 clicks per view at canvas positions; canvas size is arbitrary
    const canvasW = 640;
    const canvasH = 480;
    for (let v = 0; v < 3; v++) {
      for (let i = 0; i < 4; i++) {
        const placed = session.clickAtCanvas(
          80 + i * 120,
          100 + i * 70 + v * 10,
          canvasW,
          canvasH,
        );
        expect(placed).toBe(true);
        session.setProperty(i, "note", `tooth-${session.currentView.view}-${i}`);
      }
      session.nextView();
    }
    expect(session.totalPoints).toBe(12);
    expect(session.canSubmit).toBe(true);

    const record = session.toAnnotationRecord();
    const stored = await api.submitAnnotation(record);
    expect(stored).toEqual(record);

    const fetched = await api.getAnnotation(session.sequenceId);
    expect(fetched).toEqual(record);

    // write-once: a second submit conflicts
    await expect(api.submitAnnotation(record)).rejects.toMatchObject({ status: 409 });
  });

  it("segment_now returns an overlay with label_count equal to the click count", async () => {
    const sequences = await api.listSequences();
    const session = new AnnotationSession(sequences[1]);
    const imageId = session.currentView.imageId;

    // click the scene's ground-truth keypoints (stored next to the fixture image)
    const kpsDoc = JSON.parse(
      readFileSync(join(dataDir, "images", `${imageId}_kps.json`), "utf-8"),
    );
    const keypoints: [number, number][] = kpsDoc.images[0].keypoints;
    for (const [x, y] of keypoints) {
      expect(session.clickAt(x / IMAGE_SIZE, y / IMAGE_SIZE)).toBe(true);
    }
    expect(session.canSegment).toBe(true);

    const prompts = session.pixelKeypoints(IMAGE_SIZE, IMAGE_SIZE);
    const resp = await api.segment(imageId, prompts, "prompted");
    session.applyOverlay({
      maskPngBase64: resp.mask_png_base64,
      labelCount: resp.label_count,
      scoreHint: resp.score_hint,
    });

    expect(resp.label_count).toBe(keypoints.length);
    expect(session.overlay).not.toBeNull();
    const png = Buffer.from(resp.mask_png_base64, "base64");
    expect(png.subarray(0, 8)).toEqual(
      Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    );
    expect(resp.score_hint).toBeGreaterThan(0);
  });

  it("unknown image id surfaces a 404 the banner path can render", async () => {
    await expect(api.segment("ghost", [{ x_px: 1, y_px: 1 }])).rejects.toSatisfy(
      (err: unknown) => err instanceof ApiRequestError && err.status === 404,
    );
  });
});
