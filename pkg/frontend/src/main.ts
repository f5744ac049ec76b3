/** DOM wiring for the annotation tool. All state transitions live in
 * state.ts; all network calls in api.ts. */

import { ApiClient, ApiRequestError } from "./api.js";
import { AnnotationSession } from "./state.js";
import { decodeMaskPng, MARKER_COLOR, tintMask } from "./overlay.js";
import type { SequenceRecord, ViewName } from "./types.js";
import { VIEW_ORDER } from "./types.js";

const api = new ApiClient("");

interface Elements {
  sequenceSelect: HTMLSelectElement;
  viewTabs: HTMLDivElement;
  canvas: HTMLCanvasElement;
  pointList: HTMLDivElement;
  segmentButton: HTMLButtonElement;
  segmentInfo: HTMLSpanElement;
  undoButton: HTMLButtonElement;
  reviewButton: HTMLButtonElement;
  reviewPanel: HTMLDivElement;
  reviewTable: HTMLTableElement;
  submitButton: HTMLButtonElement;
  noteKey: HTMLInputElement;
  noteValue: HTMLInputElement;
  banner: HTMLDivElement;
}

let els: Elements;
let session: AnnotationSession | null = null;
let image: HTMLImageElement | null = null;
let overlayBitmap: ImageBitmap | null = null;

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function showBanner(text: string, kind: "error" | "ok"): void {
  els.banner.textContent = text;
  els.banner.className = `banner ${kind}`;
  els.banner.style.display = "block";
  window.setTimeout(() => (els.banner.style.display = "none"), 5000);
}

function redraw(): void {
  const ctx = els.canvas.getContext("2d");
  if (!ctx || !session) return;
  ctx.clearRect(0, 0, els.canvas.width, els.canvas.height);
  if (image) {
    ctx.drawImage(image, 0, 0, els.canvas.width, els.canvas.height);
  }
  if (overlayBitmap) {
    ctx.drawImage(overlayBitmap, 0, 0, els.canvas.width, els.canvas.height);
  }
  ctx.fillStyle = MARKER_COLOR;
  for (const p of session.currentView.points) {
    const x = p.x * els.canvas.width;
    const y = p.y * els.canvas.height;
    ctx.beginPath();
    ctx.arc(x, y, 5, 0, 2 * Math.PI);
    ctx.fill();
    ctx.strokeStyle = "#ffffff";
    ctx.lineWidth = 1.5;
    ctx.stroke();
  }
}

function renderPointList(): void {
  if (!session) return;
  const view = session.currentView;
  els.pointList.innerHTML = "";
  view.points.forEach((p, i) => {
    const row = document.createElement("div");
    row.className = "point-row";
    const label = document.createElement("span");
    label.textContent = `#${i + 1} (${p.x.toFixed(3)}, ${p.y.toFixed(3)})`;
    const input = document.createElement("input");
    input.placeholder = "note";
    input.value = p.properties["note"] ?? "";
    input.addEventListener("input", () => {
      session?.setProperty(i, "note", input.value);
    });
    row.append(label, input);
    els.pointList.append(row);
    if (i === view.points.length - 1) {
      input.focus();
    }
  });
  els.segmentButton.disabled = !session.canSegment;
  els.submitButton.disabled = !session.canSubmit;
  els.segmentInfo.textContent = session.overlay
    ? `${session.overlay.labelCount} basins, fg ${(session.overlay.scoreHint * 100).toFixed(1)}%`
    : "";
}

function renderViewTabs(): void {
  if (!session) return;
  els.viewTabs.innerHTML = "";
  VIEW_ORDER.forEach((name) => {
    const tab = document.createElement("button");
    tab.textContent = `${name} (${session!.views.find((v) => v.view === name)!.points.length})`;
    tab.className = session!.currentView.view === name ? "tab active" : "tab";
    tab.addEventListener("click", () => switchView(name));
    els.viewTabs.append(tab);
  });
}

async function loadCurrentImage(): Promise<void> {
  if (!session) return;
  overlayBitmap = null;
  const img = new Image();
  img.src = api.imageUrl(session.currentView.imageId);
  await img.decode();
  image = img;
  els.canvas.width = img.naturalWidth;
  els.canvas.height = img.naturalHeight;
  redraw();
}

function switchView(view: ViewName): void {
  if (!session) return;
  session.selectView(view);
  overlayBitmap = null;
  renderViewTabs();
  renderPointList();
  void loadCurrentImage();
}

async function loadSequence(record: SequenceRecord): Promise<void> {
  session = new AnnotationSession(record);
  overlayBitmap = null;
  renderViewTabs();
  renderPointList();
  els.reviewPanel.style.display = "none";
  await loadCurrentImage();
}

async function segmentNow(): Promise<void> {
  if (!session || !image || !session.canSegment) return;
  const prompts = session.pixelKeypoints(image.naturalWidth, image.naturalHeight);
  els.segmentButton.disabled = true;
  try {
    const resp = await api.segment(session.currentView.imageId, prompts, "prompted");
    session.applyOverlay({
      maskPngBase64: resp.mask_png_base64,
      labelCount: resp.label_count,
      scoreHint: resp.score_hint,
    });
    overlayBitmap = await tintedBitmap(resp.mask_png_base64);
    showBanner(`segmented: ${resp.label_count} basins for ${prompts.length} prompts`, "ok");
  } catch (err) {
    session.clearOverlay();
    overlayBitmap = null;
    if (err instanceof ApiRequestError && err.status === 422) {
      showBanner("empty segmentation", "error");
    } else {
      showBanner(`segmentation failed: ${String(err)}`, "error");
    }
  } finally {
    els.segmentButton.disabled = !session.canSegment;
    renderPointList();
    redraw();
  }
}

async function tintedBitmap(maskBase64: string): Promise<ImageBitmap> {
  const raw = await decodeMaskPng(maskBase64);
  const off = document.createElement("canvas");
  off.width = raw.width;
  off.height = raw.height;
  const ctx = off.getContext("2d")!;
  ctx.drawImage(raw, 0, 0);
  const data = ctx.getImageData(0, 0, raw.width, raw.height);
  const gray = new Uint8Array(raw.width * raw.height);
  for (let i = 0; i < gray.length; i++) {
    gray[i] = data.data[4 * i];
  }
  const tinted = ctx.createImageData(raw.width, raw.height);
  tinted.data.set(tintMask(gray, raw.width, raw.height));
  return createImageBitmap(tinted);
}

function renderReview(): void {
  if (!session) return;
  els.reviewPanel.style.display = "block";
  session.reviewVisible = true;
  const rows = session.reviewRows();
  els.reviewTable.innerHTML =
    "<tr><th>view</th><th>#</th><th>x</th><th>y</th><th>properties</th></tr>";
  for (const row of rows) {
    const tr = document.createElement("tr");
    tr.innerHTML =
      `<td>${row.view}</td><td>${row.index + 1}</td>` +
      `<td>${row.x.toFixed(4)}</td><td>${row.y.toFixed(4)}</td>` +
      `<td>${Object.entries(row.properties)
        .map(([k, v]) => `${k}=${v}`)
        .join(", ")}</td>`;
    els.reviewTable.append(tr);
  }
}

async function submit(): Promise<void> {
  if (!session || !session.canSubmit) return;
  try {
    const stored = await api.submitAnnotation(session.toAnnotationRecord());
    showBanner(`annotation stored for ${stored.sequence_id}`, "ok");
  } catch (err) {
    if (err instanceof ApiRequestError && err.status === 409) {
      showBanner("already annotated", "error");
    } else if (err instanceof ApiRequestError && err.field) {
      showBanner(`invalid field ${err.field}: ${err.message}`, "error");
    } else {
      showBanner(`submit failed: ${String(err)}`, "error");
    }
  }
}

async function boot(): Promise<void> {
  els = {
    sequenceSelect: $("sequence-select") as HTMLSelectElement,
    viewTabs: $("view-tabs") as HTMLDivElement,
    canvas: $("image-canvas") as HTMLCanvasElement,
    pointList: $("point-list") as HTMLDivElement,
    segmentButton: $("segment-button") as HTMLButtonElement,
    segmentInfo: $("segment-info") as HTMLSpanElement,
    undoButton: $("undo-button") as HTMLButtonElement,
    reviewButton: $("review-button") as HTMLButtonElement,
    reviewPanel: $("review-panel") as HTMLDivElement,
    reviewTable: $("review-table") as HTMLTableElement,
    submitButton: $("submit-button") as HTMLButtonElement,
    noteKey: $("note-key") as HTMLInputElement,
    noteValue: $("note-value") as HTMLInputElement,
    banner: $("banner") as HTMLDivElement,
  };

  els.canvas.addEventListener("click", (ev) => {
    if (!session) return;
    const rect = els.canvas.getBoundingClientRect();
    const px = ((ev.clientX - rect.left) / rect.width) * els.canvas.width;
    const py = ((ev.clientY - rect.top) / rect.height) * els.canvas.height;
    if (session.clickAtCanvas(px, py, els.canvas.width, els.canvas.height)) {
      renderViewTabs();
      renderPointList();
      redraw();
    }
  });
  els.undoButton.addEventListener("click", () => {
    if (session?.undo()) {
      renderViewTabs();
      renderPointList();
      redraw();
    }
  });
  els.segmentButton.addEventListener("click", () => void segmentNow());
  els.reviewButton.addEventListener("click", renderReview);
  els.submitButton.addEventListener("click", () => void submit());
  els.noteValue.addEventListener("change", () => {
    if (session && els.noteKey.value) {
      session.setGlobalNote(els.noteKey.value, els.noteValue.value);
    }
  });
  els.sequenceSelect.addEventListener("change", async () => {
    const record = await api.getSequence(els.sequenceSelect.value);
    await loadSequence(record);
  });

  try {
    const sequences = await api.listSequences();
    for (const seq of sequences) {
      const opt = document.createElement("option");
      opt.value = seq.sequence_id;
      opt.textContent = `${seq.sequence_id} (${seq.captured_at})`;
      els.sequenceSelect.append(opt);
    }
    if (sequences.length) {
      await loadSequence(sequences[0]);
    } else {
      showBanner("no sequences in the data directory", "error");
    }
  } catch (err) {
    showBanner(`cannot reach the service: ${String(err)}`, "error");
  }
}

window.addEventListener("DOMContentLoaded", () => void boot());
