/** Mask-overlay pixel math, kept DOM-free so it can be unit tested. */

/** Turquoise, per the marker convention: predictions and overlays are
 * turquoise, ground-truth/user markers dark purple. */
export const OVERLAY_RGB: [number, number, number] = [64, 224, 208];
export const MARKER_COLOR = "#2d1e5f";
export const OVERLAY_ALPHA = 0.5;

/** Turn an 8-bit gray mask into RGBA pixels: foreground becomes the
 * overlay color at 50% alpha, background stays fully transparent. */
export function tintMask(gray: Uint8Array | Uint8ClampedArray, width: number, height: number): Uint8ClampedArray {
  if (gray.length !== width * height) {
    throw new Error(`mask length ${gray.length} != ${width}x${height}`);
  }
  const rgba = new Uint8ClampedArray(width * height * 4);
  const alpha = Math.round(OVERLAY_ALPHA * 255);
  for (let i = 0; i < gray.length; i++) {
    if (gray[i] > 127) {
      rgba[4 * i] = OVERLAY_RGB[0];
      rgba[4 * i + 1] = OVERLAY_RGB[1];
      rgba[4 * i + 2] = OVERLAY_RGB[2];
      rgba[4 * i + 3] = alpha;
    }
  }
  return rgba;
}

/** Decode a base64 PNG into an ImageBitmap (browser only). */
export async function decodeMaskPng(base64: string): Promise<ImageBitmap> {
  const bytes = Uint8Array.from(atob(base64), (c) => c.charCodeAt(0));
  const blob = new Blob([bytes], { type: "image/png" });
  return createImageBitmap(blob);
}
