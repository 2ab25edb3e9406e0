/** Browser PNG decode: base64 -> single-channel Gray via an offscreen canvas.
 * Node tests inject their own decoder instead. */

import type { Gray } from "./types.js";

export async function decodePngBase64(b64: string): Promise<Gray> {
  const img = new Image();
  img.src = `data:image/png;base64,${b64}`;
  await img.decode();
  const canvas = document.createElement("canvas");
  canvas.width = img.naturalWidth;
  canvas.height = img.naturalHeight;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas unavailable");
  ctx.drawImage(img, 0, 0);
  const rgba = ctx.getImageData(0, 0, canvas.width, canvas.height).data;
  const values = new Uint8ClampedArray(canvas.width * canvas.height);
  for (let i = 0; i < values.length; i++) {
    values[i] = rgba[i * 4]; // grayscale PNGs replicate across channels
  }
  return { width: canvas.width, height: canvas.height, values };
}
