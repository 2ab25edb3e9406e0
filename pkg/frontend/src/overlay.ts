/** Pure compositing of the case view: grayscale underlay, color-coded
 * ground-truth contours, majority-vote omitted region, prediction overlay.
 * Everything works on raw arrays so snapshots are deterministic and testable
 * without a DOM canvas. */

import type { Gray, OverlayToggles, Raster } from "./types.js";

export interface RGB {
  r: number;
  g: number;
  b: number;
}

/** Annotator palette, conservative to inclusive. */
export const ANNOTATOR_COLORS: RGB[] = [
  { r: 66, g: 135, b: 245 }, // blue
  { r: 240, g: 180, b: 40 }, // amber
  { r: 170, g: 90, b: 240 }, // violet
  { r: 60, g: 200, b: 160 }, // teal
];

export const PREDICTION_COLOR: RGB = { r: 80, g: 220, b: 80 };
export const OMITTED_COLOR: RGB = { r: 230, g: 60, b: 60 };

export interface CaseResources {
  image: Gray;
  groundTruth: Gray[]; // one 0/255 mask per annotator
  omitted?: Gray; // union minus majority, from the consensus baseline
}

function expectShape(a: Gray, b: Gray, what: string): void {
  if (a.width !== b.width || a.height !== b.height) {
    throw new Error(`${what} is ${b.width}x${b.height}, image is ${a.width}x${a.height}`);
  }
}

function on(mask: Gray, x: number, y: number): boolean {
  if (x < 0 || y < 0 || x >= mask.width || y >= mask.height) return false;
  return mask.values[y * mask.width + x] > 127;
}

/** Boundary pixels: on-pixels with at least one off 4-neighbor. */
export function contour(mask: Gray): Uint8Array {
  const out = new Uint8Array(mask.width * mask.height);
  for (let y = 0; y < mask.height; y++) {
    for (let x = 0; x < mask.width; x++) {
      if (!on(mask, x, y)) continue;
      if (!on(mask, x - 1, y) || !on(mask, x + 1, y) || !on(mask, x, y - 1) || !on(mask, x, y + 1)) {
        out[y * mask.width + x] = 1;
      }
    }
  }
  return out;
}

function paint(raster: Raster, idx: number, color: RGB, alpha: number): void {
  const o = idx * 4;
  raster.pixels[o] = Math.round(raster.pixels[o] * (1 - alpha) + color.r * alpha);
  raster.pixels[o + 1] = Math.round(raster.pixels[o + 1] * (1 - alpha) + color.g * alpha);
  raster.pixels[o + 2] = Math.round(raster.pixels[o + 2] * (1 - alpha) + color.b * alpha);
  raster.pixels[o + 3] = 255;
}

export interface LegendEntry {
  label: string;
  color: RGB;
}

export interface CaseView {
  raster: Raster;
  legend: LegendEntry[];
}

/** Deterministic composite of underlay + toggled overlay layers. */
export function renderCaseView(
  resources: CaseResources,
  prediction: Gray | null,
  toggles: OverlayToggles,
): CaseView {
  const { image } = resources;
  const n = image.width * image.height;
  const raster: Raster = {
    width: image.width,
    height: image.height,
    pixels: new Uint8ClampedArray(n * 4),
  };
  for (let i = 0; i < n; i++) {
    const v = image.values[i];
    raster.pixels[i * 4] = v;
    raster.pixels[i * 4 + 1] = v;
    raster.pixels[i * 4 + 2] = v;
    raster.pixels[i * 4 + 3] = 255;
  }

  const legend: LegendEntry[] = [];
  if (toggles.omitted && resources.omitted) {
    expectShape(image, resources.omitted, "omitted mask");
    for (let i = 0; i < n; i++) {
      if (resources.omitted.values[i] > 127) paint(raster, i, OMITTED_COLOR, 0.35);
    }
    legend.push({ label: "omitted by consensus", color: OMITTED_COLOR });
  }
  if (toggles.groundTruth) {
    resources.groundTruth.forEach((mask, a) => {
      expectShape(image, mask, `annotator ${a + 1} mask`);
      const color = ANNOTATOR_COLORS[a % ANNOTATOR_COLORS.length];
      const edge = contour(mask);
      for (let i = 0; i < n; i++) {
        if (edge[i]) paint(raster, i, color, 1.0);
      }
      legend.push({ label: `annotator ${a + 1}`, color });
    });
  }
  if (toggles.prediction && prediction) {
    expectShape(image, prediction, "prediction mask");
    for (let i = 0; i < n; i++) {
      if (prediction.values[i] > 127) paint(raster, i, PREDICTION_COLOR, 0.25);
    }
    const edge = contour(prediction);
    for (let i = 0; i < n; i++) {
      if (edge[i]) paint(raster, i, PREDICTION_COLOR, 1.0);
    }
    legend.push({ label: "prediction", color: PREDICTION_COLOR });
  }
  return { raster, legend };
}
