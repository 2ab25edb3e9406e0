/** Shared types for the explorer. */

/** Single-channel raster (grayscale image or 0/255 mask), row-major. */
export interface Gray {
  width: number;
  height: number;
  values: Uint8ClampedArray;
}

/** RGBA raster ready for putImageData. */
export interface Raster {
  width: number;
  height: number;
  pixels: Uint8ClampedArray;
}

export interface CaseInfo {
  case_id: string;
  split: string;
  annotator_count: number;
}

export interface CaseData {
  case_id: string;
  image_png: string;
  mask_pngs: string[];
  style_names: string[];
}

export interface Similarity {
  scores: number[];
  weights: number[];
}

export interface PredictResponse {
  mask_png: string;
  prob_map_png: string;
  similarity: Similarity;
  latency_ms: number;
  model_info: { checkpoint_id: string; latent_dim: number };
}

export interface PredictRequest {
  case_id: string;
  prompt: string;
  seed: number;
  k?: number;
  threshold?: number;
}

export interface InterpolateRequest {
  case_id: string;
  prompt_a: string;
  prompt_b: string;
  t: number;
  seed: number;
  k?: number;
  threshold?: number;
}

export interface OverlayToggles {
  prediction: boolean;
  groundTruth: boolean;
  omitted: boolean;
}

export interface ViewState {
  caseId: string | null;
  promptA: string;
  promptB: string;
  t: number; // interpolation position, clamped to [0, 1]
  seed: number;
  overlays: OverlayToggles;
}

export function initialViewState(): ViewState {
  return {
    caseId: null,
    promptA: "conservative mask",
    promptB: "inclusive mask",
    t: 0,
    seed: 0,
    overlays: { prediction: true, groundTruth: true, omitted: false },
  };
}

export function clampT(t: number): number {
  return Math.min(1, Math.max(0, t));
}

export function maskArea(mask: Gray): number {
  let area = 0;
  for (let i = 0; i < mask.values.length; i++) {
    if (mask.values[i] > 127) area++;
  }
  return area;
}
