/** Pure-rendering contracts: deterministic composites, per-layer toggles,
 * chart geometry, debounce coalescing, consensus-omitted computation. */

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { similarityBars } from "../src/chart.js";
import { debounceWithAbort } from "../src/debounce.js";
import { majorityOmitted } from "../src/majority.js";
import { contour, renderCaseView } from "../src/overlay.js";
import { clampT, maskArea } from "../src/types.js";
import { fakeDecoder, grayImage, maskTag, squareMask, SIZE } from "./helpers.js";

const TOGGLES = { prediction: true, groundTruth: true, omitted: false };

describe("overlay rendering", () => {
  const resources = { image: grayImage(100), groundTruth: [squareMask(2, 5), squareMask(1, 7)] };

  it("is a pure function of its inputs", () => {
    const a = renderCaseView(resources, squareMask(3, 6), TOGGLES);
    const b = renderCaseView(resources, squareMask(3, 6), TOGGLES);
    expect(Array.from(a.raster.pixels)).toEqual(Array.from(b.raster.pixels));
  });

  it("without a prediction shows image and ground truth only", () => {
    const view = renderCaseView(resources, null, TOGGLES);
    expect(view.legend.map((e) => e.label)).toEqual(["annotator 1", "annotator 2"]);
    expect(view.raster.width).toBe(SIZE);
  });

  it("toggling a layer changes only that layer", () => {
    const withGt = renderCaseView(resources, null, { ...TOGGLES, prediction: false });
    const without = renderCaseView(resources, null,
      { prediction: false, groundTruth: false, omitted: false });
    expect(Array.from(withGt.raster.pixels)).not.toEqual(Array.from(without.raster.pixels));
    // pixels away from any mask boundary are untouched by the toggle
    const cornerIdx = 0;
    expect(withGt.raster.pixels[cornerIdx * 4]).toBe(without.raster.pixels[cornerIdx * 4]);
    expect(without.legend).toHaveLength(0);
  });

  it("prediction overlay dims match the decoded mask dims", () => {
    const mask = fakeDecoder(maskTag("anything"));
    const view = renderCaseView(resources, mask, TOGGLES);
    expect(view.raster.width).toBe(mask.width);
    expect(view.raster.height).toBe(mask.height);
  });

  it("contour marks exactly the boundary of a filled square", () => {
    const edge = contour(squareMask(2, 6));
    let count = 0;
    for (const v of edge) count += v;
    expect(count).toBe(12); // 4x4 square: 16 on-pixels, 4 interior
  });

  it("rejects shape-mismatched layers", () => {
    const tiny = { width: 2, height: 2, values: new Uint8ClampedArray(4) };
    expect(() => renderCaseView({ image: grayImage(), groundTruth: [tiny] }, null, TOGGLES)).toThrow();
  });
});

describe("similarity chart", () => {
  it("produces one bar per weight with heights proportional to weight", () => {
    const bars = similarityBars([0.5, 0.25, 0.25], 100, 50);
    expect(bars).toHaveLength(3);
    expect(bars[0].height).toBeCloseTo(48);
    expect(bars[1].height).toBeCloseTo(24);
    expect(bars[0].x).toBeLessThan(bars[1].x);
  });

  it("handles empty and zero weights", () => {
    expect(similarityBars([], 100, 50)).toEqual([]);
    const bars = similarityBars([0, 0], 100, 50);
    expect(bars.every((b) => b.height === 0)).toBe(true);
  });
});

describe("majority omitted", () => {
  it("computes union minus strict majority", () => {
    const small = squareMask(3, 5);
    const big = squareMask(1, 7);
    const omitted = majorityOmitted([small, small, big, big])!; // 2/4 votes is not a majority
    expect(maskArea(omitted)).toBe(maskArea(big) - maskArea(small));
  });

  it("unanimous agreement omits nothing", () => {
    const m = squareMask(2, 6);
    expect(maskArea(majorityOmitted([m, m, m])!)).toBe(0);
  });
});

describe("view-state helpers", () => {
  it("clamps t into [0, 1]", () => {
    expect(clampT(-0.5)).toBe(0);
    expect(clampT(0.5)).toBe(0.5);
    expect(clampT(7)).toBe(1);
  });
});

describe("debounce", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("coalesces rapid calls into one, at least 250 ms later", () => {
    const calls: string[] = [];
    const fire = debounceWithAbort((_s, v: string) => calls.push(v), 250);
    fire("a");
    vi.advanceTimersByTime(100);
    fire("b");
    vi.advanceTimersByTime(100);
    fire("c");
    vi.advanceTimersByTime(249);
    expect(calls).toEqual([]);
    vi.advanceTimersByTime(1);
    expect(calls).toEqual(["c"]);
  });

  it("aborts the superseded in-flight execution", () => {
    const seen: AbortSignal[] = [];
    const fire = debounceWithAbort((signal) => seen.push(signal), 250);
    fire();
    vi.advanceTimersByTime(250);
    fire();
    vi.advanceTimersByTime(250);
    expect(seen).toHaveLength(2);
    expect(seen[0].aborted).toBe(true);
    expect(seen[1].aborted).toBe(false);
  });
});
