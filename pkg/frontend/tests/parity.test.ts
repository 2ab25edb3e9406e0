/** Secondary acceptance: slider endpoints render pixel-identical to the two
 * prompt predictions (mock-server integration). */

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ExplorerController, type RenderedFrame } from "../src/controller.js";
import { fakeDecoder, grayImage, makeMockServer, squareMask } from "./helpers.js";

function makeController(server = makeMockServer()) {
  const frames: RenderedFrame[] = [];
  const statuses: string[] = [];
  const controller = new ExplorerController({
    api: new ApiClient("http://mock", server.fetch),
    decode: fakeDecoder,
    onFrame: (f) => frames.push(f),
    onStatus: (s) => statuses.push(s),
  });
  controller.setResources(
    { image: grayImage(), groundTruth: [squareMask(2, 5), squareMask(1, 7)] },
    "case_0000",
  );
  return { controller, frames, statuses, server };
}

describe("slider endpoint parity", () => {
  it("t=0 renders pixel-identical to the prompt-A prediction", async () => {
    const { controller, frames } = makeController();
    const viaPrompt = await controller.submitPrompt("a");
    const viaSlider = await controller.slideInterpolation(0);
    expect(viaPrompt).not.toBeNull();
    expect(viaSlider).not.toBeNull();
    expect(viaSlider!.response.mask_png).toBe(viaPrompt!.response.mask_png);
    expect(Array.from(viaSlider!.view.raster.pixels)).toEqual(
      Array.from(viaPrompt!.view.raster.pixels),
    );
    expect(frames).toHaveLength(2);
  });

  it("t=1 renders pixel-identical to the prompt-B prediction", async () => {
    const { controller } = makeController();
    const viaPrompt = await controller.submitPrompt("b");
    const viaSlider = await controller.slideInterpolation(1);
    expect(viaSlider!.response.mask_png).toBe(viaPrompt!.response.mask_png);
    expect(Array.from(viaSlider!.view.raster.pixels)).toEqual(
      Array.from(viaPrompt!.view.raster.pixels),
    );
  });

  it("midpoint differs from both endpoints", async () => {
    const { controller } = makeController();
    const a = await controller.submitPrompt("a");
    const mid = await controller.slideInterpolation(0.5);
    expect(mid!.response.mask_png).not.toBe(a!.response.mask_png);
  });

  it("area readout tracks each settled response", async () => {
    const { controller, frames } = makeController();
    await controller.slideInterpolation(0.25);
    await controller.slideInterpolation(0.75);
    expect(frames.map((f) => f.t)).toEqual([0.25, 0.75]);
    for (const frame of frames) {
      expect(frame.area).toBeGreaterThanOrEqual(0);
      expect(frame.area).toBeLessThanOrEqual(64);
    }
  });
});

describe("request validation and caching", () => {
  it("empty prompt produces inline validation and no request", async () => {
    const { controller, statuses, server } = makeController();
    controller.state.promptA = "   ";
    const frame = await controller.submitPrompt("a");
    expect(frame).toBeNull();
    expect(server.calls).toHaveLength(0);
    expect(statuses).toContain("prompt is empty");
  });

  it("duplicate request hash is served from cache", async () => {
    const { controller, server } = makeController();
    await controller.submitPrompt("a");
    await controller.submitPrompt("a");
    expect(server.calls).toHaveLength(1);
    expect(controller.fromCacheCount).toBe(1);
  });

  it("409 surfaces the model-loading banner", async () => {
    const server = makeMockServer({ status: 409 });
    const { controller, statuses } = makeController(server);
    const frame = await controller.submitPrompt("a");
    expect(frame).toBeNull();
    expect(statuses).toContain("model loading");
  });
});
