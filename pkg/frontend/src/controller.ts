/** Orchestrates prompt submission and slider interpolation: issues requests,
 * caches responses by request hash, discards superseded responses, and hands
 * composited frames to the view. */

import { ApiClient, ApiError } from "./api.js";
import { renderCaseView, type CaseResources, type CaseView } from "./overlay.js";
import { RequestTracker, ResponseCache, requestHash } from "./state.js";
import {
  clampT,
  maskArea,
  type Gray,
  type PredictResponse,
  type ViewState,
  initialViewState,
} from "./types.js";

export type PngDecoder = (pngB64: string) => Promise<Gray> | Gray;

export interface RenderedFrame {
  requestId: number;
  view: CaseView;
  response: PredictResponse;
  area: number;
  kind: "predict" | "interpolate";
  t?: number;
}

export interface ControllerDeps {
  api: ApiClient;
  decode: PngDecoder;
  onFrame: (frame: RenderedFrame) => void;
  onStatus?: (message: string) => void;
}

export class ExplorerController {
  state: ViewState = initialViewState();
  readonly tracker = new RequestTracker();
  readonly cache = new ResponseCache<PredictResponse>();
  resources: CaseResources | null = null;
  fromCacheCount = 0;

  constructor(private readonly deps: ControllerDeps) {}

  setResources(resources: CaseResources, caseId: string): void {
    this.resources = resources;
    this.state.caseId = caseId;
  }

  /** Render the pre-prediction view (image + ground truth only). */
  renderBase(): CaseView | null {
    if (!this.resources) return null;
    const view = renderCaseView(this.resources, null, this.state.overlays);
    return view;
  }

  private async resolve(
    key: string,
    fetcher: () => Promise<PredictResponse>,
  ): Promise<PredictResponse> {
    const hit = this.cache.get(key);
    if (hit) {
      this.fromCacheCount += 1;
      return hit;
    }
    const resp = await fetcher();
    this.cache.put(key, resp);
    return resp;
  }

  private async settleAndRender(
    id: number,
    resp: PredictResponse,
    kind: "predict" | "interpolate",
    t?: number,
  ): Promise<RenderedFrame | null> {
    if (!this.resources) return null;
    const mask = await this.deps.decode(resp.mask_png);
    // the counter check runs after every await so a newer settled response
    // can never be painted over by this one
    if (!this.tracker.settle(id)) return null;
    const view = renderCaseView(
      this.resources,
      this.state.overlays.prediction ? mask : null,
      this.state.overlays,
    );
    const frame: RenderedFrame = { requestId: id, view, response: resp, area: maskArea(mask), kind, t };
    this.deps.onFrame(frame);
    return frame;
  }

  /** Personalize with one prompt; validates locally before any request. */
  async submitPrompt(which: "a" | "b"): Promise<RenderedFrame | null> {
    const prompt = which === "a" ? this.state.promptA : this.state.promptB;
    if (!prompt.trim()) {
      this.deps.onStatus?.("prompt is empty");
      return null;
    }
    if (!this.state.caseId) {
      this.deps.onStatus?.("select a case first");
      return null;
    }
    const payload = { case_id: this.state.caseId, prompt, seed: this.state.seed };
    const id = this.tracker.issue();
    try {
      const resp = await this.resolve(requestHash(payload), () => this.deps.api.predict(payload));
      return await this.settleAndRender(id, resp, "predict");
    } catch (err) {
      this.reportError(err);
      return null;
    }
  }

  /** Slider move: interpolate with the shared seed; superseded requests are
   * discarded when their responses arrive. */
  async slideInterpolation(t: number): Promise<RenderedFrame | null> {
    this.state.t = clampT(t);
    if (!this.state.caseId) return null;
    const payload = {
      case_id: this.state.caseId,
      prompt_a: this.state.promptA,
      prompt_b: this.state.promptB,
      t: this.state.t,
      seed: this.state.seed,
    };
    const id = this.tracker.issue();
    try {
      const resp = await this.resolve(requestHash(payload), () => this.deps.api.interpolate(payload));
      return await this.settleAndRender(id, resp, "interpolate", this.state.t);
    } catch (err) {
      this.reportError(err);
      return null;
    }
  }

  private reportError(err: unknown): void {
    if (err instanceof ApiError && err.status === 409) {
      this.deps.onStatus?.("model loading");
    } else if (err instanceof ApiError) {
      this.deps.onStatus?.(`server error ${err.status}`);
    } else {
      this.deps.onStatus?.(`request failed: ${String(err)}`);
    }
  }
}
