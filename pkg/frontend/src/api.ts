/** Thin typed client for the inference service. The fetch implementation is
 * injectable so tests can mock the server. */

import type {
  CaseData,
  CaseInfo,
  InterpolateRequest,
  PredictRequest,
  PredictResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    readonly origin: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(`${this.origin}${path}`);
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return (await resp.json()) as T;
  }

  private async post<T>(path: string, body: unknown, signal?: AbortSignal): Promise<T> {
    const resp = await this.fetchFn(`${this.origin}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return (await resp.json()) as T;
  }

  health(): Promise<{ status: string; checkpoint_id: string | null }> {
    return this.get("/health");
  }

  cases(): Promise<CaseInfo[]> {
    return this.get("/cases");
  }

  caseData(caseId: string): Promise<CaseData> {
    return this.get(`/case/${encodeURIComponent(caseId)}`);
  }

  prompts(): Promise<Record<string, string[]>> {
    return this.get("/prompts");
  }

  predict(req: PredictRequest, signal?: AbortSignal): Promise<PredictResponse> {
    return this.post("/predict", req, signal);
  }

  interpolate(req: InterpolateRequest, signal?: AbortSignal): Promise<PredictResponse> {
    return this.post("/interpolate", req, signal);
  }
}
