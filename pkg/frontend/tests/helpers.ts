/** Test doubles: a deterministic mock inference server honoring the backend's
 * endpoint-parity contract, and a fake PNG "decoder" that maps base64 payloads
 * to rasters without any real codec. */

import type { FetchLike } from "../src/api.js";
import type { Gray, PredictResponse } from "../src/types.js";

export const SIZE = 8;

/** base64 of a synthetic tag; the fake decoder hashes it into pixels. */
export function maskTag(key: string): string {
  return Buffer.from(`MASK:${key}`).toString("base64");
}

/** Deterministic stand-in for PNG decoding in node tests. */
export function fakeDecoder(b64: string): Gray {
  const text = Buffer.from(b64, "base64").toString();
  const values = new Uint8ClampedArray(SIZE * SIZE);
  let h = 2166136261;
  for (let i = 0; i < text.length; i++) {
    h = Math.imul(h ^ text.charCodeAt(i), 16777619) >>> 0;
  }
  for (let i = 0; i < values.length; i++) {
    h = Math.imul(h ^ i, 16777619) >>> 0;
    values[i] = h % 2 === 0 ? 255 : 0;
  }
  return { width: SIZE, height: SIZE, values };
}

export function grayImage(fill = 128): Gray {
  return { width: SIZE, height: SIZE, values: new Uint8ClampedArray(SIZE * SIZE).fill(fill) };
}

export function squareMask(from: number, to: number): Gray {
  const values = new Uint8ClampedArray(SIZE * SIZE);
  for (let y = from; y < to; y++) {
    for (let x = from; x < to; x++) {
      values[y * SIZE + x] = 255;
    }
  }
  return { width: SIZE, height: SIZE, values };
}

export interface MockServerOptions {
  /** per-call latency in ms; return 0 for immediate resolution */
  latency?: (callIndex: number) => number;
  /** force an HTTP status for every call (e.g. 409) */
  status?: number;
}

export interface MockServer {
  fetch: FetchLike;
  calls: { url: string; body: Record<string, unknown> }[];
}

/** Implements the real service's parity contract: /interpolate at t=0/1
 * returns byte-identical payloads to /predict with the matching prompt. */
export function makeMockServer(opts: MockServerOptions = {}): MockServer {
  const calls: MockServer["calls"] = [];

  const respond = (body: Record<string, unknown>): PredictResponse => {
    let key: string;
    if ("prompt" in body) {
      key = `${body.case_id}|${body.prompt}|${body.seed}`;
    } else {
      const t = body.t as number;
      if (t === 0) key = `${body.case_id}|${body.prompt_a}|${body.seed}`;
      else if (t === 1) key = `${body.case_id}|${body.prompt_b}|${body.seed}`;
      else key = `${body.case_id}|interp:${t}|${body.seed}`;
    }
    return {
      mask_png: maskTag(key),
      prob_map_png: maskTag(`prob:${key}`),
      similarity: { scores: [1, 0, -1], weights: [0.6, 0.3, 0.1] },
      latency_ms: 1.0,
      model_info: { checkpoint_id: "test", latent_dim: 6 },
    };
  };

  const fetchFn: FetchLike = (url, init) => {
    const body = init?.body ? (JSON.parse(init.body as string) as Record<string, unknown>) : {};
    const index = calls.length;
    calls.push({ url, body });
    const status = opts.status ?? 200;
    const payload = status === 200 ? respond(body) : { detail: "nope" };
    const build = () => new Response(JSON.stringify(payload), { status });
    const delay = opts.latency?.(index) ?? 0;
    if (delay <= 0) return Promise.resolve(build());
    return new Promise((resolve) => setTimeout(() => resolve(build()), delay));
  };

  return { fetch: fetchFn, calls };
}
