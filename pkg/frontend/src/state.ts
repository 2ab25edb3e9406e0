/** Request ordering and response caching.
 *
 * The tracker enforces the stale-frame invariant: a response may only be
 * rendered if it answers the most recently issued request AND is newer than
 * everything already rendered, so scrubbing the slider can never paint an
 * older frame over a newer one.
 */

export class RequestTracker {
  private counter = -1;
  private rendered = -1;

  issue(): number {
    this.counter += 1;
    return this.counter;
  }

  get latestIssued(): number {
    return this.counter;
  }

  get latestRendered(): number {
    return this.rendered;
  }

  /** True iff this response is current; marks it rendered. */
  settle(id: number): boolean {
    if (id !== this.counter || id <= this.rendered) return false;
    this.rendered = id;
    return true;
  }
}

/** Stable key for a request payload (sorted keys, JSON). */
export function requestHash(payload: Record<string, unknown>): string {
  const keys = Object.keys(payload).sort();
  return JSON.stringify(keys.map((k) => [k, payload[k]]));
}

export class ResponseCache<T> {
  private map = new Map<string, T>();

  get(key: string): T | undefined {
    return this.map.get(key);
  }

  put(key: string, value: T): void {
    this.map.set(key, value);
  }

  get size(): number {
    return this.map.size;
  }
}
