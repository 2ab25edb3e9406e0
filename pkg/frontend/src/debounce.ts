/** Debounce with cancellation of the superseded in-flight call: each execution
 * gets an AbortSignal that fires when a newer call takes over. */

export function debounceWithAbort<A extends unknown[]>(
  fn: (signal: AbortSignal, ...args: A) => unknown,
  intervalMs: number,
): (...args: A) => void {
  let timer: ReturnType<typeof setTimeout> | undefined;
  let controller: AbortController | undefined;
  return (...args: A) => {
    if (timer !== undefined) clearTimeout(timer);
    timer = setTimeout(() => {
      controller?.abort();
      controller = new AbortController();
      fn(controller.signal, ...args);
    }, intervalMs);
  };
}
