/** Debounced latest-wins request scheduling.
 *
 * Slider drags fire many intents; only the one that survives the
 * debounce window reaches the network, and a newer intent aborts any
 * request still in flight.  At most one request per requester is ever
 * active.
 */

export type RequestFn<T> = (signal: AbortSignal) => Promise<T>;

export class DebouncedRequester<T> {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private controller: AbortController | null = null;
  private generation = 0;
  /** settled (non-aborted) requests, observable by tests */
  settledCount = 0;
  startedCount = 0;

  constructor(
    private delayMs: number,
    private onResult: (value: T) => void,
    private onError: (err: unknown) => void = () => {},
  ) {}

  /** Schedule a request intent; earlier pending intents are superseded. */
  schedule(fn: RequestFn<T>): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.fire(fn);
    }, this.delayMs);
  }

  /** Bypass the debounce window (initial load, programmatic refresh). */
  immediate(fn: RequestFn<T>): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.fire(fn);
  }

  private fire(fn: RequestFn<T>): void {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const generation = ++this.generation;
    this.startedCount += 1;
    fn(controller.signal).then(
      (value) => {
        if (generation === this.generation && !controller.signal.aborted) {
          this.settledCount += 1;
          this.onResult(value);
        }
      },
      (err) => {
        if (controller.signal.aborted) return; // stale, superseded
        if (generation === this.generation) {
          this.settledCount += 1;
          this.onError(err);
        }
      },
    );
  }

  cancel(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.controller?.abort();
  }
}
