/** Latest-wins request gating plus a simple rate limiter.
 *
 * Each control keeps at most one request in flight: starting a new one
 * aborts the previous, and a stale response (superseded while awaited) is
 * dropped rather than delivered. The rate limiter spaces issue times so a
 * dragged slider cannot exceed the configured requests/second.
 */

export class LatestWins<T> {
  private seq = 0;
  private controller: AbortController | null = null;

  /** Run fn as the newest request; resolves null if superseded or aborted. */
  async run(fn: (signal: AbortSignal) => Promise<T>): Promise<T | null> {
    const my = ++this.seq;
    this.controller?.abort();
    this.controller = new AbortController();
    try {
      const result = await fn(this.controller.signal);
      return my === this.seq ? result : null;
    } catch (err) {
      if (my !== this.seq) return null; // superseded: swallow the abort
      throw err;
    }
  }

  get inFlightGeneration(): number {
    return this.seq;
  }
}

export class RateLimiter {
  private lastIssue = -Infinity;
  private readonly minSpacingMs: number;

  constructor(maxPerSecond: number,
              private readonly now: () => number = () => Date.now()) {
    if (maxPerSecond <= 0) throw new Error("rate must be positive");
    this.minSpacingMs = 1000 / maxPerSecond;
  }

  /** True when a request may be issued now (and reserves the slot). */
  tryAcquire(): boolean {
    const t = this.now();
    if (t - this.lastIssue < this.minSpacingMs) return false;
    this.lastIssue = t;
    return true;
  }
}
