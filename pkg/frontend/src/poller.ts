/** Analytics polling with exponential backoff on failure and staleness
 * tracking, so the UI can show how old the displayed numbers are. */

export interface PollerOptions<T> {
  fetchValue: () => Promise<T>;
  onValue: (value: T) => void;
  onError?: (error: unknown) => void;
  /** Base polling interval in ms. */
  intervalMs?: number;
  /** Upper bound for the backoff interval in ms. */
  maxIntervalMs?: number;
  /** Injectable clock/scheduler for tests. */
  now?: () => number;
  schedule?: (fn: () => void, ms: number) => unknown;
  cancel?: (handle: unknown) => void;
}

export class Poller<T> {
  private readonly intervalMs: number;
  private readonly maxIntervalMs: number;
  private readonly now: () => number;
  private readonly schedule: (fn: () => void, ms: number) => unknown;
  private readonly cancelFn: (handle: unknown) => void;

  private handle: unknown;
  private running = false;
  private failures = 0;
  private lastSuccessAt?: number;

  constructor(private readonly options: PollerOptions<T>) {
    this.intervalMs = options.intervalMs ?? 3000;
    this.maxIntervalMs = options.maxIntervalMs ?? 60_000;
    this.now = options.now ?? (() => Date.now());
    this.schedule = options.schedule ?? ((fn, ms) => setTimeout(fn, ms));
    this.cancelFn = options.cancel ?? ((h) => clearTimeout(h as number));
  }

  /** Interval before the next poll: base * 2^failures, capped. */
  currentIntervalMs(): number {
    return Math.min(this.intervalMs * 2 ** this.failures, this.maxIntervalMs);
  }

  consecutiveFailures(): number {
    return this.failures;
  }

  /** Milliseconds since the last successful poll; undefined before any. */
  staleness(): number | undefined {
    return this.lastSuccessAt === undefined ? undefined : this.now() - this.lastSuccessAt;
  }

  /** True once the data on screen is older than two healthy intervals. */
  isStale(): boolean {
    const age = this.staleness();
    return age !== undefined && age > 2 * this.intervalMs;
  }

  isRunning(): boolean {
    return this.running;
  }

  start(): void {
    if (this.running) return;
    this.running = true;
    void this.tick();
  }

  stop(): void {
    this.running = false;
    if (this.handle !== undefined) {
      this.cancelFn(this.handle);
      this.handle = undefined;
    }
  }

  /** One poll cycle; also usable directly from tests. */
  async tick(): Promise<void> {
    try {
      const value = await this.options.fetchValue();
      this.failures = 0;
      this.lastSuccessAt = this.now();
      this.options.onValue(value);
    } catch (err) {
      this.failures += 1;
      this.options.onError?.(err);
    }
    if (this.running) {
      this.handle = this.schedule(() => void this.tick(), this.currentIntervalMs());
    }
  }
}
