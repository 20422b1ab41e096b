import type { StreamEventDoc } from "./types.js";

// Minimal shape we need from EventSource so tests can inject a fake.
export interface EventSourceLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  readyState: number;
  close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

export type StreamStatus = "connecting" | "live" | "stale";

export interface StreamHandlers {
  onEvent(doc: StreamEventDoc): void;
  onStatus(status: StreamStatus): void;
}

export interface StreamOptions {
  // no event for this long -> stale banner (ticks arrive every ~1 s)
  staleAfterMs?: number;
  // a CLOSED source is replaced after this long (CONNECTING ones retry alone)
  reopenAfterMs?: number;
}

const CLOSED = 2;

export class PredictionStream {
  private readonly staleAfterMs: number;
  private readonly reopenAfterMs: number;
  private es: EventSourceLike | null = null;
  private staleTimer: ReturnType<typeof setTimeout> | null = null;
  private reopenTimer: ReturnType<typeof setTimeout> | null = null;
  private status: StreamStatus | null = null;
  private stopped = false;

  constructor(
    private readonly url: string,
    private readonly factory: EventSourceFactory,
    private readonly handlers: StreamHandlers,
    opts: StreamOptions = {},
  ) {
    this.staleAfterMs = opts.staleAfterMs ?? 5000;
    this.reopenAfterMs = opts.reopenAfterMs ?? 2000;
  }

  start(): void {
    this.stopped = false;
    this.open();
  }

  stop(): void {
    this.stopped = true;
    this.clearTimers();
    this.es?.close();
    this.es = null;
  }

  private open(): void {
    this.setStatus("connecting");
    const es = this.factory(this.url);
    this.es = es;
    es.onopen = () => this.armStaleTimer();
    es.onmessage = (ev) => this.handleMessage(ev.data);
    es.onerror = () => this.handleError(es);
  }

  private handleMessage(data: unknown): void {
    if (this.stopped) return;
    let doc: StreamEventDoc;
    try {
      doc = JSON.parse(String(data)) as StreamEventDoc;
    } catch {
      return; // not ours; keepalives never reach onmessage anyway
    }
    if (!doc || typeof doc.device_id !== "string") return;
    this.setStatus("live");
    this.armStaleTimer();
    this.handlers.onEvent(doc);
  }

  private handleError(es: EventSourceLike): void {
    if (this.stopped || es !== this.es) return;
    this.setStatus("stale");
    if (es.readyState === CLOSED && this.reopenTimer === null) {
      this.reopenTimer = setTimeout(() => {
        this.reopenTimer = null;
        if (!this.stopped) this.open();
      }, this.reopenAfterMs);
    }
  }

  private armStaleTimer(): void {
    if (this.staleTimer !== null) clearTimeout(this.staleTimer);
    this.staleTimer = setTimeout(() => {
      this.staleTimer = null;
      if (!this.stopped) this.setStatus("stale");
    }, this.staleAfterMs);
  }

  private clearTimers(): void {
    if (this.staleTimer !== null) clearTimeout(this.staleTimer);
    if (this.reopenTimer !== null) clearTimeout(this.reopenTimer);
    this.staleTimer = null;
    this.reopenTimer = null;
  }

  private setStatus(status: StreamStatus): void {
    if (this.status === status) return;
    this.status = status;
    this.handlers.onStatus(status);
  }
}
