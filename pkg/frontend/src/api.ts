/**
 * Service client plus the request discipline the studio relies on:
 * debounced firing, at most one in-flight request per lane, and a monotone
 * sequence number so stale responses are never rendered. The fetch and
 * timer functions are injectable for tests.
 */

export interface RetrievalHit {
  id: string;
  label: string;
  similarity: number;
}

export interface HealthInfo {
  model: boolean;
  index: boolean;
  input_size: number | null;
  items: number;
}

type FetchFn = (url: string, init?: RequestInit) => Promise<Response>;

export interface ClientOptions {
  baseUrl: string;
  fetchFn?: FetchFn;
}

export class StudioClient {
  readonly baseUrl: string;
  private readonly fetchFn: FetchFn;

  constructor(options: ClientOptions) {
    this.baseUrl = options.baseUrl.replace(/\/$/, "");
    this.fetchFn = options.fetchFn ?? ((url, init) => fetch(url, init));
  }

  async health(): Promise<HealthInfo> {
    const resp = await this.fetchFn(`${this.baseUrl}/health`);
    if (!resp.ok) throw new Error(`health check failed: ${resp.status}`);
    return (await resp.json()) as HealthInfo;
  }

  /** POST a PNG payload to /clean; resolves to the cleaned PNG bytes. */
  async clean(png: Uint8Array): Promise<Uint8Array> {
    const resp = await this.fetchFn(`${this.baseUrl}/clean`, {
      method: "POST",
      headers: { "Content-Type": "image/png" },
      body: png as unknown as BodyInit,
    });
    if (!resp.ok) throw new Error(`clean failed: ${resp.status}`);
    return new Uint8Array(await resp.arrayBuffer());
  }

  /** POST image + k to /retrieve as multipart; hits come back descending. */
  async retrieve(png: Uint8Array, k: number): Promise<RetrievalHit[]> {
    const { body, contentType } = buildMultipart(png, k);
    const resp = await this.fetchFn(`${this.baseUrl}/retrieve`, {
      method: "POST",
      headers: { "Content-Type": contentType },
      body: body as unknown as BodyInit,
    });
    if (!resp.ok) throw new Error(`retrieve failed: ${resp.status}`);
    return (await resp.json()) as RetrievalHit[];
  }

  thumbnailUrl(id: string): string {
    return `${this.baseUrl}/items/${encodeURIComponent(id)}/thumbnail`;
  }
}

export function buildMultipart(png: Uint8Array, k: number): { body: Uint8Array; contentType: string } {
  const boundary = "studio-" + Math.random().toString(36).slice(2);
  const enc = new TextEncoder();
  const head = enc.encode(
    `--${boundary}\r\n` +
      `Content-Disposition: form-data; name="image"; filename="sketch.png"\r\n` +
      `Content-Type: image/png\r\n\r\n`,
  );
  const mid = enc.encode(`\r\n--${boundary}\r\nContent-Disposition: form-data; name="k"\r\n\r\n${k}\r\n`);
  const tail = enc.encode(`--${boundary}--\r\n`);
  const body = new Uint8Array(head.length + png.length + mid.length + tail.length);
  body.set(head, 0);
  body.set(png, head.length);
  body.set(mid, head.length + png.length);
  body.set(tail, head.length + png.length + mid.length);
  return { body, contentType: `multipart/form-data; boundary=${boundary}` };
}

type TimerFns = {
  set: (fn: () => void, ms: number) => unknown;
  clear: (handle: unknown) => void;
};

/**
 * One request lane: responses older than the newest applied sequence number
 * are discarded, so out-of-order arrivals can never overwrite fresh state.
 */
export class SequenceGate<P, T> {
  private seq = 0;
  private applied = 0;

  constructor(
    private readonly send: (payload: P) => Promise<T>,
    private readonly apply: (result: T) => void,
    private readonly onError: (error: unknown) => void = () => undefined,
  ) {}

  /** Fire a request now. Resolves true if its response was rendered. */
  async fire(payload: P): Promise<boolean> {
    const mySeq = ++this.seq;
    try {
      const result = await this.send(payload);
      if (mySeq <= this.applied) return false; // stale: a newer response landed first
      this.applied = mySeq;
      this.apply(result);
      return true;
    } catch (error) {
      this.onError(error);
      return false;
    }
  }
}

/**
 * Debounced single-lane requester for the live preview: fires once the
 * sketch has been quiet for `debounceMs`, keeps at most one request in
 * flight, and re-fires with the latest payload if edits arrived meanwhile.
 */
export class DebouncedPreview<P, T> {
  private timer: unknown = null;
  private inFlight = false;
  private dirty = false;
  readonly gate: SequenceGate<P, T>;

  constructor(
    send: (payload: P) => Promise<T>,
    apply: (result: T) => void,
    private readonly payloadOf: () => P,
    onError: (error: unknown) => void = () => undefined,
    private readonly debounceMs = 300,
    private readonly timers: TimerFns = {
      set: (fn, ms) => setTimeout(fn, ms),
      clear: (h) => clearTimeout(h as Parameters<typeof clearTimeout>[0]),
    },
  ) {
    this.gate = new SequenceGate(send, apply, onError);
  }

  /** Call on every sketch edit; the request fires after the quiet period. */
  poke(): void {
    if (this.timer !== null) this.timers.clear(this.timer);
    this.timer = this.timers.set(() => {
      this.timer = null;
      void this.launch();
    }, this.debounceMs);
  }

  private async launch(): Promise<void> {
    if (this.inFlight) {
      this.dirty = true;
      return;
    }
    this.inFlight = true;
    try {
      await this.gate.fire(this.payloadOf());
    } finally {
      this.inFlight = false;
      if (this.dirty) {
        this.dirty = false;
        void this.launch();
      }
    }
  }
}
