// Typed client for the control service.  Uses only fetch/ReadableStream, so
// the same code runs in the browser panel and in headless Node tests.

import type {
  ControlAck,
  ControlMessage,
  PcmChunk,
  SessionConfig,
  TelemetryRecord,
  TelemetrySnapshot,
} from "./types.js";

export class ServiceError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`service ${status}: ${detail}`);
  }
}

async function expectOk(response: Response): Promise<Response> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      detail = body.detail ?? JSON.stringify(body);
    } catch {
      // keep statusText
    }
    throw new ServiceError(response.status, detail);
  }
  return response;
}

export class ServiceClient {
  constructor(readonly baseUrl: string) {}

  private async post(path: string, payload: unknown): Promise<any> {
    const response = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    return (await expectOk(response)).json();
  }

  private async get(path: string): Promise<any> {
    return (await expectOk(await fetch(this.baseUrl + path))).json();
  }

  startSession(config: SessionConfig = {}): Promise<unknown> {
    return this.post("/session/start", config);
  }

  stopSession(): Promise<unknown> {
    return this.post("/session/stop", {});
  }

  async sessionRunning(): Promise<boolean> {
    return (await this.get("/session")).running === true;
  }

  async control(message: ControlMessage): Promise<ControlAck> {
    return (await this.post("/control", message)).ack as ControlAck;
  }

  snapshot(): Promise<TelemetrySnapshot> {
    return this.get("/telemetry/snapshot");
  }

  /** Wait until the pipeline has run at least `tick` ticks. */
  async waitForTick(tick: number, pollMs = 20): Promise<TelemetrySnapshot> {
    for (;;) {
      const snap = await this.snapshot();
      if ((snap.tick ?? 0) >= tick) return snap;
      await new Promise((r) => setTimeout(r, pollMs));
    }
  }

  /** Server-sent telemetry records, one per tick, strictly ordered. */
  async *telemetry(after = -1, limit = 0): AsyncGenerator<TelemetryRecord> {
    const url = `${this.baseUrl}/telemetry/stream?after=${after}&limit=${limit}`;
    const response = await expectOk(await fetch(url));
    const reader = response.body!.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    try {
      for (;;) {
        const { value, done } = await reader.read();
        if (done) break;
        buffer += decoder.decode(value, { stream: true });
        for (;;) {
          const split = buffer.indexOf("\n\n");
          if (split < 0) break;
          const event = buffer.slice(0, split);
          buffer = buffer.slice(split + 2);
          if (event.startsWith("data: ")) {
            yield JSON.parse(event.slice(6)) as TelemetryRecord;
          }
        }
      }
    } finally {
      reader.releaseLock();
    }
  }

  async latestPcm(windowFrames = 48, overlap = 15): Promise<PcmChunk> {
    const url = `${this.baseUrl}/pcm/latest?window_frames=${windowFrames}&overlap=${overlap}`;
    const response = await expectOk(await fetch(url));
    const header = JSON.parse(response.headers.get("X-Pcm-Header") ?? "{}");
    const bytes = await response.arrayBuffer();
    return { header, samples: new Int16Array(bytes) };
  }
}
