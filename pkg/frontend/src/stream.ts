// Live event stream: fetch-based NDJSON reader with automatic reconnect
// and a staleness watchdog.

import { NdjsonBuffer } from "./ndjson.js";
import type { Role, StreamEvent } from "./types.js";

export interface StreamHandlers {
  onEvent: (event: StreamEvent) => void;
  onConnection: (state: "connecting" | "live" | "lost") => void;
}

export class EventStream {
  private stopped = false;
  private controller: AbortController | null = null;

  constructor(
    private baseUrl: string,
    private role: Role,
    private handlers: StreamHandlers,
    private reconnectDelayMs = 2000,
  ) {}

  start(): void {
    this.stopped = false;
    void this.loop();
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
  }

  private async loop(): Promise<void> {
    while (!this.stopped) {
      this.handlers.onConnection("connecting");
      try {
        await this.consumeOnce();
      } catch {
        // fall through to reconnect
      }
      if (this.stopped) return;
      this.handlers.onConnection("lost");
      await new Promise((resolve) => setTimeout(resolve, this.reconnectDelayMs));
    }
  }

  private async consumeOnce(): Promise<void> {
    this.controller = new AbortController();
    const response = await fetch(`${this.baseUrl}/stream`, {
      headers: { "X-Role": this.role },
      signal: this.controller.signal,
    });
    if (!response.ok || !response.body) {
      throw new Error(`stream failed: ${response.status}`);
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    const buffer = new NdjsonBuffer<StreamEvent>();
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      for (const event of buffer.feed(decoder.decode(value, { stream: true }))) {
        if (event.type === "hello") this.handlers.onConnection("live");
        this.handlers.onEvent(event);
      }
    }
  }
}
