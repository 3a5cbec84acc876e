/**
 * WebSocket wrapper with automatic reconnect. On every (re)connect the
 * gateway replays the whole feed, so the app resets its view model in
 * onOpen and simply folds records again.
 */

import { parseFeedRecord, type ConsoleCommand, type FeedRecord } from "./feed.js";

export interface ConsoleSocketHandlers {
  onOpen: () => void;
  onRecord: (record: FeedRecord) => void;
  onClose: () => void;
}

const RECONNECT_MIN_MS = 500;
const RECONNECT_MAX_MS = 8000;

export class ConsoleSocket {
  private ws: WebSocket | null = null;
  private backoffMs = RECONNECT_MIN_MS;
  private closed = false;

  constructor(
    private readonly url: string,
    private readonly handlers: ConsoleSocketHandlers,
  ) {}

  connect(): void {
    if (this.closed) return;
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.backoffMs = RECONNECT_MIN_MS;
      this.handlers.onOpen();
    };
    ws.onmessage = (event) => {
      if (typeof event.data !== "string") return;
      const record = parseFeedRecord(event.data);
      if (record) this.handlers.onRecord(record);
    };
    ws.onclose = () => {
      this.ws = null;
      this.handlers.onClose();
      if (!this.closed) {
        setTimeout(() => this.connect(), this.backoffMs);
        this.backoffMs = Math.min(this.backoffMs * 2, RECONNECT_MAX_MS);
      }
    };
    ws.onerror = () => ws.close();
  }

  send(command: ConsoleCommand): boolean {
    if (!this.ws || this.ws.readyState !== WebSocket.OPEN) return false;
    this.ws.send(JSON.stringify(command));
    return true;
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
