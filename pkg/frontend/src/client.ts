// WebSocket wiring between one panel and its local voter node.
// Injected socket factory keeps this usable from both the browser
// (native WebSocket) and node-driven tests (the `ws` package).

import { parseEvent, type NodeCommand, type NodeEvent } from "./events.js";
import {
  applyEvent,
  canAllege,
  canCast,
  initialSession,
  type UiSession,
} from "./session.js";

// Structural common ground between the browser WebSocket and `ws`; the
// `any` handler parameters absorb the variance mismatch between the two.
/* eslint-disable @typescript-eslint/no-explicit-any */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: any) => void) | null;
  onmessage: ((ev: any) => void) | null;
  onclose: ((ev?: any) => void) | null;
  onerror: ((ev?: any) => void) | null;
}
/* eslint-enable @typescript-eslint/no-explicit-any */

export type SocketFactory = (url: string) => SocketLike;

export class PanelClient {
  state: UiSession = initialSession();
  private socket: SocketLike | null = null;
  private listeners: Array<(state: UiSession, event: NodeEvent | null) => void> = [];

  constructor(private readonly url: string,
              private readonly connect: SocketFactory) {}

  open(): Promise<void> {
    return new Promise((resolve, reject) => {
      const socket = this.connect(this.url);
      this.socket = socket;
      socket.onopen = () => resolve();
      socket.onerror = (err) => reject(err);
      socket.onmessage = (ev) => this.receive(String(ev.data));
      socket.onclose = () => {
        this.emit(null);
      };
    });
  }

  close(): void {
    this.socket?.close();
  }

  onChange(listener: (state: UiSession, event: NodeEvent | null) => void): void {
    this.listeners.push(listener);
  }

  private receive(raw: string): void {
    const event = parseEvent(raw);
    this.state = applyEvent(this.state, event);
    this.emit(event);
  }

  private emit(event: NodeEvent | null): void {
    for (const listener of this.listeners) listener(this.state, event);
  }

  private send(command: NodeCommand): void {
    if (!this.socket) throw new Error("panel is not connected");
    this.socket.send(JSON.stringify(command));
  }

  // Idempotent by construction: refused locally unless the session allows it.
  castVote(candidate: string): boolean {
    if (!canCast(this.state)) return false;
    this.state = { ...this.state, castState: "pending" };
    this.send({ cmd: "cast", candidate });
    return true;
  }

  fileAllegation(text: string): boolean {
    if (!canAllege(this.state)) return false;
    this.send({ cmd: "allege", text });
    return true;
  }

  // Resolves when a predicate over the session becomes true.
  waitFor(predicate: (state: UiSession) => boolean, timeoutMs = 30_000): Promise<UiSession> {
    if (predicate(this.state)) return Promise.resolve(this.state);
    return new Promise((resolve, reject) => {
      const timer = setTimeout(
        () => reject(new Error(`timed out waiting (phase=${this.state.phase})`)),
        timeoutMs,
      );
      this.onChange((state) => {
        if (predicate(state)) {
          clearTimeout(timer);
          resolve(state);
        }
      });
    });
  }
}
