/**
 * WebSocket viewer client. Owns a socket, a state machine, and the
 * camera rate limiter; everything external (socket construction, timers,
 * the clock) is injected so the client is fully testable without a
 * network or real time.
 *
 * Binary routing: an `audio` event tags the next binary message of the
 * advertised byte length as audio; every other binary message is a frame.
 * Handler errors are contained and surfaced as serverError events so a
 * bad message can never take down the page.
 */

import {
  audioBytes,
  decodeFrame,
  encodeChat,
  eventText,
  FrameMessage,
  parseServerMessage,
} from "./protocol.js";
import { makeIntrinsics, orbitMessage, OrbitState, RateLimiter } from "./orbit.js";
import {
  canSendChat,
  initialState,
  reduce,
  ViewerEvent,
  ViewerState,
} from "./state.js";

/* handler params are any so a browser WebSocket satisfies this shape */
type SocketHandler = ((...args: any[]) => void) | null;

export interface SocketLike {
  send(data: string | ArrayBuffer): void;
  close(): void;
  onopen: SocketHandler;
  onclose: SocketHandler;
  onerror: SocketHandler;
  onmessage: ((event: any) => void) | null;
}

export interface ClientHooks {
  makeSocket: (url: string) => SocketLike;
  now: () => number;
  setTimer: (fn: () => void, ms: number) => number;
  clearTimer: (id: number) => void;
  onFrame?: (frame: FrameMessage) => void;
  onAudio?: (payload: ArrayBuffer) => void;
  onState?: (state: ViewerState) => void;
}

export interface ViewerClientOptions {
  url: string;
  width: number;
  height: number;
  /** Minimum interval between camera messages; 34 ms keeps rate under 30/s. */
  cameraMinIntervalMs?: number;
  orbit?: OrbitState;
}

export class ViewerClient {
  private readonly hooks: ClientHooks;
  private readonly opts: Required<Pick<ViewerClientOptions, "url" | "width" | "height">> &
    ViewerClientOptions;
  private socket: SocketLike | null = null;
  private stateValue: ViewerState;
  private readonly limiter: RateLimiter;
  private retryTimer: number | null = null;
  private flushTimer: number | null = null;
  private pendingAudioBytes: number | null = null;
  private stopped = false;

  constructor(opts: ViewerClientOptions, hooks: ClientHooks) {
    this.opts = { cameraMinIntervalMs: 34, ...opts };
    this.hooks = hooks;
    this.stateValue = initialState(opts.orbit);
    this.limiter = new RateLimiter(this.opts.cameraMinIntervalMs ?? 34);
  }

  get state(): ViewerState {
    return this.stateValue;
  }

  connect(): void {
    if (this.stopped) return;
    if (this.stateValue.status === "live" || this.stateValue.status === "connecting") {
      return;
    }
    this.dispatch({ type: "connect" });
    this.openSocket();
  }

  stop(): void {
    this.stopped = true;
    if (this.retryTimer !== null) this.hooks.clearTimer(this.retryTimer);
    if (this.flushTimer !== null) this.hooks.clearTimer(this.flushTimer);
    this.retryTimer = null;
    this.flushTimer = null;
    const sock = this.socket;
    this.socket = null;
    if (sock) {
      sock.onclose = null;
      try {
        sock.close();
      } catch {
        // already closed
      }
    }
  }

  /** Queue a chat turn; returns false when the input is not sendable. */
  sendChat(text: string): boolean {
    if (!canSendChat(this.stateValue, text)) return false;
    if (!this.socket) return false;
    try {
      this.socket.send(encodeChat(text));
    } catch (err) {
      this.dispatch({ type: "serverError", detail: describe(err) });
      return false;
    }
    this.dispatch({ type: "chatSent", text: text.trim(), atMs: this.hooks.now() });
    return true;
  }

  /** Move the orbit camera; the wire message is rate limited to <= 30/s. */
  setOrbit(orbit: OrbitState): void {
    this.dispatch({ type: "orbitChanged", orbit });
    if (this.stateValue.status !== "live" || !this.socket) return;
    const msg = orbitMessage(
      this.stateValue.orbit,
      makeIntrinsics(this.opts.width, this.opts.height),
    );
    const due = this.limiter.submit(msg, this.hooks.now());
    if (due !== null) {
      this.sendSafely(due);
    } else {
      this.scheduleFlush();
    }
  }

  private scheduleFlush(): void {
    if (this.flushTimer !== null) return;
    const wait = this.limiter.nextDueInMs(this.hooks.now());
    if (wait === null) return;
    this.flushTimer = this.hooks.setTimer(() => {
      this.flushTimer = null;
      const msg = this.limiter.flush(this.hooks.now());
      if (msg !== null && this.socket && this.stateValue.status === "live") {
        this.sendSafely(msg);
      }
    }, Math.max(0, wait));
  }

  private sendSafely(data: string): void {
    try {
      this.socket?.send(data);
    } catch (err) {
      this.dispatch({ type: "serverError", detail: describe(err) });
    }
  }

  private openSocket(): void {
    let sock: SocketLike;
    try {
      sock = this.hooks.makeSocket(this.opts.url);
    } catch (err) {
      this.dispatch({ type: "serverError", detail: describe(err) });
      this.handleClosed();
      return;
    }
    this.socket = sock;
    sock.onopen = () => this.guarded(() => {
      this.pendingAudioBytes = null;
      this.dispatch({ type: "opened" });
    });
    sock.onclose = () => this.guarded(() => this.handleClosed());
    sock.onerror = () => this.guarded(() => {
      this.dispatch({ type: "serverError", detail: "socket error" });
    });
    sock.onmessage = (event: { data: unknown }) =>
      this.guarded(() => this.handleMessage(event.data));
  }

  private handleClosed(): void {
    this.socket = null;
    this.pendingAudioBytes = null;
    if (this.stopped) return;
    this.dispatch({ type: "closed" });
    const delay = this.stateValue.retryDelayMs;
    if (delay === null) return;
    this.retryTimer = this.hooks.setTimer(() => {
      this.retryTimer = null;
      if (this.stopped) return;
      this.dispatch({ type: "retry" });
      this.openSocket();
    }, delay);
  }

  private handleMessage(data: unknown): void {
    if (typeof data === "string") {
      this.handleEvent(data);
      return;
    }
    const buf = toArrayBuffer(data);
    if (buf === null) return;
    if (this.pendingAudioBytes !== null && buf.byteLength === this.pendingAudioBytes) {
      this.pendingAudioBytes = null;
      this.hooks.onAudio?.(buf);
      return;
    }
    const frame = decodeFrame(buf);
    this.dispatch({ type: "frame", frameIndex: frame.frameIndex, atMs: this.hooks.now() });
    this.hooks.onFrame?.(frame);
  }

  private handleEvent(text: string): void {
    const msg = parseServerMessage(text);
    switch (msg.kind) {
      case "reply":
        this.dispatch({ type: "reply", text: eventText(msg), atMs: this.hooks.now() });
        break;
      case "audio":
        this.pendingAudioBytes = audioBytes(msg);
        break;
      case "busy":
        this.dispatch({ type: "busy" });
        break;
      case "error":
        this.dispatch({ type: "serverError", detail: eventText(msg) || "server error" });
        break;
    }
  }

  private guarded(fn: () => void): void {
    try {
      fn();
    } catch (err) {
      // containment: a malformed message must not escape as an uncaught error
      try {
        this.dispatch({ type: "serverError", detail: describe(err) });
      } catch {
        // state handler itself failed; nothing else to do
      }
    }
  }

  private dispatch(event: ViewerEvent): void {
    this.stateValue = reduce(this.stateValue, event);
    this.hooks.onState?.(this.stateValue);
  }
}

function describe(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

function toArrayBuffer(data: unknown): ArrayBuffer | null {
  if (data instanceof ArrayBuffer) return data;
  if (ArrayBuffer.isView(data)) {
    const view = data as ArrayBufferView;
    return view.buffer.slice(view.byteOffset, view.byteOffset + view.byteLength) as ArrayBuffer;
  }
  return null;
}
