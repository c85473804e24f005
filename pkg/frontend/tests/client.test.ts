import { describe, expect, it } from "vitest";

import { ViewerClient } from "../src/client.js";
import { FORMAT_RAW_RGB8, FrameMessage } from "../src/protocol.js";
import { orbitToPose } from "../src/orbit.js";

class FakeSocket {
  sent: (string | ArrayBuffer)[] = [];
  closed = false;
  onopen: ((...args: any[]) => void) | null = null;
  onclose: ((...args: any[]) => void) | null = null;
  onerror: ((...args: any[]) => void) | null = null;
  onmessage: ((event: any) => void) | null = null;

  send(data: string | ArrayBuffer): void {
    if (this.closed) throw new Error("socket closed");
    this.sent.push(data);
  }
  close(): void {
    this.closed = true;
  }
  open(): void {
    this.onopen?.();
  }
  message(data: unknown): void {
    this.onmessage?.({ data });
  }
  drop(): void {
    this.onclose?.();
  }
  sentTexts(): string[] {
    return this.sent.filter((d): d is string => typeof d === "string");
  }
}

function frameBuffer(index: number, width: number, height: number): ArrayBuffer {
  const payload = width * height * 3;
  const buf = new ArrayBuffer(17 + payload);
  const view = new DataView(buf);
  view.setBigUint64(0, BigInt(index), true);
  view.setUint32(8, width, true);
  view.setUint32(12, height, true);
  view.setUint8(16, FORMAT_RAW_RGB8);
  return buf;
}

function event(kind: string, detail: unknown): string {
  return JSON.stringify({ type: "event", kind, detail });
}

function makeHarness() {
  const sockets: FakeSocket[] = [];
  const frames: FrameMessage[] = [];
  const audio: ArrayBuffer[] = [];
  const timers = new Map<number, { fn: () => void; at: number }>();
  let nextTimer = 1;
  const clock = { now: 0 };
  const client = new ViewerClient(
    { url: "ws://test/ws", width: 64, height: 64 },
    {
      makeSocket: () => {
        const sock = new FakeSocket();
        sockets.push(sock);
        return sock;
      },
      now: () => clock.now,
      setTimer: (fn, ms) => {
        const id = nextTimer++;
        timers.set(id, { fn, at: clock.now + ms });
        return id;
      },
      clearTimer: (id) => {
        timers.delete(id);
      },
      onFrame: (frame) => frames.push(frame),
      onAudio: (payload) => audio.push(payload),
    },
  );
  const advance = (ms: number) => {
    clock.now += ms;
    for (const [id, timer] of [...timers]) {
      if (timer.at <= clock.now) {
        timers.delete(id);
        timer.fn();
      }
    }
  };
  return { client, sockets, frames, audio, timers, clock, advance };
}

function liveHarness() {
  const h = makeHarness();
  h.client.connect();
  h.sockets[0].open();
  return h;
}

describe("connection", () => {
  it("opens a socket and goes live", () => {
    const h = makeHarness();
    h.client.connect();
    expect(h.sockets).toHaveLength(1);
    expect(h.client.state.status).toBe("connecting");
    h.sockets[0].open();
    expect(h.client.state.status).toBe("live");
  });

  it("reconnects after a drop with backoff and resumes cleanly", () => {
    const h = liveHarness();
    h.sockets[0].message(frameBuffer(12, 64, 64));
    h.sockets[0].drop();
    expect(h.client.state.status).toBe("reconnecting");
    expect(h.timers.size).toBe(1);

    h.advance(499);
    expect(h.sockets).toHaveLength(1);
    h.advance(1);
    expect(h.sockets).toHaveLength(2);
    h.sockets[1].open();
    expect(h.client.state.status).toBe("live");

    // first frame of the new session is never a drop
    h.sockets[1].message(frameBuffer(0, 64, 64));
    expect(h.client.state.stats.droppedFrames).toBe(0);
  });

  it("stop cancels reconnection", () => {
    const h = liveHarness();
    h.sockets[0].drop();
    h.client.stop();
    h.advance(60000);
    expect(h.sockets).toHaveLength(1);
  });
});

describe("message routing", () => {
  it("decodes binary frames and updates stats", () => {
    const h = liveHarness();
    h.sockets[0].message(frameBuffer(0, 64, 64));
    h.sockets[0].message(new Uint8Array(frameBuffer(1, 64, 64)));
    expect(h.frames.map((f) => f.frameIndex)).toEqual([0, 1]);
    expect(h.client.state.stats.framesReceived).toBe(2);
  });

  it("routes the audio-tagged binary to onAudio, frames stay frames", () => {
    const h = liveHarness();
    h.sockets[0].message(event("audio", { bytes: 12 }));
    h.sockets[0].message(frameBuffer(0, 64, 64)); // wrong size: still a frame
    h.sockets[0].message(new ArrayBuffer(12));
    h.sockets[0].message(frameBuffer(1, 64, 64));
    expect(h.audio).toHaveLength(1);
    expect(h.audio[0].byteLength).toBe(12);
    expect(h.frames.map((f) => f.frameIndex)).toEqual([0, 1]);
  });

  it("contains malformed messages as server errors", () => {
    const h = liveHarness();
    h.sockets[0].message("{garbage");
    h.sockets[0].message(new ArrayBuffer(5));
    h.sockets[0].message(12345); // neither text nor binary: ignored
    expect(h.client.state.status).toBe("live");
    expect(h.client.state.banner).not.toBeNull();
    h.sockets[0].message(frameBuffer(3, 64, 64));
    expect(h.frames).toHaveLength(1);
  });
});

describe("chat", () => {
  it("runs a full turn: send, reply, ready again", () => {
    const h = liveHarness();
    expect(h.client.sendChat("   ")).toBe(false);
    expect(h.client.sendChat("hello avatar")).toBe(true);
    expect(JSON.parse(h.sockets[0].sentTexts()[0])).toEqual({
      type: "chat",
      text: "hello avatar",
    });
    expect(h.client.sendChat("again")).toBe(false); // turn in flight

    h.clock.now = 750;
    h.sockets[0].message(event("reply", "You said: hello avatar"));
    expect(h.client.state.transcript.at(-1)).toEqual({
      role: "avatar",
      text: "You said: hello avatar",
    });
    expect(h.client.state.stats.lastTurnLatencyMs).toBe(750);
    expect(h.client.sendChat("again")).toBe(true);
  });

  it("cannot send before the connection is live", () => {
    const h = makeHarness();
    expect(h.client.sendChat("hi")).toBe(false);
    h.client.connect();
    expect(h.client.sendChat("hi")).toBe(false);
    expect(h.sockets[0].sent).toHaveLength(0);
  });

  it("busy unblocks the composer", () => {
    const h = liveHarness();
    h.client.sendChat("hi");
    h.sockets[0].message(event("busy", "pipeline already running"));
    expect(h.client.state.awaitingReply).toBe(false);
  });

  it("a send failure surfaces as a banner, not a throw", () => {
    const h = liveHarness();
    h.sockets[0].send = () => {
      throw new Error("boom");
    };
    expect(h.client.sendChat("hi")).toBe(false);
    expect(h.client.state.banner).toBe("boom");
  });
});

describe("orbit control", () => {
  it("sends the first camera message immediately and rate limits the rest", () => {
    const h = liveHarness();
    const orbit = h.client.state.orbit;
    h.client.setOrbit({ ...orbit, azimuthDeg: 10 });
    expect(h.sockets[0].sentTexts()).toHaveLength(1);

    h.client.setOrbit({ ...orbit, azimuthDeg: 20 });
    h.client.setOrbit({ ...orbit, azimuthDeg: 30 });
    expect(h.sockets[0].sentTexts()).toHaveLength(1); // parked
    h.advance(34);
    const texts = h.sockets[0].sentTexts();
    expect(texts).toHaveLength(2);

    const last = JSON.parse(texts[1]);
    expect(last.type).toBe("camera");
    const expected = orbitToPose({ ...orbit, azimuthDeg: 30 });
    expect(last.pose).toHaveLength(16);
    for (let i = 0; i < 16; i++) {
      expect(Math.abs(last.pose[i] - expected[i])).toBeLessThan(1e-12);
    }
  });

  it("keeps a fast drag at or under 30 messages per second", () => {
    const h = liveHarness();
    const orbit = h.client.state.orbit;
    for (let i = 0; i < 120; i++) {
      h.client.setOrbit({ ...orbit, azimuthDeg: i });
      h.advance(1000 / 120);
    }
    const sent = h.sockets[0].sentTexts().length;
    expect(sent).toBeLessThanOrEqual(30);
    expect(sent).toBeGreaterThan(10);
  });

  it("updates local state but sends nothing when not live", () => {
    const h = makeHarness();
    h.client.setOrbit({ target: [0, 0, 0], azimuthDeg: 45, elevationDeg: 10, distance: 2 });
    expect(h.client.state.orbit.azimuthDeg).toBe(45);
    expect(h.sockets).toHaveLength(0);
  });
});
