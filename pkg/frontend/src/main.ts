/**
 * Browser entry point: binds the viewer client to the DOM. Frames are
 * blitted to a canvas, replies land in the transcript, WAV payloads play
 * through an <audio> element, and dragging the canvas orbits the camera.
 */

import { ViewerClient } from "./client.js";
import { blitFrame } from "./render.js";
import { canSendChat, ViewerState } from "./state.js";

const WIDTH = 512;
const HEIGHT = 512;

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function wsUrl(): string {
  const params = new URLSearchParams(window.location.search);
  const override = params.get("ws");
  if (override) return override;
  const scheme = window.location.protocol === "https:" ? "wss" : "ws";
  const host = window.location.hostname || "localhost";
  const port = params.get("port") ?? "8787";
  return `${scheme}://${host}:${port}/ws`;
}

function main(): void {
  const canvas = byId<HTMLCanvasElement>("frame");
  canvas.width = WIDTH;
  canvas.height = HEIGHT;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas context unavailable");

  const input = byId<HTMLInputElement>("chat-input");
  const send = byId<HTMLButtonElement>("chat-send");
  const transcript = byId<HTMLUListElement>("transcript");
  const banner = byId<HTMLDivElement>("banner");
  const status = byId<HTMLSpanElement>("status");
  const stats = byId<HTMLSpanElement>("stats");
  const audio = byId<HTMLAudioElement>("speech");

  let blitting = false;

  const client = new ViewerClient(
    { url: wsUrl(), width: WIDTH, height: HEIGHT },
    {
      makeSocket: (url) => {
        const sock = new WebSocket(url);
        sock.binaryType = "arraybuffer";
        return sock;
      },
      now: () => performance.now(),
      setTimer: (fn, ms) => window.setTimeout(fn, ms),
      clearTimer: (id) => window.clearTimeout(id),
      onFrame: (frame) => {
        if (blitting) return; // skip, never queue: stay at the live edge
        blitting = true;
        blitFrame(ctx, frame)
          .catch(() => undefined)
          .finally(() => {
            blitting = false;
          });
      },
      onAudio: (payload) => {
        const blob = new Blob([payload], { type: "audio/wav" });
        const url = URL.createObjectURL(blob);
        audio.src = url;
        void audio.play().catch(() => undefined);
        audio.onended = () => URL.revokeObjectURL(url);
      },
      onState: (state) => render(state),
    },
  );

  function render(state: ViewerState): void {
    status.textContent = state.status;
    banner.textContent = state.banner ?? "";
    banner.style.display = state.banner ? "block" : "none";
    const latency =
      state.stats.lastTurnLatencyMs === null
        ? "n/a"
        : `${state.stats.lastTurnLatencyMs.toFixed(0)} ms`;
    stats.textContent =
      `${state.stats.fps.toFixed(1)} fps | ` +
      `${state.stats.droppedFrames} dropped | turn ${latency}`;
    send.disabled = !canSendChat(state, input.value);
    transcript.replaceChildren(
      ...state.transcript.map((entry) => {
        const li = document.createElement("li");
        li.className = entry.role;
        li.textContent = `${entry.role}: ${entry.text}`;
        return li;
      }),
    );
  }

  input.addEventListener("input", () => {
    send.disabled = !canSendChat(client.state, input.value);
  });
  const submit = () => {
    if (client.sendChat(input.value)) input.value = "";
  };
  send.addEventListener("click", submit);
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter") submit();
  });

  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  canvas.addEventListener("pointerdown", (event) => {
    dragging = true;
    lastX = event.clientX;
    lastY = event.clientY;
    canvas.setPointerCapture(event.pointerId);
  });
  canvas.addEventListener("pointermove", (event) => {
    if (!dragging) return;
    const dx = event.clientX - lastX;
    const dy = event.clientY - lastY;
    lastX = event.clientX;
    lastY = event.clientY;
    const orbit = client.state.orbit;
    client.setOrbit({
      ...orbit,
      azimuthDeg: orbit.azimuthDeg + dx * 0.4,
      elevationDeg: orbit.elevationDeg - dy * 0.4,
    });
  });
  canvas.addEventListener("pointerup", () => {
    dragging = false;
  });
  canvas.addEventListener("wheel", (event) => {
    event.preventDefault();
    const orbit = client.state.orbit;
    client.setOrbit({ ...orbit, distance: orbit.distance * (event.deltaY > 0 ? 1.1 : 0.9) });
  });

  render(client.state);
  client.connect();
}

main();
