/**
 * Pure viewer state machine: connection lifecycle with retry backoff,
 * chat transcript, and playback statistics. All transitions go through
 * `reduce`, which never throws; unexpected events in a given status are
 * ignored rather than crashing the UI.
 */

import { clampOrbit, OrbitState } from "./orbit.js";

export type ConnectionStatus = "idle" | "connecting" | "live" | "reconnecting";

export interface TranscriptEntry {
  role: "user" | "avatar" | "system";
  text: string;
}

export interface PlaybackStats {
  framesReceived: number;
  droppedFrames: number;
  fps: number;
  lastTurnLatencyMs: number | null;
}

export interface ViewerState {
  status: ConnectionStatus;
  attempt: number;
  retryDelayMs: number | null;
  banner: string | null;
  orbit: OrbitState;
  transcript: readonly TranscriptEntry[];
  stats: PlaybackStats;
  awaitingReply: boolean;
  turnStartedMs: number | null;
  lastFrameIndex: number;
  frameTimesMs: readonly number[];
}

export type ViewerEvent =
  | { type: "connect" }
  | { type: "opened" }
  | { type: "closed"; reason?: string }
  | { type: "retry" }
  | { type: "frame"; frameIndex: number; atMs: number }
  | { type: "chatSent"; text: string; atMs: number }
  | { type: "reply"; text: string; atMs: number }
  | { type: "busy" }
  | { type: "serverError"; detail: string }
  | { type: "orbitChanged"; orbit: OrbitState };

export const BASE_RETRY_MS = 500;
export const MAX_RETRY_MS = 8000;
const FPS_WINDOW_MS = 2000;

export function retryDelayMs(attempt: number): number {
  return Math.min(MAX_RETRY_MS, BASE_RETRY_MS * 2 ** Math.max(0, attempt));
}

export function initialState(orbit?: OrbitState): ViewerState {
  return {
    status: "idle",
    attempt: 0,
    retryDelayMs: null,
    banner: null,
    orbit: orbit ?? { target: [0, 0, 0], azimuthDeg: 0, elevationDeg: 0, distance: 3 },
    transcript: [],
    stats: { framesReceived: 0, droppedFrames: 0, fps: 0, lastTurnLatencyMs: null },
    awaitingReply: false,
    turnStartedMs: null,
    lastFrameIndex: -1,
    frameTimesMs: [],
  };
}

/** True when the chat input should be enabled for this text. */
export function canSendChat(state: ViewerState, text: string): boolean {
  return state.status === "live" && !state.awaitingReply && text.trim().length > 0;
}

export function reduce(state: ViewerState, event: ViewerEvent): ViewerState {
  switch (event.type) {
    case "connect":
      if (state.status === "connecting" || state.status === "live") return state;
      return { ...state, status: "connecting", retryDelayMs: null };

    case "opened":
      // a fresh server session always starts in Idle with a new frame clock
      return {
        ...state,
        status: "live",
        attempt: 0,
        retryDelayMs: null,
        banner: null,
        awaitingReply: false,
        turnStartedMs: null,
        lastFrameIndex: -1,
        frameTimesMs: [],
      };

    case "closed": {
      if (state.status === "idle") return state;
      const attempt = state.attempt + 1;
      return {
        ...state,
        status: "reconnecting",
        attempt,
        retryDelayMs: retryDelayMs(attempt - 1),
        banner: event.reason ?? "connection lost, retrying",
        awaitingReply: false,
        turnStartedMs: null,
      };
    }

    case "retry":
      if (state.status !== "reconnecting") return state;
      return { ...state, status: "connecting", retryDelayMs: null };

    case "frame": {
      if (event.frameIndex <= state.lastFrameIndex) return state; // stale
      const dropped =
        state.lastFrameIndex >= 0 ? event.frameIndex - state.lastFrameIndex - 1 : 0;
      const windowStart = event.atMs - FPS_WINDOW_MS;
      const times = [...state.frameTimesMs.filter((t) => t >= windowStart), event.atMs];
      return {
        ...state,
        lastFrameIndex: event.frameIndex,
        frameTimesMs: times,
        stats: {
          ...state.stats,
          framesReceived: state.stats.framesReceived + 1,
          droppedFrames: state.stats.droppedFrames + dropped,
          fps: (times.length * 1000) / FPS_WINDOW_MS,
        },
      };
    }

    case "chatSent":
      return {
        ...state,
        transcript: [...state.transcript, { role: "user", text: event.text }],
        awaitingReply: true,
        turnStartedMs: event.atMs,
      };

    case "reply": {
      const latency =
        state.turnStartedMs !== null ? event.atMs - state.turnStartedMs : null;
      return {
        ...state,
        transcript: [...state.transcript, { role: "avatar", text: event.text }],
        awaitingReply: false,
        turnStartedMs: null,
        stats: { ...state.stats, lastTurnLatencyMs: latency },
      };
    }

    case "busy":
      return {
        ...state,
        transcript: [...state.transcript, { role: "system", text: "avatar is busy" }],
        awaitingReply: false,
        turnStartedMs: null,
      };

    case "serverError":
      return {
        ...state,
        banner: event.detail,
        awaitingReply: false,
        turnStartedMs: null,
      };

    case "orbitChanged":
      return { ...state, orbit: clampOrbit(event.orbit) };
  }
}
