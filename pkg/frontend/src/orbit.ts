/**
 * Spherical orbit camera and its conversion to wire-protocol pose messages.
 *
 * Azimuth 0 / elevation 0 places the camera on the -z axis looking at the
 * target; azimuth rotates around +y (positive toward +x), elevation tilts
 * up. The world-to-camera construction mirrors the service's look-at
 * convention (rows: right = forward x up, down = forward x right, forward),
 * so poses produced here render upright on the server.
 */

import { encodeCamera, Intrinsics } from "./protocol.js";

export interface OrbitState {
  target: readonly [number, number, number];
  azimuthDeg: number;
  elevationDeg: number;
  distance: number;
}

export const MIN_DISTANCE = 1e-3;
export const MAX_ELEVATION_DEG = 89.9;

export function clampOrbit(state: OrbitState): OrbitState {
  return {
    target: state.target,
    azimuthDeg: state.azimuthDeg,
    elevationDeg: Math.min(MAX_ELEVATION_DEG, Math.max(-MAX_ELEVATION_DEG, state.elevationDeg)),
    distance: Math.max(MIN_DISTANCE, state.distance),
  };
}

const DEG = Math.PI / 180;

export function orbitEye(state: OrbitState): [number, number, number] {
  const az = state.azimuthDeg * DEG;
  const el = state.elevationDeg * DEG;
  const r = state.distance;
  return [
    state.target[0] + r * Math.sin(az) * Math.cos(el),
    state.target[1] + r * Math.sin(el),
    state.target[2] - r * Math.cos(az) * Math.cos(el),
  ];
}

function sub(a: readonly number[], b: readonly number[]): [number, number, number] {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function cross(a: readonly number[], b: readonly number[]): [number, number, number] {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function normalize(v: [number, number, number], what: string): [number, number, number] {
  const n = Math.hypot(v[0], v[1], v[2]);
  if (n < 1e-12) throw new Error(`${what} is degenerate`);
  return [v[0] / n, v[1] / n, v[2] / n];
}

/** Row-major 4x4 world-to-camera matrix; matches the service's convention. */
export function lookAt(
  eye: readonly [number, number, number],
  target: readonly [number, number, number],
  up: readonly [number, number, number] = [0, 1, 0],
): Float64Array {
  const forward = normalize(sub(target, eye), "view direction");
  const right = normalize(cross(forward, up), "right axis (up parallel to view)");
  const down = cross(forward, right);
  const rot = [right, down, forward];
  const m = new Float64Array(16);
  for (let r = 0; r < 3; r++) {
    m[4 * r] = rot[r][0];
    m[4 * r + 1] = rot[r][1];
    m[4 * r + 2] = rot[r][2];
    m[4 * r + 3] = -(rot[r][0] * eye[0] + rot[r][1] * eye[1] + rot[r][2] * eye[2]);
  }
  m[15] = 1;
  return m;
}

export function orbitToPose(state: OrbitState): Float64Array {
  const s = clampOrbit(state);
  return lookAt(orbitEye(s), s.target);
}

/** Pinhole intrinsics for a given viewport, matching the service default. */
export function makeIntrinsics(width: number, height: number, fovDeg = 60): Intrinsics {
  const f = (0.5 * width) / Math.tan((fovDeg * DEG) / 2);
  return { fx: f, fy: f, cx: (width - 1) / 2, cy: (height - 1) / 2, width, height };
}

export function orbitMessage(state: OrbitState, intrinsics: Intrinsics): string {
  return encodeCamera(orbitToPose(state), intrinsics);
}

/**
 * Trailing-edge rate limiter for camera messages. `submit` returns the
 * message when the minimum interval has elapsed, otherwise stores it as
 * pending; `flush` releases the newest pending message once due, so the
 * final pose of a drag always reaches the service.
 */
export class RateLimiter {
  private lastSentMs = -Infinity;
  private pending: string | null = null;

  constructor(private readonly minIntervalMs: number) {
    if (!(minIntervalMs > 0)) throw new Error("minIntervalMs must be positive");
  }

  submit(message: string, nowMs: number): string | null {
    if (nowMs - this.lastSentMs >= this.minIntervalMs) {
      this.lastSentMs = nowMs;
      this.pending = null;
      return message;
    }
    this.pending = message;
    return null;
  }

  flush(nowMs: number): string | null {
    if (this.pending !== null && nowMs - this.lastSentMs >= this.minIntervalMs) {
      const msg = this.pending;
      this.pending = null;
      this.lastSentMs = nowMs;
      return msg;
    }
    return null;
  }

  /** Milliseconds until the pending message becomes sendable, if any. */
  nextDueInMs(nowMs: number): number | null {
    if (this.pending === null) return null;
    return Math.max(0, this.minIntervalMs - (nowMs - this.lastSentMs));
  }
}
