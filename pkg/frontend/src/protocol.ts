/**
 * Wire protocol codecs for the avatar service.
 *
 * Control messages are UTF-8 JSON text. Frames are binary: a 17-byte
 * little-endian header (u64 frame index, u32 width, u32 height, u8 format)
 * followed by the payload. Reply audio arrives as a raw WAV binary message
 * announced by a preceding `audio` event carrying its byte length.
 */

export const FORMAT_RAW_RGB8 = 0;
export const FORMAT_PNG = 1;
export const FRAME_HEADER_BYTES = 17;

export class ProtocolError extends Error {}

export interface Intrinsics {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
}

export interface FrameMessage {
  frameIndex: number;
  width: number;
  height: number;
  format: number;
  payload: Uint8Array;
}

export type EventKind = "reply" | "audio" | "busy" | "error";

export interface ServerEvent {
  kind: EventKind;
  /* a bare string for reply/busy/error, an object for audio */
  detail: unknown;
}

/** Human-readable text carried by a reply, busy, or error event. */
export function eventText(event: ServerEvent): string {
  if (typeof event.detail === "string") return event.detail;
  if (typeof event.detail === "object" && event.detail !== null) {
    const obj = event.detail as Record<string, unknown>;
    for (const key of ["text", "message"]) {
      const value = obj[key];
      if (typeof value === "string") return value;
    }
  }
  return "";
}

/** Advertised byte length of the binary message following an audio event. */
export function audioBytes(event: ServerEvent): number | null {
  if (typeof event.detail !== "object" || event.detail === null) return null;
  const bytes = (event.detail as Record<string, unknown>)["bytes"];
  if (typeof bytes === "number" && Number.isInteger(bytes) && bytes >= 0) {
    return bytes;
  }
  return null;
}

export function encodeChat(text: string): string {
  if (typeof text !== "string" || text.trim().length === 0) {
    throw new ProtocolError("chat text must be a non-empty string");
  }
  return JSON.stringify({ type: "chat", text });
}

export function encodeCamera(pose: ArrayLike<number>, intrinsics: Intrinsics): string {
  if (pose.length !== 16) {
    throw new ProtocolError(`camera pose needs 16 values, got ${pose.length}`);
  }
  const values = Array.from(pose, (v) => {
    if (typeof v !== "number" || !Number.isFinite(v)) {
      throw new ProtocolError("camera pose must be finite numbers");
    }
    return v;
  });
  const { fx, fy, cx, cy, width, height } = intrinsics;
  for (const v of [fx, fy, cx, cy, width, height]) {
    if (!Number.isFinite(v)) {
      throw new ProtocolError("intrinsics must be finite numbers");
    }
  }
  return JSON.stringify({
    type: "camera",
    pose: values,
    intrinsics: { fx, fy, cx, cy, width, height },
  });
}

const EVENT_KINDS: ReadonlySet<string> = new Set(["reply", "audio", "busy", "error"]);

/** Parse a text message from the service; only `event` messages arrive. */
export function parseServerMessage(text: string): ServerEvent {
  let parsed: unknown;
  try {
    parsed = JSON.parse(text);
  } catch {
    throw new ProtocolError("server message is not valid JSON");
  }
  if (typeof parsed !== "object" || parsed === null) {
    throw new ProtocolError("server message must be a JSON object");
  }
  const msg = parsed as Record<string, unknown>;
  if (msg.type !== "event") {
    throw new ProtocolError(`unexpected server message type ${String(msg.type)}`);
  }
  if (typeof msg.kind !== "string" || !EVENT_KINDS.has(msg.kind)) {
    throw new ProtocolError(`unknown event kind ${String(msg.kind)}`);
  }
  return { kind: msg.kind as EventKind, detail: msg.detail ?? null };
}

export function decodeFrame(data: ArrayBuffer): FrameMessage {
  if (data.byteLength < FRAME_HEADER_BYTES) {
    throw new ProtocolError(
      `frame message truncated: ${data.byteLength} < ${FRAME_HEADER_BYTES} header bytes`,
    );
  }
  const view = new DataView(data);
  const rawIndex = view.getBigUint64(0, true);
  if (rawIndex > BigInt(Number.MAX_SAFE_INTEGER)) {
    throw new ProtocolError(`frame index ${rawIndex} exceeds safe integer range`);
  }
  const frameIndex = Number(rawIndex);
  const width = view.getUint32(8, true);
  const height = view.getUint32(12, true);
  const format = view.getUint8(16);
  const payload = new Uint8Array(data, FRAME_HEADER_BYTES);
  if (format === FORMAT_RAW_RGB8) {
    const expected = width * height * 3;
    if (payload.byteLength !== expected) {
      throw new ProtocolError(
        `raw frame payload ${payload.byteLength} bytes, expected ${expected}`,
      );
    }
  } else if (format !== FORMAT_PNG) {
    throw new ProtocolError(`unknown frame format ${format}`);
  }
  return { frameIndex, width, height, format, payload };
}

/** WAV fallback sniff; the authoritative signal is the preceding audio event. */
export function looksLikeWav(data: ArrayBuffer): boolean {
  if (data.byteLength < 12) return false;
  const b = new Uint8Array(data, 0, 4);
  return b[0] === 0x52 && b[1] === 0x49 && b[2] === 0x46 && b[3] === 0x46; // "RIFF"
}
