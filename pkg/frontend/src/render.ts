/**
 * Frame presentation: raw RGB8 to RGBA conversion (pure, testable) and
 * canvas blitting for both wire formats. PNG payloads go through
 * createImageBitmap; no splatting happens client side.
 */

import { FORMAT_PNG, FORMAT_RAW_RGB8, FrameMessage, ProtocolError } from "./protocol.js";

/** Expand tightly packed RGB8 into RGBA with opaque alpha. */
export function rawToRgba(
  payload: Uint8Array,
  width: number,
  height: number,
): Uint8ClampedArray<ArrayBuffer> {
  const pixels = width * height;
  if (payload.length !== pixels * 3) {
    throw new ProtocolError(
      `raw payload is ${payload.length} bytes, expected ${pixels * 3} for ${width}x${height}`,
    );
  }
  const out = new Uint8ClampedArray(new ArrayBuffer(pixels * 4));
  for (let i = 0; i < pixels; i++) {
    out[i * 4] = payload[i * 3];
    out[i * 4 + 1] = payload[i * 3 + 1];
    out[i * 4 + 2] = payload[i * 3 + 2];
    out[i * 4 + 3] = 255;
  }
  return out;
}

interface Context2DLike {
  putImageData(data: ImageData, x: number, y: number): void;
  drawImage(image: CanvasImageSource, x: number, y: number): void;
}

export async function blitFrame(
  ctx: Context2DLike,
  frame: FrameMessage,
): Promise<void> {
  if (frame.format === FORMAT_RAW_RGB8) {
    const rgba = rawToRgba(frame.payload, frame.width, frame.height);
    ctx.putImageData(new ImageData(rgba, frame.width, frame.height), 0, 0);
    return;
  }
  if (frame.format === FORMAT_PNG) {
    const copy = new Uint8Array(frame.payload);
    const blob = new Blob([copy.buffer as ArrayBuffer], { type: "image/png" });
    const bitmap = await createImageBitmap(blob);
    try {
      ctx.drawImage(bitmap, 0, 0);
    } finally {
      bitmap.close();
    }
    return;
  }
  throw new ProtocolError(`cannot blit frame format ${frame.format}`);
}
