import { describe, expect, it } from "vitest";

import { rawToRgba } from "../src/render.js";
import { ProtocolError } from "../src/protocol.js";

describe("rawToRgba", () => {
  it("expands packed RGB into opaque RGBA", () => {
    const rgb = new Uint8Array([10, 20, 30, 40, 50, 60]);
    const rgba = rawToRgba(rgb, 2, 1);
    expect(Array.from(rgba)).toEqual([10, 20, 30, 255, 40, 50, 60, 255]);
  });

  it("rejects payloads of the wrong size", () => {
    expect(() => rawToRgba(new Uint8Array(5), 2, 1)).toThrow(ProtocolError);
  });

  it("preserves every byte on a larger image", () => {
    const w = 17;
    const h = 9;
    const rgb = new Uint8Array(w * h * 3).map((_, i) => (i * 31) % 256);
    const rgba = rawToRgba(rgb, w, h);
    for (let i = 0; i < w * h; i++) {
      expect(rgba[i * 4]).toBe(rgb[i * 3]);
      expect(rgba[i * 4 + 1]).toBe(rgb[i * 3 + 1]);
      expect(rgba[i * 4 + 2]).toBe(rgb[i * 3 + 2]);
      expect(rgba[i * 4 + 3]).toBe(255);
    }
  });
});
