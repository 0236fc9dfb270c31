import { describe, expect, it } from "vitest";

import {
  decodeIndexedPng,
  encodeIndexedPng,
  fromBase64,
  paletteFromClasses,
  toBase64,
} from "../src/png.js";

function samplePalette(): Uint8Array {
  return paletteFromClasses([
    [64, 64, 64],
    [220, 60, 50],
    [60, 110, 220],
  ]);
}

describe("indexed png codec", () => {
  it("round-trips labels exactly, including the UNKNOWN index", () => {
    const w = 32;
    const h = 32;
    const labels = new Uint8Array(w * h);
    for (let i = 0; i < labels.length; i++) labels[i] = [0, 1, 2, 255][i % 4];
    const bytes = encodeIndexedPng(labels, w, h, samplePalette());
    const decoded = decodeIndexedPng(bytes);
    expect(decoded.width).toBe(w);
    expect(decoded.height).toBe(h);
    expect(Buffer.from(decoded.labels).equals(Buffer.from(labels))).toBe(true);
    expect([...decoded.palette.subarray(3, 6)]).toEqual([220, 60, 50]);
  });

  it("export is byte-deterministic", () => {
    const labels = new Uint8Array(16 * 16).fill(1);
    labels[5] = 2;
    const a = encodeIndexedPng(labels, 16, 16, samplePalette());
    const b = encodeIndexedPng(labels, 16, 16, samplePalette());
    expect(Buffer.from(a).equals(Buffer.from(b))).toBe(true);
  });

  it("export -> import -> export reproduces identical bytes", () => {
    const labels = new Uint8Array(16 * 16);
    for (let i = 0; i < labels.length; i++) labels[i] = i % 3;
    const first = encodeIndexedPng(labels, 16, 16, samplePalette());
    const decoded = decodeIndexedPng(first);
    const second = encodeIndexedPng(decoded.labels, decoded.width, decoded.height, decoded.palette);
    expect(Buffer.from(first).equals(Buffer.from(second))).toBe(true);
  });

  it("handles grids larger than one stored deflate block", () => {
    const w = 300;
    const h = 250; // raw stream 75,250 bytes: needs two stored blocks
    const labels = new Uint8Array(w * h);
    for (let i = 0; i < labels.length; i++) labels[i] = (i * 7) % 5;
    const decoded = decodeIndexedPng(encodeIndexedPng(labels, w, h, samplePalette()));
    expect(Buffer.from(decoded.labels).equals(Buffer.from(labels))).toBe(true);
  });

  it("rejects non-PNG bytes", () => {
    expect(() => decodeIndexedPng(new Uint8Array([1, 2, 3]))).toThrow(/not a PNG/);
  });
});

describe("base64", () => {
  it("round-trips arbitrary bytes and matches Buffer's encoding", () => {
    for (const n of [0, 1, 2, 3, 31, 57]) {
      const bytes = new Uint8Array(n);
      for (let i = 0; i < n; i++) bytes[i] = (i * 37 + n) % 256;
      const encoded = toBase64(bytes);
      expect(encoded).toBe(Buffer.from(bytes).toString("base64"));
      expect(Buffer.from(fromBase64(encoded)).equals(Buffer.from(bytes))).toBe(true);
    }
  });
});
