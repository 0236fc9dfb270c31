// Minimal indexed-PNG codec for mask files: 8-bit palette images, written
// with stored (uncompressed) deflate blocks so the bytes are a pure function
// of the pixels. The decoder handles exactly what the encoder writes; masks
// produced elsewhere are imported through a canvas fallback in the UI.

const SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(data: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < data.length; i++) c = CRC_TABLE[(c ^ data[i]) & 0xff] ^ (c >>> 8);
  return (c ^ 0xffffffff) >>> 0;
}

function adler32(data: Uint8Array): number {
  let a = 1;
  let b = 0;
  for (let i = 0; i < data.length; i++) {
    a = (a + data[i]) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

function u32be(value: number): number[] {
  return [(value >>> 24) & 0xff, (value >>> 16) & 0xff, (value >>> 8) & 0xff, value & 0xff];
}

function chunk(type: string, data: Uint8Array): number[] {
  const typed = new Uint8Array(4 + data.length);
  for (let i = 0; i < 4; i++) typed[i] = type.charCodeAt(i);
  typed.set(data, 4);
  return [...u32be(data.length), ...typed, ...u32be(crc32(typed))];
}

function zlibStored(raw: Uint8Array): Uint8Array {
  const parts: number[] = [0x78, 0x01];
  for (let offset = 0; offset < raw.length || offset === 0; offset += 65535) {
    const block = raw.subarray(offset, Math.min(offset + 65535, raw.length));
    const final = offset + 65535 >= raw.length ? 1 : 0;
    const len = block.length;
    parts.push(final, len & 0xff, (len >> 8) & 0xff, ~len & 0xff, (~len >> 8) & 0xff);
    parts.push(...block);
    if (final) break;
  }
  parts.push(...u32be(adler32(raw)));
  return new Uint8Array(parts);
}

/** Encode an index grid as an indexed PNG (palette index = class id). */
export function encodeIndexedPng(
  labels: Uint8Array, width: number, height: number, palette: Uint8Array,
): Uint8Array {
  if (labels.length !== width * height) throw new Error("label grid size mismatch");
  if (palette.length !== 768) throw new Error("palette must hold 256 RGB entries");
  const ihdr = new Uint8Array([...u32be(width), ...u32be(height), 8, 3, 0, 0, 0]);
  const raw = new Uint8Array((width + 1) * height);
  for (let y = 0; y < height; y++) {
    raw[y * (width + 1)] = 0; // filter: none
    raw.set(labels.subarray(y * width, (y + 1) * width), y * (width + 1) + 1);
  }
  return new Uint8Array([
    ...SIGNATURE,
    ...chunk("IHDR", ihdr),
    ...chunk("PLTE", palette),
    ...chunk("IDAT", zlibStored(raw)),
    ...chunk("IEND", new Uint8Array(0)),
  ]);
}

export interface DecodedPng {
  labels: Uint8Array;
  width: number;
  height: number;
  palette: Uint8Array;
}

/** Decode PNGs written by encodeIndexedPng (stored blocks, filter 0 only). */
export function decodeIndexedPng(bytes: Uint8Array): DecodedPng {
  for (let i = 0; i < 8; i++) {
    if (bytes[i] !== SIGNATURE[i]) throw new Error("not a PNG file");
  }
  let width = 0;
  let height = 0;
  let palette = new Uint8Array(768);
  const idat: number[] = [];
  let offset = 8;
  while (offset < bytes.length) {
    const length =
      (bytes[offset] << 24) | (bytes[offset + 1] << 16) | (bytes[offset + 2] << 8) | bytes[offset + 3];
    const type = String.fromCharCode(...bytes.subarray(offset + 4, offset + 8));
    const data = bytes.subarray(offset + 8, offset + 8 + length);
    if (type === "IHDR") {
      width = (data[0] << 24) | (data[1] << 16) | (data[2] << 8) | data[3];
      height = (data[4] << 24) | (data[5] << 16) | (data[6] << 8) | data[7];
      if (data[8] !== 8 || data[9] !== 3) {
        throw new Error("only 8-bit palette PNGs are supported");
      }
      if (data[12] !== 0) throw new Error("interlaced PNGs are not supported");
    } else if (type === "PLTE") {
      palette = new Uint8Array(768);
      palette.set(data.subarray(0, Math.min(768, data.length)));
    } else if (type === "IDAT") {
      idat.push(...data);
    } else if (type === "IEND") {
      break;
    }
    offset += 12 + length;
  }
  const stream = new Uint8Array(idat);
  if ((stream[0] & 0x0f) !== 8) throw new Error("bad zlib header");
  const raw: number[] = [];
  let pos = 2;
  for (;;) {
    const header = stream[pos];
    if ((header & 0x06) !== 0) {
      throw new Error("compressed PNG: import it through the canvas fallback");
    }
    const len = stream[pos + 1] | (stream[pos + 2] << 8);
    raw.push(...stream.subarray(pos + 5, pos + 5 + len));
    pos += 5 + len;
    if (header & 1) break;
  }
  const labels = new Uint8Array(width * height);
  for (let y = 0; y < height; y++) {
    if (raw[y * (width + 1)] !== 0) throw new Error("unsupported PNG row filter");
    for (let x = 0; x < width; x++) labels[y * width + x] = raw[y * (width + 1) + 1 + x];
  }
  return { labels, width, height, palette };
}

export function paletteFromClasses(colors: [number, number, number][], unknownIndex = 255): Uint8Array {
  const palette = new Uint8Array(768);
  colors.forEach((rgb, i) => palette.set(rgb, i * 3));
  palette.set([0, 0, 0], unknownIndex * 3);
  return palette;
}

export function toBase64(bytes: Uint8Array): string {
  const alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  let out = "";
  for (let i = 0; i < bytes.length; i += 3) {
    const a = bytes[i];
    const b = i + 1 < bytes.length ? bytes[i + 1] : 0;
    const c = i + 2 < bytes.length ? bytes[i + 2] : 0;
    out += alphabet[a >> 2] + alphabet[((a & 3) << 4) | (b >> 4)];
    out += i + 1 < bytes.length ? alphabet[((b & 15) << 2) | (c >> 6)] : "=";
    out += i + 2 < bytes.length ? alphabet[c & 63] : "=";
  }
  return out;
}

export function fromBase64(text: string): Uint8Array {
  const alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  const clean = text.replace(/=+$/, "");
  const out: number[] = [];
  let buffer = 0;
  let bits = 0;
  for (const ch of clean) {
    const value = alphabet.indexOf(ch);
    if (value < 0) throw new Error(`invalid base64 character ${ch}`);
    buffer = (buffer << 6) | value;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push((buffer >> bits) & 0xff);
    }
  }
  return new Uint8Array(out);
}
