/** Test-only helpers: server handle, a seeded PRNG, and a PNG pixel reader. */
import { readFileSync } from "node:fs";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { inflateSync } from "node:zlib";

const here = fileURLToPath(new URL(".", import.meta.url));

export function serverBase(): string {
  const info = JSON.parse(readFileSync(join(here, ".server.json"), "utf-8"));
  return info.base as string;
}

/** Deterministic float PRNG in [0, 1) for scripted interaction sequences. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randInt(rand: () => number, lo: number, hi: number): number {
  return lo + Math.floor(rand() * (hi - lo + 1));
}

export function pick<T>(rand: () => number, items: readonly T[]): T {
  return items[Math.floor(rand() * items.length)];
}

function readU32(b: Uint8Array, off: number): number {
  return ((b[off] << 24) | (b[off + 1] << 16) | (b[off + 2] << 8) | b[off + 3]) >>> 0;
}

/**
 * Decode an 8-bit non-interlaced truecolor PNG (the service's raster format)
 * to packed RGB. Supports all five scanline filters.
 */
export function decodePng(data: Uint8Array): {
  width: number;
  height: number;
  rgb: Uint8Array;
} {
  const sig = [137, 80, 78, 71, 13, 10, 26, 10];
  for (let i = 0; i < 8; i++) {
    if (data[i] !== sig[i]) throw new Error("not a PNG");
  }
  let pos = 8;
  let width = 0;
  let height = 0;
  let colorType = -1;
  const idat: Buffer[] = [];
  while (pos + 8 <= data.length) {
    const len = readU32(data, pos);
    const type = String.fromCharCode(
      data[pos + 4],
      data[pos + 5],
      data[pos + 6],
      data[pos + 7],
    );
    const chunk = data.subarray(pos + 8, pos + 8 + len);
    if (type === "IHDR") {
      width = readU32(chunk, 0);
      height = readU32(chunk, 4);
      const bitDepth = chunk[8];
      colorType = chunk[9];
      if (bitDepth !== 8 || (colorType !== 2 && colorType !== 6)) {
        throw new Error(`unsupported PNG (depth ${bitDepth}, color ${colorType})`);
      }
      if (chunk[12] !== 0) throw new Error("interlaced PNG unsupported");
    } else if (type === "IDAT") {
      idat.push(Buffer.from(chunk));
    } else if (type === "IEND") {
      break;
    }
    pos += 12 + len;
  }
  const raw = inflateSync(Buffer.concat(idat));
  const bpp = colorType === 6 ? 4 : 3;
  const stride = width * bpp;
  const out = new Uint8Array(height * stride);
  let p = 0;
  for (let y = 0; y < height; y++) {
    const filter = raw[p++];
    const rowOff = y * stride;
    for (let x = 0; x < stride; x++) {
      const rawv = raw[p++];
      const left = x >= bpp ? out[rowOff + x - bpp] : 0;
      const up = y > 0 ? out[rowOff + x - stride] : 0;
      const ul = y > 0 && x >= bpp ? out[rowOff + x - bpp - stride] : 0;
      let v: number;
      switch (filter) {
        case 0:
          v = rawv;
          break;
        case 1:
          v = rawv + left;
          break;
        case 2:
          v = rawv + up;
          break;
        case 3:
          v = rawv + ((left + up) >> 1);
          break;
        case 4: {
          const q = left + up - ul;
          const pa = Math.abs(q - left);
          const pb = Math.abs(q - up);
          const pc = Math.abs(q - ul);
          v = rawv + (pa <= pb && pa <= pc ? left : pb <= pc ? up : ul);
          break;
        }
        default:
          throw new Error(`bad PNG filter ${filter}`);
      }
      out[rowOff + x] = v & 0xff;
    }
  }
  if (bpp === 3) return { width, height, rgb: out };
  const rgb = new Uint8Array(width * height * 3);
  for (let i = 0, j = 0; i < out.length; i += 4, j += 3) {
    rgb[j] = out[i];
    rgb[j + 1] = out[i + 1];
    rgb[j + 2] = out[i + 2];
  }
  return { width, height, rgb };
}

export function base64ToBytes(b64: string): Uint8Array {
  return new Uint8Array(Buffer.from(b64, "base64"));
}
