import { describe, expect, it } from 'vitest';

import { PngError, decodePng, encodePng } from '../src/png.js';

function randomPixels(n: number, seed: number): Uint8Array {
  // small LCG so the fixture is deterministic
  const out = new Uint8Array(n);
  let state = seed >>> 0;
  for (let i = 0; i < n; i++) {
    state = (state * 1664525 + 1013904223) >>> 0;
    out[i] = state >>> 24;
  }
  return out;
}

describe('encode/decode round trip', () => {
  it.each([
    [1, 'greyscale'],
    [2, 'grey+alpha'],
    [3, 'rgb'],
    [4, 'rgba'],
  ])('%i-channel (%s) pixels survive exactly', async (channels) => {
    const width = 13;
    const height = 7;
    const pixels = randomPixels(width * height * channels, 42 + channels);
    const png = await encodePng(pixels, width, height, channels);
    const decoded = await decodePng(png);
    expect(decoded.width).toBe(width);
    expect(decoded.height).toBe(height);
    expect(decoded.channels).toBe(channels);
    expect(decoded.pixels).toEqual(pixels);
  });

  it('accepts Uint8ClampedArray input (canvas rasters)', async () => {
    const pixels = new Uint8ClampedArray([255, 0, 0, 255, 0, 255, 0, 128]);
    const png = await encodePng(pixels, 2, 1, 4);
    const decoded = await decodePng(png);
    expect(decoded.pixels).toEqual(new Uint8Array(pixels));
  });

  it('starts with the PNG signature', async () => {
    const png = await encodePng(new Uint8Array([7]), 1, 1, 1);
    expect([...png.subarray(0, 8)]).toEqual([137, 80, 78, 71, 13, 10, 26, 10]);
  });
});

describe('decoding filtered scanlines', () => {
  // Build a PNG by hand with a chosen filter type per row, so the decoder's
  // unfiltering is exercised without trusting our own encoder (which always
  // writes filter 0).
  async function pngWithFilter(
    filter: number,
    width: number,
    height: number,
    channels: number,
    pixels: Uint8Array,
  ): Promise<Uint8Array> {
    const { deflateSync } = await import('node:zlib');
    const stride = width * channels;
    const bpp = channels;
    const raw = new Uint8Array((stride + 1) * height);
    for (let y = 0; y < height; y++) {
      raw[y * (stride + 1)] = filter;
      for (let i = 0; i < stride; i++) {
        const value = pixels[y * stride + i];
        const left = i >= bpp ? pixels[y * stride + i - bpp] : 0;
        const up = y > 0 ? pixels[(y - 1) * stride + i] : 0;
        const upLeft = y > 0 && i >= bpp ? pixels[(y - 1) * stride + i - bpp] : 0;
        let encoded: number;
        switch (filter) {
          case 0:
            encoded = value;
            break;
          case 1:
            encoded = value - left;
            break;
          case 2:
            encoded = value - up;
            break;
          case 3:
            encoded = value - ((left + up) >> 1);
            break;
          case 4: {
            const p = left + up - upLeft;
            const pa = Math.abs(p - left);
            const pb = Math.abs(p - up);
            const pc = Math.abs(p - upLeft);
            const pred = pa <= pb && pa <= pc ? left : pb <= pc ? up : upLeft;
            encoded = value - pred;
            break;
          }
          default:
            throw new Error('bad filter');
        }
        raw[y * (stride + 1) + 1 + i] = encoded & 0xff;
      }
    }

    // splice the hand-filtered IDAT into an encoder-produced wrapper
    const template = await encodePng(pixels, width, height, channels);
    const view = new DataView(template.buffer, template.byteOffset);
    const ihdrLen = view.getUint32(8);
    const beforeIdat = template.subarray(0, 8 + 12 + ihdrLen);
    const idat = deflateSync(raw);

    const crcTable = new Uint32Array(256);
    for (let n = 0; n < 256; n++) {
      let c = n;
      for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
      crcTable[n] = c >>> 0;
    }
    const crc32 = (bytes: Uint8Array) => {
      let c = 0xffffffff;
      for (const b of bytes) c = crcTable[(c ^ b) & 0xff] ^ (c >>> 8);
      return (c ^ 0xffffffff) >>> 0;
    };

    const chunk = new Uint8Array(12 + idat.length);
    const cv = new DataView(chunk.buffer);
    cv.setUint32(0, idat.length);
    chunk.set([73, 68, 65, 84], 4); // "IDAT"
    chunk.set(idat, 8);
    cv.setUint32(8 + idat.length, crc32(chunk.subarray(4, 8 + idat.length)));

    const iend = new Uint8Array([0, 0, 0, 0, 73, 69, 78, 68, 174, 66, 96, 130]);
    const out = new Uint8Array(beforeIdat.length + chunk.length + iend.length);
    out.set(beforeIdat, 0);
    out.set(chunk, beforeIdat.length);
    out.set(iend, beforeIdat.length + chunk.length);
    return out;
  }

  it.each([[0], [1], [2], [3], [4]])('filter type %i decodes to the original pixels', async (filter) => {
    const width = 9;
    const height = 5;
    const channels = 3;
    const pixels = randomPixels(width * height * channels, 7 * (filter + 1));
    const png = await pngWithFilter(filter, width, height, channels, pixels);
    const decoded = await decodePng(png);
    expect(decoded.pixels).toEqual(pixels);
  });
});

describe('rejection', () => {
  it('rejects non-PNG bytes', async () => {
    await expect(decodePng(new Uint8Array([1, 2, 3]))).rejects.toThrow(PngError);
  });

  it('rejects a pixel buffer that does not match the dimensions', async () => {
    await expect(encodePng(new Uint8Array(10), 2, 2, 3)).rejects.toThrow(/does not match/);
  });

  it('rejects unsupported channel counts', async () => {
    await expect(encodePng(new Uint8Array(25), 5, 5, 5)).rejects.toThrow(
      /unsupported channel count/,
    );
  });
});
