/**
 * Minimal PNG encode/decode for annotation maps and rendered results.
 *
 * Covers exactly what this app produces and consumes: 8-bit depth,
 * greyscale / RGB / grey+alpha / RGBA, non-interlaced. Compression uses the
 * platform's zlib streams (`CompressionStream`/`DecompressionStream`), which
 * Node 20 and evergreen browsers both provide, so no image library is
 * needed. The decoder handles all five scanline filters, so PNGs written by
 * other encoders (such as the render service's results) load fine.
 */

const SIGNATURE = [137, 80, 78, 71, 13, 10, 26, 10];

/** channel count per PNG color type we accept */
const CHANNELS_BY_COLOR_TYPE: Record<number, number> = { 0: 1, 2: 3, 4: 2, 6: 4 };
const COLOR_TYPE_BY_CHANNELS: Record<number, number> = { 1: 0, 2: 4, 3: 2, 4: 6 };

export interface DecodedImage {
  width: number;
  height: number;
  channels: number;
  /** 8-bit samples, row-major, `width * height * channels` bytes. */
  pixels: Uint8Array;
}

export class PngError extends Error {}

// ---------------------------------------------------------------------------
// CRC32 (the standard PNG polynomial)

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(bytes: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    c = CRC_TABLE[(c ^ bytes[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

// ---------------------------------------------------------------------------
// zlib via platform streams

async function zlib(
  data: Uint8Array,
  stream: CompressionStream | DecompressionStream,
): Promise<Uint8Array> {
  const copy = new Uint8Array(data.length);
  copy.set(data);
  const piped = new Blob([copy.buffer]).stream().pipeThrough(stream);
  return new Uint8Array(await new Response(piped).arrayBuffer());
}

const deflate = (data: Uint8Array) => zlib(data, new CompressionStream('deflate'));
const inflate = (data: Uint8Array) => zlib(data, new DecompressionStream('deflate'));

// ---------------------------------------------------------------------------
// Encoding

function chunk(type: string, data: Uint8Array): Uint8Array {
  const out = new Uint8Array(12 + data.length);
  const view = new DataView(out.buffer);
  view.setUint32(0, data.length);
  for (let i = 0; i < 4; i++) out[4 + i] = type.charCodeAt(i);
  out.set(data, 8);
  view.setUint32(8 + data.length, crc32(out.subarray(4, 8 + data.length)));
  return out;
}

/**
 * Encode 8-bit pixels (1, 2, 3 or 4 channels) as a PNG.
 *
 * Scanlines are written unfiltered; annotation maps are flat regions of a
 * few colors, which zlib squeezes well enough without filter heuristics.
 */
export async function encodePng(
  pixels: Uint8Array | Uint8ClampedArray,
  width: number,
  height: number,
  channels: number,
): Promise<Uint8Array> {
  const colorType = COLOR_TYPE_BY_CHANNELS[channels];
  if (colorType === undefined) {
    throw new PngError(`unsupported channel count ${channels}`);
  }
  if (width <= 0 || height <= 0 || pixels.length !== width * height * channels) {
    throw new PngError(
      `pixel buffer length ${pixels.length} does not match ${width}x${height}x${channels}`,
    );
  }

  const ihdr = new Uint8Array(13);
  const ihdrView = new DataView(ihdr.buffer);
  ihdrView.setUint32(0, width);
  ihdrView.setUint32(4, height);
  ihdr[8] = 8; // bit depth
  ihdr[9] = colorType;

  const stride = width * channels;
  const raw = new Uint8Array((stride + 1) * height);
  for (let y = 0; y < height; y++) {
    raw[y * (stride + 1)] = 0; // filter: None
    for (let i = 0; i < stride; i++) {
      raw[y * (stride + 1) + 1 + i] = pixels[y * stride + i];
    }
  }

  const idat = await deflate(raw);
  const parts = [
    new Uint8Array(SIGNATURE),
    chunk('IHDR', ihdr),
    chunk('IDAT', idat),
    chunk('IEND', new Uint8Array(0)),
  ];
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let at = 0;
  for (const part of parts) {
    out.set(part, at);
    at += part.length;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decoding

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

function unfilter(raw: Uint8Array, width: number, height: number, bpp: number): Uint8Array {
  const stride = width * bpp;
  if (raw.length < (stride + 1) * height) {
    throw new PngError('image data is truncated');
  }
  const out = new Uint8Array(stride * height);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const row = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const prev = y > 0 ? out.subarray((y - 1) * stride, y * stride) : null;
    const cur = out.subarray(y * stride, (y + 1) * stride);
    for (let i = 0; i < stride; i++) {
      const left = i >= bpp ? cur[i - bpp] : 0;
      const up = prev ? prev[i] : 0;
      const upLeft = prev && i >= bpp ? prev[i - bpp] : 0;
      let value = row[i];
      switch (filter) {
        case 0:
          break;
        case 1:
          value += left;
          break;
        case 2:
          value += up;
          break;
        case 3:
          value += (left + up) >> 1;
          break;
        case 4:
          value += paeth(left, up, upLeft);
          break;
        default:
          throw new PngError(`unknown scanline filter ${filter}`);
      }
      cur[i] = value & 0xff;
    }
  }
  return out;
}

/** Decode a PNG produced by `encodePng` or by the render service. */
export async function decodePng(bytes: Uint8Array): Promise<DecodedImage> {
  if (bytes.length < 8 || SIGNATURE.some((b, i) => bytes[i] !== b)) {
    throw new PngError('not a PNG file');
  }

  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  let width = 0;
  let height = 0;
  let channels = 0;
  const idatParts: Uint8Array[] = [];
  let at = 8;
  while (at + 8 <= bytes.length) {
    const length = view.getUint32(at);
    const type = String.fromCharCode(bytes[at + 4], bytes[at + 5], bytes[at + 6], bytes[at + 7]);
    const data = bytes.subarray(at + 8, at + 8 + length);
    if (data.length < length) throw new PngError('chunk extends past end of file');
    if (type === 'IHDR') {
      width = view.getUint32(at + 8);
      height = view.getUint32(at + 12);
      const bitDepth = bytes[at + 16];
      const colorType = bytes[at + 17];
      const interlace = bytes[at + 20];
      if (bitDepth !== 8) throw new PngError(`unsupported bit depth ${bitDepth}`);
      if (interlace !== 0) throw new PngError('interlaced PNGs are not supported');
      const ch = CHANNELS_BY_COLOR_TYPE[colorType];
      if (ch === undefined) throw new PngError(`unsupported color type ${colorType}`);
      channels = ch;
    } else if (type === 'IDAT') {
      idatParts.push(data);
    } else if (type === 'IEND') {
      break;
    }
    at += 12 + length;
  }
  if (width === 0 || channels === 0) throw new PngError('missing IHDR chunk');
  if (idatParts.length === 0) throw new PngError('missing IDAT chunk');

  const compressed = new Uint8Array(idatParts.reduce((n, p) => n + p.length, 0));
  let offset = 0;
  for (const part of idatParts) {
    compressed.set(part, offset);
    offset += part.length;
  }
  const raw = await inflate(compressed);
  return { width, height, channels, pixels: unfilter(raw, width, height, channels) };
}
