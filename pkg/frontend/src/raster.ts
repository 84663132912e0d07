/**
 * Backing model for a doodle canvas: an RGBA raster painted with hard-edged
 * palette colors.
 *
 * Labels are categorical, so there is deliberately no antialiasing anywhere:
 * a pixel either carries exactly one palette color (alpha 255) or is fully
 * transparent (all four bytes 0). The raster can be smaller than the image
 * it annotates — any scale from 1 down to 1/4 — as long as it keeps the same
 * aspect ratio; `exportRaster` returns exactly these pixels, nothing
 * resampled.
 */

import { activeLabel, type LabelPalette } from './palette.js';

export const MIN_SCALE = 0.25;
export const UNDO_LIMIT = 32;

export interface DoodleCanvas {
  readonly width: number;
  readonly height: number;
  readonly palette: LabelPalette;
  brushSize: number;
  /** RGBA, row-major, length width*height*4. Mutated in place by the tools. */
  pixels: Uint8ClampedArray;
  /** Snapshots taken before each stroke/fill, newest last. */
  undoStack: Uint8ClampedArray[];
}

/**
 * Create an empty (fully transparent) canvas for an image of the given size.
 *
 * `scale` picks the raster resolution relative to the image; 1 is full
 * resolution, 0.25 the coarsest allowed.
 */
export function createCanvas(
  imageWidth: number,
  imageHeight: number,
  palette: LabelPalette,
  scale = 1,
): DoodleCanvas {
  if (!(imageWidth > 0) || !(imageHeight > 0)) {
    throw new Error(`image size must be positive, got ${imageWidth}x${imageHeight}`);
  }
  if (!(scale >= MIN_SCALE && scale <= 1)) {
    throw new Error(`scale must be in [${MIN_SCALE}, 1], got ${scale}`);
  }
  const width = Math.max(1, Math.round(imageWidth * scale));
  const height = Math.max(1, Math.round(imageHeight * scale));
  return {
    width,
    height,
    palette,
    brushSize: 4,
    pixels: new Uint8ClampedArray(width * height * 4),
    undoStack: [],
  };
}

function pushUndo(canvas: DoodleCanvas): void {
  canvas.undoStack.push(new Uint8ClampedArray(canvas.pixels));
  if (canvas.undoStack.length > UNDO_LIMIT) {
    canvas.undoStack.shift();
  }
}

/** Restore the raster as it was before the latest stroke/fill. */
export function undo(canvas: DoodleCanvas): boolean {
  const snapshot = canvas.undoStack.pop();
  if (snapshot === undefined) return false;
  canvas.pixels = snapshot;
  return true;
}

/**
 * Start a stroke: snapshots the raster so the whole stroke (every
 * `paintAt`/`eraseAt` until the pointer lifts) undoes as one step.
 */
export function beginStroke(canvas: DoodleCanvas): void {
  pushUndo(canvas);
}

function stamp(canvas: DoodleCanvas, x: number, y: number, rgba: readonly number[]): void {
  const half = Math.floor(canvas.brushSize / 2);
  const x0 = Math.max(0, Math.floor(x) - half);
  const y0 = Math.max(0, Math.floor(y) - half);
  const x1 = Math.min(canvas.width - 1, x0 + canvas.brushSize - 1);
  const y1 = Math.min(canvas.height - 1, y0 + canvas.brushSize - 1);
  for (let py = y0; py <= y1; py++) {
    for (let px = x0; px <= x1; px++) {
      const at = (py * canvas.width + px) * 4;
      canvas.pixels[at] = rgba[0];
      canvas.pixels[at + 1] = rgba[1];
      canvas.pixels[at + 2] = rgba[2];
      canvas.pixels[at + 3] = rgba[3];
    }
  }
}

/** Paint a square, hard-edged brush stamp of the active label at (x, y). */
export function paintAt(canvas: DoodleCanvas, x: number, y: number): void {
  const { color } = activeLabel(canvas.palette);
  stamp(canvas, x, y, [color[0], color[1], color[2], 255]);
}

/** Erase back to transparent with the same square stamp. */
export function eraseAt(canvas: DoodleCanvas, x: number, y: number): void {
  stamp(canvas, x, y, [0, 0, 0, 0]);
}

function samePixel(pixels: Uint8ClampedArray, at: number, rgba: readonly number[]): boolean {
  return (
    pixels[at] === rgba[0] &&
    pixels[at + 1] === rgba[1] &&
    pixels[at + 2] === rgba[2] &&
    pixels[at + 3] === rgba[3]
  );
}

/**
 * Flood-fill the 4-connected region of pixels that exactly match the pixel
 * under (x, y) with the active label. Any differing pixel — e.g. a painted
 * boundary — stops the fill, so a closed outline confines it.
 */
export function floodFill(canvas: DoodleCanvas, x: number, y: number): void {
  const sx = Math.floor(x);
  const sy = Math.floor(y);
  if (sx < 0 || sx >= canvas.width || sy < 0 || sy >= canvas.height) return;

  const { color } = activeLabel(canvas.palette);
  const fill = [color[0], color[1], color[2], 255];
  const start = (sy * canvas.width + sx) * 4;
  const target = [
    canvas.pixels[start],
    canvas.pixels[start + 1],
    canvas.pixels[start + 2],
    canvas.pixels[start + 3],
  ];
  if (samePixel(canvas.pixels, start, fill)) return;

  pushUndo(canvas);
  const stack: number[] = [sx, sy];
  while (stack.length) {
    const cy = stack.pop()!;
    const cx = stack.pop()!;
    const at = (cy * canvas.width + cx) * 4;
    if (!samePixel(canvas.pixels, at, target)) continue;
    canvas.pixels[at] = fill[0];
    canvas.pixels[at + 1] = fill[1];
    canvas.pixels[at + 2] = fill[2];
    canvas.pixels[at + 3] = fill[3];
    if (cx + 1 < canvas.width) stack.push(cx + 1, cy);
    if (cx - 1 >= 0) stack.push(cx - 1, cy);
    if (cy + 1 < canvas.height) stack.push(cx, cy + 1);
    if (cy - 1 >= 0) stack.push(cx, cy - 1);
  }
}

/** True while nothing has been painted (every pixel fully transparent). */
export function isBlank(canvas: DoodleCanvas): boolean {
  for (let i = 3; i < canvas.pixels.length; i += 4) {
    if (canvas.pixels[i] !== 0) return false;
  }
  return true;
}

/** A copy of the exact raster — what the exported PNG will contain. */
export function exportRaster(canvas: DoodleCanvas): Uint8ClampedArray {
  return new Uint8ClampedArray(canvas.pixels);
}

/** The RGBA tuple at integer pixel coordinates, for tests and pickers. */
export function pixelAt(canvas: DoodleCanvas, x: number, y: number): [number, number, number, number] {
  const at = (y * canvas.width + x) * 4;
  return [
    canvas.pixels[at],
    canvas.pixels[at + 1],
    canvas.pixels[at + 2],
    canvas.pixels[at + 3],
  ];
}
