/**
 * Binds a DoodleCanvas raster to an HTMLCanvasElement: draws the image
 * underneath, the doodle on top, and turns pointer events into model edits.
 * All rendering uses nearest-neighbour scaling so label edges stay hard on
 * screen no matter the raster scale.
 */

import {
  beginStroke,
  eraseAt,
  floodFill,
  paintAt,
  type DoodleCanvas,
} from './raster.js';

export type Tool = 'paint' | 'erase' | 'fill';

const OVERLAY_ALPHA = 0.55;

export class CanvasView {
  private overlay: HTMLCanvasElement;
  private stroking = false;

  constructor(
    readonly element: HTMLCanvasElement,
    readonly doodle: DoodleCanvas,
    private readonly image: ImageBitmap,
    private readonly getTool: () => Tool,
    private readonly onEdit: () => void,
  ) {
    this.overlay = document.createElement('canvas');
    this.overlay.width = doodle.width;
    this.overlay.height = doodle.height;

    element.addEventListener('pointerdown', (ev) => {
      ev.preventDefault();
      element.setPointerCapture(ev.pointerId);
      const [x, y] = this.toRaster(ev);
      if (this.getTool() === 'fill') {
        floodFill(this.doodle, x, y);
      } else {
        this.stroking = true;
        beginStroke(this.doodle);
        this.applyBrush(x, y);
      }
      this.changed();
    });
    element.addEventListener('pointermove', (ev) => {
      if (!this.stroking) return;
      const [x, y] = this.toRaster(ev);
      this.applyBrush(x, y);
      this.changed();
    });
    const stop = () => {
      this.stroking = false;
    };
    element.addEventListener('pointerup', stop);
    element.addEventListener('pointercancel', stop);
    this.draw();
  }

  private applyBrush(x: number, y: number): void {
    if (this.getTool() === 'erase') {
      eraseAt(this.doodle, x, y);
    } else {
      paintAt(this.doodle, x, y);
    }
  }

  private toRaster(ev: PointerEvent): [number, number] {
    const rect = this.element.getBoundingClientRect();
    const x = ((ev.clientX - rect.left) / rect.width) * this.doodle.width;
    const y = ((ev.clientY - rect.top) / rect.height) * this.doodle.height;
    return [Math.floor(x), Math.floor(y)];
  }

  private changed(): void {
    this.draw();
    this.onEdit();
  }

  draw(): void {
    const ctx = this.element.getContext('2d');
    if (ctx === null) return;
    ctx.imageSmoothingEnabled = false;
    ctx.clearRect(0, 0, this.element.width, this.element.height);
    ctx.drawImage(this.image, 0, 0, this.element.width, this.element.height);

    const octx = this.overlay.getContext('2d');
    if (octx === null) return;
    const data = new ImageData(
      new Uint8ClampedArray(this.doodle.pixels),
      this.doodle.width,
      this.doodle.height,
    );
    octx.putImageData(data, 0, 0);
    ctx.globalAlpha = OVERLAY_ALPHA;
    ctx.drawImage(this.overlay, 0, 0, this.element.width, this.element.height);
    ctx.globalAlpha = 1;
  }
}
