import { describe, expect, it } from 'vitest';

import {
  activeLabel,
  createPalette,
  defaultPalette,
  labelForColor,
  setActiveLabel,
} from '../src/palette.js';
import { createCanvas, paintAt, pixelAt } from '../src/raster.js';

describe('createPalette', () => {
  it('keeps label order and starts with the first label active', () => {
    const palette = createPalette([
      { name: 'sky', color: [0, 0, 255] },
      { name: 'grass', color: [0, 255, 0] },
    ]);
    expect(palette.labels.map((l) => l.name)).toEqual(['sky', 'grass']);
    expect(activeLabel(palette).name).toBe('sky');
  });

  it('rejects duplicate colors', () => {
    expect(() =>
      createPalette([
        { name: 'a', color: [1, 2, 3] },
        { name: 'b', color: [1, 2, 3] },
      ]),
    ).toThrow(/distinct/);
  });

  it('rejects out-of-range color channels', () => {
    expect(() => createPalette([{ name: 'a', color: [0, 256, 0] }])).toThrow(/non-byte/);
  });

  it('rejects an empty palette', () => {
    expect(() => createPalette([])).toThrow(/at least one/);
  });

  it('default palette colors are pairwise distinct', () => {
    const palette = defaultPalette();
    const keys = new Set(palette.labels.map((l) => l.color.join(',')));
    expect(keys.size).toBe(palette.labels.length);
  });

  it('freezes labels against mutation', () => {
    const palette = defaultPalette();
    expect(() => {
      (palette.labels[0] as { name: string }).name = 'hacked';
    }).toThrow();
  });
});

describe('active label switching', () => {
  it('changes what the brush paints', () => {
    const palette = createPalette([
      { name: 'a', color: [10, 20, 30] },
      { name: 'b', color: [40, 50, 60] },
    ]);
    setActiveLabel(palette, 1);
    expect(activeLabel(palette).name).toBe('b');
    expect(() => setActiveLabel(palette, 2)).toThrow(/out of range/);
  });
});

describe('shared palette across canvases', () => {
  it('both canvases paint identical colors for the same label', () => {
    const palette = defaultPalette();
    const contentMap = createCanvas(16, 16, palette);
    const styleMap = createCanvas(32, 32, palette);

    setActiveLabel(palette, 1);
    paintAt(contentMap, 8, 8);
    paintAt(styleMap, 16, 16);

    expect(pixelAt(contentMap, 8, 8)).toEqual(pixelAt(styleMap, 16, 16));
    expect(pixelAt(contentMap, 8, 8).slice(0, 3)).toEqual([...palette.labels[1].color]);
  });

  it('maps palette colors back to labels', () => {
    const palette = defaultPalette();
    const found = labelForColor(palette, palette.labels[2].color);
    expect(found?.name).toBe(palette.labels[2].name);
    expect(labelForColor(palette, [1, 1, 1])).toBeNull();
  });
});
