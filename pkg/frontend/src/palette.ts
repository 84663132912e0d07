/**
 * Label palette shared by the content-map and style-map canvases.
 *
 * Annotation maps are categorical: every painted pixel must carry one of a
 * small set of label colors, and both canvases must use the *same* set so
 * the two exported maps describe the same labels. A single palette object
 * is therefore created once and handed to both canvases.
 */

export type RGB = readonly [number, number, number];

export interface Label {
  readonly name: string;
  readonly color: RGB;
}

export interface LabelPalette {
  readonly labels: readonly Label[];
  /** Index into `labels` of the label the brush currently paints. */
  activeIndex: number;
}

function colorKey(color: RGB): string {
  return color.join(',');
}

function isByte(v: number): boolean {
  return Number.isInteger(v) && v >= 0 && v <= 255;
}

/**
 * Build a palette from an ordered list of labels.
 *
 * Throws if two labels share a color (the canvases could then not tell the
 * regions apart) or if a color channel is outside 0..255.
 */
export function createPalette(labels: Label[]): LabelPalette {
  if (labels.length === 0) {
    throw new Error('palette needs at least one label');
  }
  const seen = new Set<string>();
  for (const label of labels) {
    if (!label.color.every(isByte)) {
      throw new Error(`label "${label.name}" has a non-byte color channel`);
    }
    const key = colorKey(label.color);
    if (seen.has(key)) {
      throw new Error(`palette colors must be distinct; ${key} appears twice`);
    }
    seen.add(key);
  }
  const frozen = labels.map((l) =>
    Object.freeze({ name: l.name, color: Object.freeze([...l.color]) as unknown as RGB }),
  );
  return { labels: Object.freeze(frozen), activeIndex: 0 };
}

/** The label the brush paints right now. */
export function activeLabel(palette: LabelPalette): Label {
  const label = palette.labels[palette.activeIndex];
  if (label === undefined) {
    throw new Error(`active index ${palette.activeIndex} out of range`);
  }
  return label;
}

export function setActiveLabel(palette: LabelPalette, index: number): void {
  if (index < 0 || index >= palette.labels.length) {
    throw new Error(`label index ${index} out of range`);
  }
  palette.activeIndex = index;
}

/** Find the palette entry matching an exact RGB triple, if any. */
export function labelForColor(palette: LabelPalette, color: RGB): Label | null {
  const key = colorKey(color);
  for (const label of palette.labels) {
    if (colorKey(label.color) === key) return label;
  }
  return null;
}

/** A reasonable starter palette; callers can pass their own labels instead. */
export function defaultPalette(): LabelPalette {
  return createPalette([
    { name: 'background', color: [64, 64, 192] },
    { name: 'subject', color: [192, 64, 64] },
    { name: 'detail', color: [64, 192, 64] },
    { name: 'accent', color: [208, 176, 32] },
  ]);
}
